#pragma once

#include <stdexcept>
#include <string>

namespace tddmn {

// Bad flags, malformed config files, inconsistent hyperparameters. CLI exit 1.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed corpus/embedding/checkpoint files, label mismatches. CLI exit 2.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradients during training. CLI exit 3.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape/argument contract violations.
struct shape_error : std::invalid_argument {
  explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace tddmn
