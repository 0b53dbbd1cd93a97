#pragma once

#include <cstdint>
#include <string>

#include "tddmn/corpus.hpp"
#include "tddmn/model.hpp"

namespace tddmn {

// Versioned JSON archive of a trained model: config, seed, label/entity
// inventories, vocabulary, and every parameter as shape + row-major values.
// Doubles are serialized with shortest round-trip precision, so reloading is
// lossless on any platform.
struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  LabelInventory inventory;
  Vocabulary vocab;
  ModelParams params;
};

void save_checkpoint(const std::string& path, const TdDmn& model, const Vocabulary& vocab,
                     const LabelInventory& inventory, std::uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace tddmn
