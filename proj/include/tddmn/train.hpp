#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tddmn/corpus.hpp"
#include "tddmn/model.hpp"
#include "tddmn/optim.hpp"

namespace tddmn {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size_docs = 10;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double downsample_ratio = 9.5;
  double weight_decay = 1e-5;
  // Early stopping on a held-out dev slice; disabled when either is zero.
  std::size_t patience = 0;
  double dev_fraction = 0.0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean masked-token loss per epoch
  std::size_t epochs_run = 0;
  double best_dev_f1 = 0.0;
};

// Per epoch: redraw down-sampling masks, shuffle documents, batch them, and
// take one Adam step per batch on the summed document losses. Deterministic
// given (docs, config, model init). Throws numeric_error if the loss goes
// non-finite.
TrainResult train(TdDmn& model, std::span<const EncodedDocument> docs, const TrainConfig& config);

}  // namespace tddmn
