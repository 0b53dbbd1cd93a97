#include "tddmn/train.hpp"

#include <cmath>
#include <iostream>

#include "tddmn/error.hpp"
#include "tddmn/eval.hpp"

namespace tddmn {

void TrainConfig::validate() const {
  if (epochs < 1) throw config_error("train: epochs must be >= 1");
  if (batch_size_docs < 1) throw config_error("train: batch_size_docs must be >= 1");
  if (lr <= 0.0) throw config_error("train: lr must be positive");
  if (downsample_ratio <= 0.0) throw config_error("train: downsample_ratio must be positive");
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw config_error("train: dev_fraction must be in [0,1)");
  }
}

TrainResult train(TdDmn& model, std::span<const EncodedDocument> docs,
                  const TrainConfig& config) {
  config.validate();
  if (docs.empty()) throw data_error("train: empty training corpus");

  // Optional dev carve-out for early stopping.
  std::vector<EncodedDocument> train_docs(docs.begin(), docs.end());
  std::vector<EncodedDocument> dev_docs;
  const bool early_stop = config.patience > 0 && config.dev_fraction > 0.0;
  if (early_stop) {
    Rng carve(mix_seed(config.seed, 0x64657663ULL));
    carve.shuffle(train_docs);
    const std::size_t dev_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.dev_fraction *
                                                 static_cast<double>(train_docs.size()))));
    if (dev_count >= train_docs.size()) {
      throw config_error("train: dev carve-out leaves no training documents");
    }
    dev_docs.assign(train_docs.end() - static_cast<long>(dev_count), train_docs.end());
    train_docs.resize(train_docs.size() - dev_count);
  }

  AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.weight_decay = config.weight_decay;
  AdamState adam(model.params().trainable(), adam_config);

  Rng dropout_rng(mix_seed(config.seed, 0x64726f70ULL));

  TrainResult result;
  double best_f1 = -1.0;
  std::size_t epochs_since_best = 0;
  std::vector<std::vector<double>> best_values;

  std::vector<std::size_t> order(train_docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const DownsampleResult ds =
        downsample_negatives(train_docs, config.downsample_ratio, config.seed, epoch);
    if (ds.positives == 0 && epoch == 0) {
      std::cerr << "warning: training corpus has no positive triggers; "
                   "down-sampling keeps no negatives\n";
    }

    Rng shuffle_rng(mix_seed(config.seed, 0x65706f63ULL, epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t masked_tokens = 0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += config.batch_size_docs) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + config.batch_size_docs);
      model.params().zero_grads();
      double batch_loss = 0.0;
      for (std::size_t bi = batch_start; bi < batch_end; ++bi) {
        const std::size_t di = order[bi];
        Tape tape;
        DocumentForward fwd = model.forward_document(tape, train_docs[di], true, &dropout_rng);
        Tensor loss = TdDmn::loss(tape, fwd, train_docs[di], ds.masks[di]);
        batch_loss += loss.item();
        tape.backward(loss);
        for (const auto& sent_mask : ds.masks[di]) {
          for (std::uint8_t m : sent_mask) masked_tokens += m;
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw numeric_error("train: non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss;
      adam.step();
    }
    result.loss_curve.push_back(masked_tokens > 0
                                    ? epoch_loss / static_cast<double>(masked_tokens)
                                    : 0.0);
    result.epochs_run = epoch + 1;

    if (early_stop) {
      const PrfScore dev = evaluate(model, dev_docs);
      if (dev.f1 > best_f1) {
        best_f1 = dev.f1;
        epochs_since_best = 0;
        best_values.clear();
        for (const auto& [name, t] : model.params().trainable()) {
          best_values.push_back(t.values());
        }
      } else if (++epochs_since_best >= config.patience) {
        break;
      }
    }
  }

  if (early_stop && !best_values.empty()) {
    auto params = model.params().trainable();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.values() = best_values[i];
    result.best_dev_f1 = best_f1;
  }
  return result;
}

}  // namespace tddmn
