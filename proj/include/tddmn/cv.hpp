#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tddmn/corpus.hpp"
#include "tddmn/eval.hpp"
#include "tddmn/train.hpp"

namespace tddmn {

struct FoldResult {
  std::size_t fold = 0;
  PrfScore score;
};

struct HopRow {
  std::size_t hops = 1;
  std::vector<FoldResult> folds;
  double avg_f1 = 0.0;
};

struct CvReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool empty_question = false;
  std::vector<HopRow> rows;
  FoldSplit split;
};

// For each hop count and each fold: per-fold vocabulary and embeddings from
// the k-1 training folds, a freshly initialized model, training, and
// evaluation on the held-out fold. All randomness derives from (seed, hops,
// fold), never from the ablation flag, so ablation arms are exactly paired.
CvReport cross_validate(const Corpus& corpus, const ModelConfig& base_config,
                        const TrainConfig& base_train, const std::vector<std::size_t>& hops,
                        std::size_t k, std::uint64_t seed,
                        const FoldSplit* fixed_split = nullptr, bool empty_question = false,
                        bool verbose = false);

struct AblationRow {
  std::size_t hops = 1;
  double f1 = 0.0;       // untouched
  double f1_star = 0.0;  // empty question
};

struct AblationReport {
  CvReport untouched;
  CvReport empty;
  std::vector<AblationRow> rows;
};

AblationReport ablate_question(const Corpus& corpus, const ModelConfig& base_config,
                               const TrainConfig& base_train,
                               const std::vector<std::size_t>& hops, std::size_t k,
                               std::uint64_t seed, bool verbose = false);

nlohmann::ordered_json cv_report_json(const CvReport& report);
nlohmann::ordered_json ablation_report_json(const AblationReport& report);

// Fixed-width tables, one decimal place.
std::string render_cv_table(const CvReport& report);
std::string render_ablation_table(const AblationReport& report);

}  // namespace tddmn
