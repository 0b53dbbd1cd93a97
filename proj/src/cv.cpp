#include "tddmn/cv.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "tddmn/error.hpp"

namespace tddmn {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kEmbedTag = 0x656d62ULL;
constexpr std::uint64_t kInitTag = 0x696e6974ULL;
constexpr std::uint64_t kTrainTag = 0x7472616eULL;

double round1(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace

CvReport cross_validate(const Corpus& corpus, const ModelConfig& base_config,
                        const TrainConfig& base_train, const std::vector<std::size_t>& hops,
                        std::size_t k, std::uint64_t seed, const FoldSplit* fixed_split,
                        bool empty_question, bool verbose) {
  if (hops.empty()) throw config_error("cv: need at least one hop setting");

  CvReport report;
  report.k = k;
  report.seed = seed;
  report.empty_question = empty_question;
  report.split = fixed_split ? *fixed_split : kfold_split(corpus, k, seed);
  if (report.split.folds.size() != k) {
    throw config_error("cv: fold manifest has " + std::to_string(report.split.folds.size()) +
                       " folds, expected " + std::to_string(k));
  }

  std::unordered_map<std::string, std::size_t> doc_index;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    doc_index.emplace(corpus.documents[i].doc_id, i);
  }

  for (std::size_t hop_count : hops) {
    HopRow row;
    row.hops = hop_count;
    double f1_total = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      std::set<std::string> held_out(report.split.folds[f].begin(),
                                     report.split.folds[f].end());
      Corpus train_corpus;
      train_corpus.inventory = corpus.inventory;
      std::vector<Document> test_docs;
      for (const Document& d : corpus.documents) {
        if (held_out.count(d.doc_id)) {
          test_docs.push_back(d);
        } else {
          train_corpus.documents.push_back(d);
        }
      }
      for (const std::string& id : report.split.folds[f]) {
        if (!doc_index.count(id)) {
          throw data_error("cv: manifest document " + id + " not present in corpus");
        }
      }
      if (train_corpus.documents.empty() || test_docs.empty()) {
        throw data_error("cv: fold " + std::to_string(f) + " leaves an empty split");
      }

      ModelConfig config = base_config;
      config.hops = hop_count;
      config.empty_question = empty_question;
      config.O = corpus.inventory.num_event_types();

      EmbeddingTable emb = build_embeddings(train_corpus, std::nullopt, config.D_w,
                                            mix_seed(seed, hop_count, f, kEmbedTag));
      const auto train_encoded =
          encode_documents(train_corpus.documents, emb.vocab, corpus.inventory);
      const auto test_encoded = encode_documents(test_docs, emb.vocab, corpus.inventory);

      Rng init_rng(mix_seed(seed, hop_count, f, kInitTag));
      TdDmn model(config, ModelParams::init(config, emb.matrix,
                                            corpus.inventory.entity_types.size(), init_rng));

      TrainConfig tc = base_train;
      tc.seed = mix_seed(seed, hop_count, f, kTrainTag);
      train(model, train_encoded, tc);

      FoldResult fold_result;
      fold_result.fold = f;
      fold_result.score = evaluate(model, test_encoded);
      f1_total += fold_result.score.f1;
      if (verbose) {
        std::cerr << "cv: hops=" << hop_count << " fold=" << f << " P=" << fold_result.score.precision
                  << " R=" << fold_result.score.recall << " F1=" << fold_result.score.f1 << "\n";
      }
      row.folds.push_back(fold_result);
    }
    row.avg_f1 = f1_total / static_cast<double>(k);
    report.rows.push_back(std::move(row));
  }
  return report;
}

AblationReport ablate_question(const Corpus& corpus, const ModelConfig& base_config,
                               const TrainConfig& base_train,
                               const std::vector<std::size_t>& hops, std::size_t k,
                               std::uint64_t seed, bool verbose) {
  AblationReport report;
  const FoldSplit split = kfold_split(corpus, k, seed);
  report.untouched =
      cross_validate(corpus, base_config, base_train, hops, k, seed, &split, false, verbose);
  report.empty =
      cross_validate(corpus, base_config, base_train, hops, k, seed, &split, true, verbose);
  for (std::size_t i = 0; i < hops.size(); ++i) {
    report.rows.push_back(
        {hops[i], report.untouched.rows[i].avg_f1, report.empty.rows[i].avg_f1});
  }
  return report;
}

ordered_json cv_report_json(const CvReport& report) {
  ordered_json j;
  j["k"] = report.k;
  j["seed"] = report.seed;
  j["empty_question"] = report.empty_question;
  ordered_json rows = ordered_json::array();
  for (const HopRow& row : report.rows) {
    ordered_json folds = ordered_json::array();
    for (const FoldResult& fr : row.folds) {
      folds.push_back(ordered_json{{"fold", fr.fold},
                                   {"precision", fr.score.precision},
                                   {"recall", fr.score.recall},
                                   {"f1", fr.score.f1}});
    }
    rows.push_back(ordered_json{{"hops", row.hops}, {"folds", std::move(folds)},
                                {"avg_f1", row.avg_f1}});
  }
  j["rows"] = std::move(rows);
  return j;
}

ordered_json ablation_report_json(const AblationReport& report) {
  ordered_json j;
  j["untouched"] = cv_report_json(report.untouched);
  j["empty_question"] = cv_report_json(report.empty);
  ordered_json rows = ordered_json::array();
  for (const AblationRow& r : report.rows) {
    rows.push_back(ordered_json{{"hops", r.hops}, {"f1", r.f1}, {"f1_star", r.f1_star}});
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string render_cv_table(const CvReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(16) << "Method";
  for (std::size_t f = 0; f < report.k; ++f) {
    os << std::left << std::setw(18) << ("Fold " + std::to_string(f + 1));
  }
  os << "Avg\n" << std::setw(16) << "";
  for (std::size_t f = 0; f < report.k; ++f) {
    os << std::left << std::setw(6) << "P" << std::setw(6) << "R" << std::setw(6) << "F1";
  }
  os << "F1\n";
  for (const HopRow& row : report.rows) {
    std::string label = "TD-DMN " + std::to_string(row.hops) + "-hop";
    if (report.empty_question) label += "*";
    os << std::left << std::setw(16) << label;
    for (const FoldResult& fr : row.folds) {
      os << std::left << std::setw(6) << round1(fr.score.precision) << std::setw(6)
         << round1(fr.score.recall) << std::setw(6) << round1(fr.score.f1);
    }
    os << round1(row.avg_f1) << "\n";
  }
  return os.str();
}

std::string render_ablation_table(const AblationReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(16) << "Method" << std::setw(8) << "F1" << "F1*\n";
  for (const AblationRow& r : report.rows) {
    os << std::left << std::setw(16) << ("TD-DMN " + std::to_string(r.hops) + "-hop")
       << std::setw(8) << round1(r.f1) << round1(r.f1_star) << "\n";
  }
  return os.str();
}

}  // namespace tddmn
