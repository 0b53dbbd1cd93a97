#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tddmn/checkpoint.hpp"
#include "tddmn/cv.hpp"
#include "tddmn/error.hpp"
#include "tddmn/eval.hpp"
#include "tddmn/synth.hpp"
#include "tddmn/train.hpp"

namespace {

using tddmn::Corpus;
using tddmn::ModelConfig;
using tddmn::TrainConfig;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

// Flat JSON with TrainConfig + ModelConfig fields; every field optional.
RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tddmn::config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw tddmn::config_error(std::string("config parse: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("H")) c.model.H = j["H"].get<std::size_t>();
    if (j.contains("hops")) c.model.hops = j["hops"].get<std::size_t>();
    if (j.contains("D_w")) c.model.D_w = j["D_w"].get<std::size_t>();
    if (j.contains("D_e")) c.model.D_e = j["D_e"].get<std::size_t>();
    if (j.contains("dropout_answer")) c.model.dropout_answer = j["dropout_answer"].get<double>();
    if (j.contains("dropout_other")) c.model.dropout_other = j["dropout_other"].get<double>();
    if (j.contains("empty_question")) c.model.empty_question = j["empty_question"].get<bool>();
    if (j.contains("epochs")) c.train.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size_docs"))
      c.train.batch_size_docs = j["batch_size_docs"].get<std::size_t>();
    if (j.contains("lr")) c.train.lr = j["lr"].get<double>();
    if (j.contains("seed")) c.train.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("downsample_ratio")) c.train.downsample_ratio = j["downsample_ratio"].get<double>();
    if (j.contains("weight_decay")) c.train.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("patience")) c.train.patience = j["patience"].get<std::size_t>();
    if (j.contains("dev_fraction")) c.train.dev_fraction = j["dev_fraction"].get<double>();
  } catch (const json::exception& e) {
    throw tddmn::config_error(std::string("config: ") + e.what());
  }
  return c;
}

Corpus load_preprocessed(const std::string& corpus_path, const std::string& stopword_path) {
  const tddmn::StopwordSet stopwords = tddmn::load_stopwords(stopword_path);
  const Corpus raw = tddmn::load_corpus(corpus_path);
  tddmn::PreprocessStats stats;
  Corpus prepared = tddmn::preprocess_corpus(raw, stopwords, &stats);
  if (stats.dropped_documents > 0) {
    std::cerr << "warning: " << stats.dropped_documents
              << " document(s) had no sentences left after preprocessing\n";
  }
  return prepared;
}

std::vector<std::size_t> parse_hops(const std::string& spec) {
  std::vector<std::size_t> hops;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const long v = std::stol(part);
    if (v < 1) throw tddmn::config_error("hops must be >= 1");
    hops.push_back(static_cast<std::size_t>(v));
  }
  if (hops.empty()) throw tddmn::config_error("no hop settings given");
  return hops;
}

int cmd_gen_corpus(const std::string& config_path, std::uint64_t seed,
                   const std::string& out_path) {
  tddmn::GenConfig config =
      config_path.empty() ? tddmn::GenConfig{} : tddmn::gen_config_from_json_file(config_path);
  const Corpus corpus = tddmn::generate_synthetic(config, seed);
  tddmn::save_corpus(corpus, out_path);
  std::cout << "wrote " << corpus.documents.size() << " documents to " << out_path << "\n";
  return kExitOk;
}

int cmd_train(const std::string& corpus_path, const std::string& config_path,
              const std::string& stopword_path, const std::string& embedding_path,
              const std::string& out_path) {
  RunConfig rc = config_path.empty() ? RunConfig{} : read_run_config(config_path);
  Corpus corpus = load_preprocessed(corpus_path, stopword_path);
  if (corpus.documents.empty()) throw tddmn::data_error("training corpus is empty");

  rc.model.O = corpus.inventory.num_event_types();
  const std::optional<std::string> emb_file =
      embedding_path.empty() ? std::nullopt : std::make_optional(embedding_path);
  tddmn::EmbeddingTable emb = tddmn::build_embeddings(
      corpus, emb_file, rc.model.D_w, tddmn::mix_seed(rc.train.seed, 0x656d62ULL));
  const auto encoded =
      tddmn::encode_documents(corpus.documents, emb.vocab, corpus.inventory);

  tddmn::Rng init_rng(tddmn::mix_seed(rc.train.seed, 0x696e6974ULL));
  tddmn::TdDmn model(rc.model, tddmn::ModelParams::init(
                                   rc.model, emb.matrix,
                                   corpus.inventory.entity_types.size(), init_rng));
  const tddmn::TrainResult result = tddmn::train(model, encoded, rc.train);

  tddmn::save_checkpoint(out_path, model, emb.vocab, corpus.inventory, rc.train.seed);
  std::cout << "trained " << result.epochs_run << " epoch(s); final mean loss "
            << result.loss_curve.back() << "; checkpoint written to " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& stopword_path) {
  const tddmn::Checkpoint ck = tddmn::load_checkpoint(ckpt_path);
  const tddmn::StopwordSet stopwords = tddmn::load_stopwords(stopword_path);
  const Corpus raw = tddmn::load_corpus(corpus_path, ck.inventory);
  const Corpus prepared = tddmn::preprocess_corpus(raw, stopwords);
  const auto encoded =
      tddmn::encode_documents(prepared.documents, ck.vocab, ck.inventory);

  tddmn::TdDmn model(ck.config, ck.params);
  tddmn::PrfCounts counts;
  const tddmn::PrfScore score = tddmn::evaluate(model, encoded, &counts);
  nlohmann::ordered_json out{{"documents", encoded.size()},
                             {"predicted", counts.predicted},
                             {"gold", counts.gold},
                             {"correct", counts.correct},
                             {"precision", score.precision},
                             {"recall", score.recall},
                             {"f1", score.f1}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_cv(const std::string& corpus_path, const std::string& config_path,
           const std::string& stopword_path, const std::string& hops_spec, std::size_t k,
           std::uint64_t seed, const std::string& out_dir, bool verbose) {
  RunConfig rc = config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const Corpus corpus = load_preprocessed(corpus_path, stopword_path);
  const std::vector<std::size_t> hops = parse_hops(hops_spec);

  const tddmn::CvReport report =
      cross_validate(corpus, rc.model, rc.train, hops, k, seed, nullptr, false, verbose);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream jf(out_dir + "/report.json");
    jf << tddmn::cv_report_json(report).dump(2) << "\n";
  }
  tddmn::save_fold_manifest(report.split, out_dir + "/folds.manifest");
  const std::string table = tddmn::render_cv_table(report);
  {
    std::ofstream tf(out_dir + "/report.txt");
    tf << table;
  }
  std::cout << table;
  return kExitOk;
}

int cmd_ablate(const std::string& corpus_path, const std::string& config_path,
               const std::string& stopword_path, const std::string& hops_spec, std::size_t k,
               std::uint64_t seed, const std::string& out_dir, bool verbose) {
  RunConfig rc = config_path.empty() ? RunConfig{} : read_run_config(config_path);
  const Corpus corpus = load_preprocessed(corpus_path, stopword_path);
  const std::vector<std::size_t> hops = parse_hops(hops_spec);

  const tddmn::AblationReport report =
      ablate_question(corpus, rc.model, rc.train, hops, k, seed, verbose);
  const std::string table = tddmn::render_ablation_table(report);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream jf(out_dir + "/ablation.json");
    jf << tddmn::ablation_report_json(report).dump(2) << "\n";
    std::ofstream tf(out_dir + "/ablation.txt");
    tf << table;
  }
  std::cout << table;
  return kExitOk;
}

int cmd_gradcheck(bool full) {
  const double tiny = tddmn::full_model_grad_check();
  std::cout << "full-model gradient check (tiny config): max rel err = " << tiny << "\n";
  bool ok = tiny < 1e-4;
  if (full) {
    // Sweep a second seed and a 1-hop configuration through the same check.
    const double again = tddmn::full_model_grad_check(99);
    std::cout << "full-model gradient check (second seed): max rel err = " << again << "\n";
    ok = ok && again < 1e-4;
  }
  std::cout << (ok ? "PASS" : "FAIL") << " (threshold 1e-4)\n";
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TD-DMN: document-context event trigger detection"};
  app.require_subcommand(1);

  std::string config_path, corpus_path, out_path, ckpt_path, embedding_path;
  std::string hops_spec = "1";
  std::string stopword_path = "data/stopwords.txt";
  std::uint64_t seed = 1;
  std::size_t k = 5;
  bool full = false;
  bool verbose = false;

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  gen->add_option("--config", config_path, "Generator config JSON");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out_path, "Output corpus path")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--corpus", corpus_path, "Corpus path")->required();
  train_cmd->add_option("--config", config_path, "Model/training config JSON");
  train_cmd->add_option("--stopwords", stopword_path, "Stopword list");
  train_cmd->add_option("--embeddings", embedding_path,
                        "Pretrained embedding file (token then D_w values per line)");
  train_cmd->add_option("--out", out_path, "Checkpoint output path")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
  eval_cmd->add_option("--corpus", corpus_path, "Corpus path")->required();
  eval_cmd->add_option("--stopwords", stopword_path, "Stopword list");

  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  cv_cmd->add_option("--corpus", corpus_path, "Corpus path")->required();
  cv_cmd->add_option("--config", config_path, "Model/training config JSON");
  cv_cmd->add_option("--stopwords", stopword_path, "Stopword list");
  cv_cmd->add_option("--hops", hops_spec, "Comma-separated hop counts");
  cv_cmd->add_option("--k", k, "Number of folds");
  cv_cmd->add_option("--seed", seed, "Experiment seed");
  cv_cmd->add_option("--out", out_path, "Report output directory")->required();
  cv_cmd->add_flag("--verbose", verbose, "Per-fold progress on stderr");

  auto* ablate_cmd = app.add_subcommand("ablate", "Question-module ablation (paired CV)");
  ablate_cmd->add_option("--corpus", corpus_path, "Corpus path")->required();
  ablate_cmd->add_option("--config", config_path, "Model/training config JSON");
  ablate_cmd->add_option("--stopwords", stopword_path, "Stopword list");
  ablate_cmd->add_option("--hops", hops_spec, "Comma-separated hop counts");
  ablate_cmd->add_option("--k", k, "Number of folds");
  ablate_cmd->add_option("--seed", seed, "Experiment seed");
  ablate_cmd->add_option("--out", out_path, "Report output directory");
  ablate_cmd->add_flag("--verbose", verbose, "Per-fold progress on stderr");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference model check");
  gradcheck_cmd->add_flag("--full", full, "Repeat with a second seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_corpus(config_path, seed, out_path);
    if (train_cmd->parsed())
      return cmd_train(corpus_path, config_path, stopword_path, embedding_path, out_path);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, corpus_path, stopword_path);
    if (cv_cmd->parsed())
      return cmd_cv(corpus_path, config_path, stopword_path, hops_spec, k, seed, out_path,
                    verbose);
    if (ablate_cmd->parsed())
      return cmd_ablate(corpus_path, config_path, stopword_path, hops_spec, k, seed, out_path,
                        verbose);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(full);
  } catch (const tddmn::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const tddmn::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const tddmn::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
