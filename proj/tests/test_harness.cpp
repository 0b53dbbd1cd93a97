#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "tddmn/checkpoint.hpp"
#include "tddmn/cv.hpp"
#include "tddmn/eval.hpp"
#include "tddmn/optim.hpp"
#include "tddmn/synth.hpp"
#include "tddmn/train.hpp"

using namespace tddmn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tddmn_harness_" + name)).string();
}

// Small corpus + model for fast end-to-end runs.
GenConfig small_gen() {
  GenConfig c;
  c.num_documents = 24;
  c.sentences_min = 5;
  c.sentences_max = 6;
  c.tokens_min = 3;
  c.tokens_max = 4;
  c.filler_vocab = 30;
  c.chain_depth2_fraction = 0.0;
  return c;
}

ModelConfig small_model_config() {
  ModelConfig c;
  c.H = 6;
  c.D_w = 5;
  c.D_e = 3;
  return c;
}

struct Prepared {
  Corpus corpus;
  EmbeddingTable emb;
  std::vector<EncodedDocument> docs;
};

Prepared prepare(const GenConfig& gc, std::uint64_t seed, std::size_t d_w) {
  Prepared p;
  p.corpus = generate_synthetic(gc, seed);
  p.emb = build_embeddings(p.corpus, std::nullopt, d_w, seed);
  p.docs = encode_documents(p.corpus.documents, p.emb.vocab, p.corpus.inventory);
  return p;
}

// Brute-force scorer: quadratic scan over gold for every prediction.
PrfCounts brute_force_score(const std::vector<TriggerMention>& gold,
                            const std::vector<TriggerMention>& predicted) {
  PrfCounts c;
  c.gold = gold.size();
  c.predicted = predicted.size();
  for (const TriggerMention& p : predicted) {
    for (const TriggerMention& g : gold) {
      if (p.doc_id == g.doc_id && p.start == g.start && p.end == g.end &&
          p.label == g.label) {
        ++c.correct;
        break;
      }
    }
  }
  return c;
}

}  // namespace

TEST_CASE("adam no-op on zero gradients without weight decay") {
  Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  w.zero_grad();
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState adam({{"w", w}}, cfg);
  adam.step();
  CHECK(adam.step_count() == 1);
  CHECK(w.values() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam bias-corrected first step") {
  Tensor w = Tensor::scalar(1.0, true);
  w.grad()[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamState adam({{"w", w}}, cfg);
  adam.step();
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(w.values()[0] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("adam requires populated gradients") {
  Tensor w = Tensor::scalar(1.0, true);
  AdamState adam({{"w", w}}, AdamConfig{});
  CHECK_THROWS_AS(adam.step(), numeric_error);
}

TEST_CASE("adam drives a convex quadratic down monotonically after warmup") {
  Tensor w = Tensor::from({4}, {5.0, -3.0, 2.0, 8.0}, true);
  const std::vector<double> target{1.0, 1.0, -2.0, 0.0};
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  AdamState adam({{"w", w}}, cfg);
  const auto loss_value = [&]() {
    double l = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      l += (w.values()[i] - target[i]) * (w.values()[i] - target[i]);
    }
    return l;
  };
  double prev = loss_value();
  for (int step = 0; step < 400; ++step) {
    w.zero_grad();
    for (std::size_t i = 0; i < 4; ++i) {
      w.grad()[i] = 2.0 * (w.values()[i] - target[i]);
    }
    adam.step();
    const double cur = loss_value();
    if (step >= 10 && prev > 1e-6) CHECK(cur < prev);
    prev = cur;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("scorer arithmetic and boundaries") {
  PrfScore s = score_from_counts({4, 5, 2});
  CHECK(s.precision == doctest::Approx(50.0));
  CHECK(s.recall == doctest::Approx(40.0));
  CHECK(std::round(s.f1 * 10.0) / 10.0 == doctest::Approx(44.4));

  PrfScore zero = score_from_counts({0, 5, 0});
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);

  PrfScore no_gold = score_from_counts({3, 0, 0});
  CHECK(no_gold.f1 == 0.0);
}

TEST_CASE("scorer agrees with the brute-force oracle on random sets") {
  Rng rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TriggerMention> gold, predicted;
    const std::size_t n_gold = rng.below(8);
    const std::size_t n_pred = rng.below(8);
    for (std::size_t i = 0; i < n_gold; ++i) {
      const int pos = static_cast<int>(rng.below(6)) * 5;
      gold.push_back({"d" + std::to_string(rng.below(3)), pos, pos + 4,
                      static_cast<int>(1 + rng.below(3))});
    }
    for (std::size_t i = 0; i < n_pred; ++i) {
      const int pos = static_cast<int>(rng.below(6)) * 5;
      predicted.push_back({"d" + std::to_string(rng.below(3)), pos, pos + 4,
                           static_cast<int>(1 + rng.below(3))});
    }
    // Library scorer treats gold as a set; dedupe for the oracle too.
    std::sort(gold.begin(), gold.end(), [](const TriggerMention& a, const TriggerMention& b) {
      return std::tie(a.doc_id, a.start, a.end, a.label) <
             std::tie(b.doc_id, b.start, b.end, b.label);
    });
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());

    const PrfCounts lib = score_mentions(gold, predicted);
    const PrfCounts ref = brute_force_score(gold, predicted);
    CHECK(lib.gold == ref.gold);
    CHECK(lib.predicted == ref.predicted);
    CHECK(lib.correct == ref.correct);
  }
}

TEST_CASE("training is deterministic and leaves frozen embeddings untouched") {
  Prepared p = prepare(small_gen(), 51, 5);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 9;

  ModelConfig mc = small_model_config();
  mc.O = p.corpus.inventory.num_event_types();

  const auto run = [&]() {
    Rng rng(77);
    Tensor emb = Tensor::from(p.emb.matrix.shape(), p.emb.matrix.values());
    TdDmn model(mc, ModelParams::init(mc, emb, p.corpus.inventory.entity_types.size(), rng));
    TrainResult r = train(model, p.docs, tc);
    return std::make_pair(r.loss_curve, model.params().W_out.values());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);

  // Frozen table is bit-identical across a whole training run.
  Rng rng(77);
  Tensor emb = Tensor::from(p.emb.matrix.shape(), p.emb.matrix.values());
  const std::vector<double> before = emb.values();
  TdDmn model(mc, ModelParams::init(mc, emb, p.corpus.inventory.entity_types.size(), rng));
  train(model, p.docs, tc);
  CHECK(model.params().word_embedding.values() == before);
}

TEST_CASE("loss curve drops by at least half from the first epoch") {
  Prepared p = prepare(small_gen(), 58, 5);
  ModelConfig mc = small_model_config();
  mc.O = p.corpus.inventory.num_event_types();
  Rng rng(8);
  TdDmn model(mc,
              ModelParams::init(mc, p.emb.matrix, p.corpus.inventory.entity_types.size(), rng));
  TrainConfig tc;
  tc.epochs = 25;
  tc.lr = 3e-3;
  tc.seed = 6;
  TrainResult r = train(model, p.docs, tc);
  REQUIRE(r.loss_curve.size() == 25);
  CHECK(r.loss_curve.back() <= 0.5 * r.loss_curve.front());
}

TEST_CASE("training throws numeric_error on non-finite loss") {
  Prepared p = prepare(small_gen(), 52, 5);
  ModelConfig mc = small_model_config();
  mc.O = p.corpus.inventory.num_event_types();
  Rng rng(1);
  TdDmn model(mc,
              ModelParams::init(mc, p.emb.matrix, p.corpus.inventory.entity_types.size(), rng));
  model.params().W_out.values()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(model, p.docs, tc), numeric_error);
}

TEST_CASE("training rejects an empty corpus") {
  ModelConfig mc = small_model_config();
  Rng rng(1);
  Tensor emb = Tensor::uniform({4, 5}, rng, -0.1, 0.1);
  TdDmn model(mc, ModelParams::init(mc, emb, 2, rng));
  TrainConfig tc;
  CHECK_THROWS_AS(train(model, std::vector<EncodedDocument>{}, tc), data_error);
}

TEST_CASE("cross_validate report shape and train/test isolation") {
  GenConfig gc = small_gen();
  gc.num_documents = 15;
  Corpus corpus = generate_synthetic(gc, 53);
  ModelConfig mc = small_model_config();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size_docs = 4;

  CvReport report = cross_validate(corpus, mc, tc, {1, 2}, 3, 99);
  REQUIRE(report.rows.size() == 2);
  for (const HopRow& row : report.rows) {
    CHECK(row.folds.size() == 3);
    double total = 0.0;
    for (const FoldResult& fr : row.folds) total += fr.score.f1;
    CHECK(row.avg_f1 == doctest::Approx(total / 3.0));
  }

  std::set<std::string> seen;
  std::size_t covered = 0;
  for (const auto& fold : report.split.folds) {
    for (const std::string& id : fold) {
      CHECK(seen.insert(id).second);  // disjoint folds
      ++covered;
    }
  }
  CHECK(covered == corpus.documents.size());
}

TEST_CASE("ablation arms share folds and differ only in the flag") {
  GenConfig gc = small_gen();
  gc.num_documents = 12;
  Corpus corpus = generate_synthetic(gc, 54);
  ModelConfig mc = small_model_config();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size_docs = 4;

  AblationReport report = ablate_question(corpus, mc, tc, {1}, 3, 7);
  CHECK(report.untouched.split.folds == report.empty.split.folds);
  CHECK(report.untouched.empty_question == false);
  CHECK(report.empty.empty_question == true);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].f1 == doctest::Approx(report.untouched.rows[0].avg_f1));
  CHECK(report.rows[0].f1_star == doctest::Approx(report.empty.rows[0].avg_f1));
}

TEST_CASE("checkpoint round trip preserves parameters and predictions") {
  Prepared p = prepare(small_gen(), 55, 5);
  ModelConfig mc = small_model_config();
  mc.O = p.corpus.inventory.num_event_types();
  Rng rng(3);
  TdDmn model(mc,
              ModelParams::init(mc, p.emb.matrix, p.corpus.inventory.entity_types.size(), rng));
  TrainConfig tc;
  tc.epochs = 1;
  train(model, p.docs, tc);

  const std::string path = temp_path("ckpt.json");
  save_checkpoint(path, model, p.emb.vocab, p.corpus.inventory, 42);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.seed == 42);
  CHECK(ck.config.H == mc.H);
  CHECK(ck.inventory.event_types == p.corpus.inventory.event_types);
  CHECK(ck.vocab.words == p.emb.vocab.words);

  const auto original = model.params().all();
  const auto restored = ck.params.all();
  REQUIRE(original.size() == restored.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(original[i].first == restored[i].first);
    CHECK(original[i].second.values() == restored[i].second.values());
  }

  TdDmn reloaded(ck.config, ck.params);
  CHECK(evaluate(model, p.docs).f1 == doctest::Approx(evaluate(reloaded, p.docs).f1));

  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.json")), data_error);
}

TEST_CASE("early stopping restores the best parameters") {
  Prepared p = prepare(small_gen(), 56, 5);
  ModelConfig mc = small_model_config();
  mc.O = p.corpus.inventory.num_event_types();
  Rng rng(4);
  TdDmn model(mc,
              ModelParams::init(mc, p.emb.matrix, p.corpus.inventory.entity_types.size(), rng));
  TrainConfig tc;
  tc.epochs = 4;
  tc.patience = 1;
  tc.dev_fraction = 0.25;
  TrainResult r = train(model, p.docs, tc);
  CHECK(r.epochs_run <= 4);
  CHECK(r.best_dev_f1 >= 0.0);
}
