#include "tddmn/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "tddmn/error.hpp"

namespace tddmn {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {
constexpr int kFormatVersion = 1;
}

void save_checkpoint(const std::string& path, const TdDmn& model, const Vocabulary& vocab,
                     const LabelInventory& inventory, std::uint64_t seed) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["seed"] = seed;
  const ModelConfig& c = model.config();
  j["config"] = ordered_json{{"H", c.H},
                             {"hops", c.hops},
                             {"D_w", c.D_w},
                             {"D_e", c.D_e},
                             {"O", c.O},
                             {"dropout_answer", c.dropout_answer},
                             {"dropout_other", c.dropout_other},
                             {"empty_question", c.empty_question}};
  j["event_types"] = inventory.event_types;
  j["entity_types"] = inventory.entity_types;
  j["vocab"] = vocab.words;

  ordered_json params = ordered_json::object();
  for (const auto& [name, t] : model.params().all()) {
    params[name] = ordered_json{{"shape", t.shape()}, {"values", t.values()}};
  }
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw data_error(std::string("checkpoint parse: ") + e.what());
  }

  Checkpoint ck;
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw data_error("checkpoint: unsupported format version");
    }
    ck.seed = j.at("seed").get<std::uint64_t>();
    const json& c = j.at("config");
    ck.config.H = c.at("H").get<std::size_t>();
    ck.config.hops = c.at("hops").get<std::size_t>();
    ck.config.D_w = c.at("D_w").get<std::size_t>();
    ck.config.D_e = c.at("D_e").get<std::size_t>();
    ck.config.O = c.at("O").get<std::size_t>();
    ck.config.dropout_answer = c.at("dropout_answer").get<double>();
    ck.config.dropout_other = c.at("dropout_other").get<double>();
    ck.config.empty_question = c.at("empty_question").get<bool>();
    ck.inventory.event_types = j.at("event_types").get<std::vector<std::string>>();
    ck.inventory.entity_types = j.at("entity_types").get<std::vector<std::string>>();

    ck.vocab.words.clear();
    ck.vocab.index.clear();
    for (const std::string& w : j.at("vocab").get<std::vector<std::string>>()) {
      ck.vocab.index.emplace(w, static_cast<int>(ck.vocab.words.size()));
      ck.vocab.words.push_back(w);
    }

    const json& params = j.at("params");
    const auto read_tensor = [&](const std::string& name, bool requires_grad) {
      if (!params.contains(name)) throw data_error("checkpoint: missing parameter " + name);
      const json& pj = params.at(name);
      Shape shape = pj.at("shape").get<Shape>();
      std::vector<double> values = pj.at("values").get<std::vector<double>>();
      return Tensor::from(std::move(shape), std::move(values), requires_grad);
    };

    Tensor word_emb = read_tensor("word_embedding", false);
    if (word_emb.shape()[0] != ck.vocab.words.size()) {
      throw data_error("checkpoint: word embedding has " + std::to_string(word_emb.shape()[0]) +
                       " rows for a vocabulary of " + std::to_string(ck.vocab.words.size()));
    }
    Rng rng(0);  // placeholder weights, overwritten below
    ck.params = ModelParams::init(ck.config, word_emb, ck.inventory.entity_types.size(), rng);
    for (auto& [name, t] : ck.params.trainable()) {
      Tensor stored = read_tensor(name, true);
      if (stored.shape() != t.shape()) {
        throw data_error("checkpoint: parameter " + name + " has shape " +
                         shape_str(stored.shape()) + ", expected " + shape_str(t.shape()));
      }
      t.values() = stored.values();
    }
  } catch (const json::exception& e) {
    throw data_error(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

}  // namespace tddmn
