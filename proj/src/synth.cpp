#include "tddmn/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tddmn/error.hpp"
#include "tddmn/rng.hpp"

namespace tddmn {

using json = nlohmann::json;

void GenConfig::validate() const {
  if (num_documents == 0) throw config_error("gen: num_documents must be positive");
  if (event_types.empty() || event_types.size() % 2 != 0) {
    throw config_error("gen: event_types must list a positive even number of types");
  }
  std::set<std::string> uniq(event_types.begin(), event_types.end());
  if (uniq.size() != event_types.size() || uniq.count("NA")) {
    throw config_error("gen: event_types must be unique and must not include NA");
  }
  if (filler_vocab == 0) throw config_error("gen: filler_vocab must be positive");
  if (num_markers < 4) throw config_error("gen: need at least 4 markers");
  if (cues_per_type == 0) throw config_error("gen: cues_per_type must be positive");
  if (ambiguous_triggers == 0) throw config_error("gen: ambiguous_triggers must be positive");
  if (sentences_min < 5 || sentences_max < sentences_min) {
    throw config_error("gen: sentence range must satisfy 5 <= min <= max");
  }
  if (tokens_min < 3 || tokens_max < tokens_min) {
    throw config_error("gen: token range must satisfy 3 <= min <= max");
  }
  if (chain_depth2_fraction < 0.0 || chain_depth2_fraction > 1.0) {
    throw config_error("gen: chain_depth2_fraction must be in [0,1]");
  }
  if (decoy_fraction < 0.0 || decoy_fraction > 1.0) {
    throw config_error("gen: decoy_fraction must be in [0,1]");
  }
  if (distractor_marker_rate < 0.0 || distractor_marker_rate > 1.0) {
    throw config_error("gen: distractor_marker_rate must be in [0,1]");
  }
  if (distractor_marker_rate > 0.0 && num_markers < 5) {
    throw config_error("gen: distractor markers need num_markers >= 5");
  }
}

GenConfig gen_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open generator config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("generator config: ") + e.what());
  }
  GenConfig c;
  try {
    if (j.contains("num_documents")) c.num_documents = j["num_documents"].get<std::size_t>();
    if (j.contains("event_types")) c.event_types = j["event_types"].get<std::vector<std::string>>();
    if (j.contains("entity_types"))
      c.entity_types = j["entity_types"].get<std::vector<std::string>>();
    if (j.contains("filler_vocab")) c.filler_vocab = j["filler_vocab"].get<std::size_t>();
    if (j.contains("num_markers")) c.num_markers = j["num_markers"].get<std::size_t>();
    if (j.contains("cues_per_type")) c.cues_per_type = j["cues_per_type"].get<std::size_t>();
    if (j.contains("ambiguous_triggers"))
      c.ambiguous_triggers = j["ambiguous_triggers"].get<std::size_t>();
    if (j.contains("sentences_min")) c.sentences_min = j["sentences_min"].get<std::size_t>();
    if (j.contains("sentences_max")) c.sentences_max = j["sentences_max"].get<std::size_t>();
    if (j.contains("tokens_min")) c.tokens_min = j["tokens_min"].get<std::size_t>();
    if (j.contains("tokens_max")) c.tokens_max = j["tokens_max"].get<std::size_t>();
    if (j.contains("chain_depth2_fraction"))
      c.chain_depth2_fraction = j["chain_depth2_fraction"].get<double>();
    if (j.contains("decoy_fraction")) c.decoy_fraction = j["decoy_fraction"].get<double>();
    if (j.contains("distractor_marker_rate"))
      c.distractor_marker_rate = j["distractor_marker_rate"].get<double>();
    if (j.contains("stopword_rate")) c.stopword_rate = j["stopword_rate"].get<double>();
    if (j.contains("punct_rate")) c.punct_rate = j["punct_rate"].get<double>();
    if (j.contains("entity_rate")) c.entity_rate = j["entity_rate"].get<double>();
    if (j.contains("stopwords")) c.stopwords = j["stopwords"].get<std::vector<std::string>>();
    if (j.contains("punctuation")) c.punctuation = j["punctuation"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw config_error(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::string filler_word(std::size_t i) { return "w" + std::to_string(i); }
std::string marker_word(std::size_t i) { return "mk" + std::to_string(i); }

std::string trigger_word(std::size_t pair, std::size_t i) {
  return "trg" + std::to_string(pair) + "x" + std::to_string(i);
}

std::string cue_word(const std::string& type, std::size_t i) {
  return "cue_" + type + "_" + std::to_string(i);
}

bool is_marker(const std::string& s) { return s.rfind("mk", 0) == 0; }

// Role of each sentence in the planted reasoning chain.
enum class Role { target, link, cue, decoy_link, decoy_cue, distractor };

struct SentencePlan {
  Role role = Role::distractor;
  std::vector<std::string> fixed;      // chain tokens for this sentence
  std::string trigger_surface;         // target sentence only
  std::string trigger_label = "NA";
};

}  // namespace

Corpus generate_synthetic(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0x67656e63ULL));

  const std::size_t num_pairs = config.event_types.size() / 2;

  // Stratified (pair, member) assignment keeps the confusable pairs balanced
  // to within one document regardless of corpus size.
  struct Assign {
    std::size_t pair;
    std::size_t member;
  };
  std::vector<Assign> assignments;
  assignments.reserve(config.num_documents);
  for (std::size_t i = 0; i < config.num_documents; ++i) {
    assignments.push_back({i % num_pairs, (i / num_pairs) % 2});
  }
  rng.shuffle(assignments);

  Corpus corpus;
  corpus.inventory.event_types.insert(corpus.inventory.event_types.end(),
                                      config.event_types.begin(), config.event_types.end());
  corpus.inventory.entity_types.insert(corpus.inventory.entity_types.end(),
                                       config.entity_types.begin(), config.entity_types.end());

  for (std::size_t di = 0; di < config.num_documents; ++di) {
    const Assign a = assignments[di];
    const std::string gold = config.event_types[a.pair * 2 + a.member];
    const std::string other = config.event_types[a.pair * 2 + (1 - a.member)];
    const bool depth2 = rng.uniform() < config.chain_depth2_fraction;

    // Four distinct markers per document: real chain M1(,M2) and a decoy
    // chain that ends in the other type's cue.
    std::vector<std::size_t> marker_ids(config.num_markers);
    for (std::size_t i = 0; i < marker_ids.size(); ++i) marker_ids[i] = i;
    rng.shuffle(marker_ids);
    const std::string m1 = marker_word(marker_ids[0]);
    const std::string m2 = marker_word(marker_ids[1]);
    const std::string dm1 = marker_word(marker_ids[2]);
    const std::string dm2 = marker_word(marker_ids[3]);

    const std::string trig = trigger_word(a.pair, rng.below(config.ambiguous_triggers));
    const std::string cue = cue_word(gold, rng.below(config.cues_per_type));
    const std::string decoy_cue = cue_word(other, rng.below(config.cues_per_type));
    const bool with_decoy = rng.uniform() < config.decoy_fraction;

    // Role sequence: slot 0 is the target, the slot holding Role::cue is the
    // one constrained to sit >= 2 sentences away.
    std::vector<SentencePlan> chain;
    {
      SentencePlan target;
      target.role = Role::target;
      target.fixed = {m1};
      target.trigger_surface = trig;
      target.trigger_label = gold;
      chain.push_back(std::move(target));
    }
    if (depth2) {
      chain.push_back({Role::link, {m1, m2}, "", "NA"});
      chain.push_back({Role::cue, {m2, cue}, "", "NA"});
      if (with_decoy) {
        chain.push_back({Role::decoy_link, {dm1, dm2}, "", "NA"});
        chain.push_back({Role::decoy_cue, {dm2, decoy_cue}, "", "NA"});
      }
    } else {
      chain.push_back({Role::cue, {m1, cue}, "", "NA"});
      if (with_decoy) {
        chain.push_back({Role::decoy_cue, {dm1, decoy_cue}, "", "NA"});
      }
    }
    const std::size_t cue_slot = depth2 ? 2 : 1;

    std::size_t num_sentences =
        config.sentences_min + rng.below(config.sentences_max - config.sentences_min + 1);
    num_sentences = std::max(num_sentences, chain.size());

    // Place the chain; the real cue must sit at least two sentences from the
    // target.
    std::vector<std::size_t> positions(num_sentences);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    for (int attempt = 0; attempt < 64; ++attempt) {
      rng.shuffle(positions);
      const std::size_t t = positions[0];
      const std::size_t c = positions[cue_slot];
      if ((t > c ? t - c : c - t) >= 2) break;
    }
    if (const std::size_t t = positions[0], c = positions[cue_slot];
        (t > c ? t - c : c - t) < 2) {
      // Deterministic fallback: ends of the document are always >= 2 apart.
      std::swap(positions[0], *std::find(positions.begin(), positions.end(), 0));
      std::swap(positions[cue_slot],
                *std::find(positions.begin(), positions.end(), num_sentences - 1));
    }

    std::vector<SentencePlan> plan(num_sentences);
    for (std::size_t slot = 0; slot < chain.size(); ++slot) {
      plan[positions[slot]] = std::move(chain[slot]);
    }
    for (SentencePlan& sp : plan) {
      if (sp.role == Role::distractor && config.num_markers > 4 &&
          rng.uniform() < config.distractor_marker_rate) {
        sp.fixed.push_back(marker_word(marker_ids[4 + rng.below(config.num_markers - 4)]));
      }
    }

    Document doc;
    doc.doc_id = "doc" + std::to_string(10000 + di).substr(1);
    int cursor = 0;
    for (const SentencePlan& sp : plan) {
      std::size_t content =
          config.tokens_min + rng.below(config.tokens_max - config.tokens_min + 1);
      const std::size_t fixed_count = sp.fixed.size() + (sp.role == Role::target ? 1 : 0);
      content = std::max(content, std::max<std::size_t>(3, fixed_count));

      struct Slot {
        std::string surface;
        std::string label = "NA";
      };
      std::vector<Slot> slots;
      for (const std::string& f : sp.fixed) slots.push_back({f, "NA"});
      if (sp.role == Role::target) slots.push_back({sp.trigger_surface, sp.trigger_label});
      while (slots.size() < content) {
        slots.push_back({filler_word(rng.below(config.filler_vocab)), "NA"});
      }
      rng.shuffle(slots);

      // Sprinkle stopwords/punctuation so preprocessing has real work to do.
      std::vector<Slot> final_slots;
      for (const Slot& s : slots) {
        if (!config.stopwords.empty() && rng.uniform() < config.stopword_rate) {
          final_slots.push_back({config.stopwords[rng.below(config.stopwords.size())], "NA"});
        }
        final_slots.push_back(s);
      }
      if (!config.punctuation.empty() && rng.uniform() < config.punct_rate) {
        final_slots.push_back({config.punctuation[rng.below(config.punctuation.size())], "NA"});
      }

      Sentence sent;
      for (const Slot& s : final_slots) {
        Token t;
        t.surface = s.surface;
        t.start = cursor;
        t.end = cursor + static_cast<int>(s.surface.size());
        cursor = t.end + 1;
        t.trigger_label = s.label;
        const bool entity_eligible =
            s.label == "NA" && !config.entity_types.empty() && !is_punctuation(s.surface);
        t.entity_type = (entity_eligible && rng.uniform() < config.entity_rate)
                            ? config.entity_types[rng.below(config.entity_types.size())]
                            : "NA";
        sent.push_back(std::move(t));
      }
      doc.sentences.push_back(std::move(sent));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

std::string resolve_by_cue(const GenConfig& config, const Document& doc) {
  const auto markers_of = [](const Sentence& s) {
    std::vector<std::string> out;
    for (const Token& t : s) {
      if (is_marker(t.surface)) out.push_back(t.surface);
    }
    return out;
  };
  const auto cue_type_of = [&](const Sentence& s) -> std::string {
    for (const Token& t : s) {
      for (const std::string& type : config.event_types) {
        for (std::size_t i = 0; i < config.cues_per_type; ++i) {
          if (t.surface == cue_word(type, i)) return type;
        }
      }
    }
    return "";
  };

  // Find the trigger sentence, then walk marker links until a cue appears.
  std::size_t target = doc.sentences.size();
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    for (const Token& t : doc.sentences[i]) {
      if (t.is_trigger()) target = i;
    }
  }
  if (target == doc.sentences.size()) return "";

  std::vector<std::string> frontier = markers_of(doc.sentences[target]);
  std::set<std::size_t> visited{target};
  for (int hop = 0; hop < 4; ++hop) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      if (visited.count(i)) continue;
      const auto ms = markers_of(doc.sentences[i]);
      const bool linked = std::any_of(ms.begin(), ms.end(), [&](const std::string& m) {
        return std::find(frontier.begin(), frontier.end(), m) != frontier.end();
      });
      if (!linked) continue;
      const std::string type = cue_type_of(doc.sentences[i]);
      if (!type.empty()) return type;
      visited.insert(i);
      frontier = ms;
      break;
    }
  }
  return "";
}

}  // namespace tddmn
