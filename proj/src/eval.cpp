#include "tddmn/eval.hpp"

#include <set>
#include <tuple>

namespace tddmn {

PrfScore score_from_counts(const PrfCounts& counts) {
  PrfScore s;
  if (counts.predicted > 0) {
    s.precision = 100.0 * static_cast<double>(counts.correct) /
                  static_cast<double>(counts.predicted);
  }
  if (counts.gold > 0) {
    s.recall = 100.0 * static_cast<double>(counts.correct) / static_cast<double>(counts.gold);
  }
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

PrfCounts score_mentions(std::span<const TriggerMention> gold,
                         std::span<const TriggerMention> predicted) {
  using Key = std::tuple<std::string, int, int, int>;
  std::set<Key> gold_keys;
  for (const TriggerMention& m : gold) {
    gold_keys.emplace(m.doc_id, m.start, m.end, m.label);
  }
  PrfCounts counts;
  counts.gold = gold_keys.size();
  counts.predicted = predicted.size();
  for (const TriggerMention& m : predicted) {
    if (gold_keys.count({m.doc_id, m.start, m.end, m.label})) ++counts.correct;
  }
  return counts;
}

std::vector<TriggerMention> gold_mentions(std::span<const EncodedDocument> docs) {
  std::vector<TriggerMention> out;
  for (const EncodedDocument& d : docs) {
    for (const EncodedSentence& s : d.sentences) {
      for (std::size_t t = 0; t < s.size(); ++t) {
        if (s.labels[t] != 0) {
          out.push_back({d.doc_id, s.offsets[t].first, s.offsets[t].second, s.labels[t]});
        }
      }
    }
  }
  return out;
}

PrfScore evaluate(const TdDmn& model, std::span<const EncodedDocument> docs, PrfCounts* counts) {
  std::vector<TriggerMention> predicted;
  for (const EncodedDocument& d : docs) {
    const auto labels = model.predict(d);
    for (std::size_t s = 0; s < d.sentences.size(); ++s) {
      for (std::size_t t = 0; t < d.sentences[s].size(); ++t) {
        if (labels[s][t] != 0) {
          predicted.push_back({d.doc_id, d.sentences[s].offsets[t].first,
                               d.sentences[s].offsets[t].second, labels[s][t]});
        }
      }
    }
  }
  const PrfCounts c = score_mentions(gold_mentions(docs), predicted);
  if (counts) *counts = c;
  return score_from_counts(c);
}

}  // namespace tddmn
