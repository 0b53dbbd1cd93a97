#pragma once

#include <span>
#include <string>
#include <vector>

#include "tddmn/corpus.hpp"
#include "tddmn/model.hpp"

namespace tddmn {

// A classified trigger: document, character span, and event subtype id.
struct TriggerMention {
  std::string doc_id;
  int start = 0;
  int end = 0;
  int label = 0;

  bool operator==(const TriggerMention&) const = default;
};

struct PrfCounts {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;
};

// Percentages; F1 = 2PR/(P+R) when P+R > 0, else 0.
struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfScore score_from_counts(const PrfCounts& counts);

// A prediction is correct iff a gold mention with identical (doc, offsets,
// subtype) exists.
PrfCounts score_mentions(std::span<const TriggerMention> gold,
                         std::span<const TriggerMention> predicted);

std::vector<TriggerMention> gold_mentions(std::span<const EncodedDocument> docs);

// Scores every token of every document (no masks, no dropout).
PrfScore evaluate(const TdDmn& model, std::span<const EncodedDocument> docs,
                  PrfCounts* counts = nullptr);

}  // namespace tddmn
