#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tddmn/corpus.hpp"

namespace tddmn {

// Configuration of the synthetic trigger-detection corpus.
//
// Every document contains exactly one trigger token whose surface form is
// shared between the two event types of a confusable pair, so the sentence
// holding it carries no information about which type is correct. The answer
// is planted in a cue sentence at least two sentences away and is reached by
// following reference markers:
//
//   depth 1:  target [trg M1]  ...  cue [M1 cue(gold)]
//   depth 2:  target [trg M1]  ...  link [M1 M2]  ...  cue [M2 cue(gold)]
//
// A configurable fraction of documents also carries a decoy chain of the same
// shape ending in a cue of the *other* type. On those documents "which cue
// words occur somewhere" is uninformative and only resolving the markers
// disambiguates; the decoy-free remainder keeps the cue-reading circuit
// learnable from scratch.
struct GenConfig {
  std::size_t num_documents = 1000;
  std::vector<std::string> event_types{"alpha", "beta"};  // consecutive pairs
  std::vector<std::string> entity_types{"PER", "ORG", "LOC"};
  std::size_t filler_vocab = 120;
  std::size_t num_markers = 12;
  std::size_t cues_per_type = 3;
  std::size_t ambiguous_triggers = 4;  // trigger surfaces per pair
  std::size_t sentences_min = 7;
  std::size_t sentences_max = 9;
  std::size_t tokens_min = 4;  // content tokens per sentence
  std::size_t tokens_max = 6;
  double chain_depth2_fraction = 0.5;
  double decoy_fraction = 0.6;
  // Chance for a distractor sentence to carry a marker unrelated to either
  // chain; inert for marker-following but noise for anything tracking raw
  // marker co-occurrence.
  double distractor_marker_rate = 0.0;
  double stopword_rate = 0.25;
  double punct_rate = 0.2;
  double entity_rate = 0.15;
  std::vector<std::string> stopwords{"the", "a", "of", "to", "and", "in", "on"};
  std::vector<std::string> punctuation{".", ",", ";"};

  void validate() const;
};

GenConfig gen_config_from_json_file(const std::string& path);

Corpus generate_synthetic(const GenConfig& config, std::uint64_t seed);

// Ground-truth resolver for generated documents: follows the marker chain
// from the sentence holding `trigger_index` to its cue and returns the event
// type the cue names. Used to validate the generator.
std::string resolve_by_cue(const GenConfig& config, const Document& doc);

}  // namespace tddmn
