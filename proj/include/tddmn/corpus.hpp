#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tddmn/tensor.hpp"

namespace tddmn {

struct Token {
  std::string surface;
  int start = 0;  // character offsets into the source document
  int end = 0;
  std::string entity_type = "NA";
  std::string trigger_label = "NA";

  bool is_trigger() const { return trigger_label != "NA"; }
};

using Sentence = std::vector<Token>;

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
};

// Ordered label sets; "NA" is always index 0 so it doubles as the negative
// class in both inventories.
struct LabelInventory {
  std::vector<std::string> event_types{"NA"};
  std::vector<std::string> entity_types{"NA"};

  std::size_t num_event_types() const { return event_types.size(); }
  int event_id(const std::string& name) const;    // -1 if unknown
  int entity_id(const std::string& name) const;   // -1 if unknown

  static LabelInventory from_documents(std::span<const Document> docs);
};

struct Corpus {
  std::vector<Document> documents;
  LabelInventory inventory;
};

// --- document file format -------------------------------------------------
// Line-delimited JSON, one document per line:
//   {"doc_id": "...", "sentences": [[{"surface","start","end",
//                                     "entity_type","trigger_label"}, ...]]}
// Loading validates offsets (start < end, non-overlapping within a sentence)
// and, when an inventory is supplied, that all labels are known.

Corpus load_corpus(const std::string& path);
Corpus load_corpus(const std::string& path, const LabelInventory& inventory);
void save_corpus(const Corpus& corpus, const std::string& path);

// --- preprocessing ----------------------------------------------------------

using StopwordSet = std::set<std::string>;

StopwordSet load_stopwords(const std::string& path);
bool is_punctuation(const std::string& surface);

struct PreprocessedDocument {
  Document doc;
  bool empty = false;  // all sentences were filtered away
};

// Drops punctuation-only and stopword tokens (but never trigger-bearing
// ones), then drops sentences whose surviving length is <= 2. Offsets of
// surviving tokens are untouched.
PreprocessedDocument preprocess(const Document& doc, const StopwordSet& stopwords);

struct PreprocessStats {
  std::size_t dropped_documents = 0;
};

Corpus preprocess_corpus(const Corpus& corpus, const StopwordSet& stopwords,
                         PreprocessStats* stats = nullptr);

// --- integer encoding -------------------------------------------------------

// Lowercased surface -> id table. Index 0 is the UNK row; every out-of-table
// surface maps there.
struct Vocabulary {
  static constexpr const char* kUnk = "<unk>";

  std::vector<std::string> words{kUnk};
  std::unordered_map<std::string, int> index{{kUnk, 0}};

  std::size_t size() const { return words.size(); }
  int id(const std::string& surface) const;
  void insert(const std::string& lowercased);

  static Vocabulary from_documents(std::span<const Document> docs);
};

std::string lowercase(const std::string& s);

struct EncodedSentence {
  std::vector<int> words;
  std::vector<int> entities;
  std::vector<int> labels;
  std::vector<std::pair<int, int>> offsets;

  std::size_t size() const { return words.size(); }
};

struct EncodedDocument {
  std::string doc_id;
  std::vector<EncodedSentence> sentences;
};

std::vector<EncodedDocument> encode_documents(std::span<const Document> docs,
                                              const Vocabulary& vocab,
                                              const LabelInventory& inventory);

// --- loss masks (negative down-sampling) ------------------------------------

// mask[d][s][t] == 1 when token t of sentence s of document d contributes to
// the loss.
using DocMask = std::vector<std::vector<std::uint8_t>>;

struct DownsampleResult {
  std::vector<DocMask> masks;
  std::size_t positives = 0;
  std::size_t negatives_kept = 0;
  std::size_t negatives_total = 0;
};

// Masks in every positive token; keeps round(ratio * positives) negatives,
// sampled corpus-wide without replacement (capped at what exists). The draw
// depends only on (seed, epoch), so each epoch resamples reproducibly.
DownsampleResult downsample_negatives(std::span<const EncodedDocument> docs, double ratio,
                                      std::uint64_t seed, std::uint64_t epoch = 0);

// --- cross-validation folds --------------------------------------------------

struct FoldSplit {
  std::vector<std::vector<std::string>> folds;  // doc ids, disjoint cover
};

// Seeded shuffle, then round-robin deal into k folds (sizes differ by <= 1).
FoldSplit kfold_split(const Corpus& corpus, std::size_t k, std::uint64_t seed);

// Manifest: one line per fold, "<index>\t<id>,<id>,...".
void save_fold_manifest(const FoldSplit& split, const std::string& path);
FoldSplit load_fold_manifest(const std::string& path);

// --- embeddings ---------------------------------------------------------------

struct EmbeddingTable {
  Vocabulary vocab;
  Tensor matrix;  // |V| x D_w, frozen (requires_grad = false)
};

// Vocabulary from corpus surfaces plus UNK. Rows are seeded uniform(-0.1,0.1)
// and then overwritten verbatim for tokens found in the optional embedding
// file ("word v1 v2 ... vD" per line).
EmbeddingTable build_embeddings(const Corpus& corpus,
                                const std::optional<std::string>& embedding_file,
                                std::size_t dim, std::uint64_t seed);

}  // namespace tddmn
