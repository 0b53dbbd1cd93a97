#include "tddmn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tddmn/error.hpp"

namespace tddmn {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int LabelInventory::event_id(const std::string& name) const {
  auto it = std::find(event_types.begin(), event_types.end(), name);
  return it == event_types.end() ? -1 : static_cast<int>(it - event_types.begin());
}

int LabelInventory::entity_id(const std::string& name) const {
  auto it = std::find(entity_types.begin(), entity_types.end(), name);
  return it == entity_types.end() ? -1 : static_cast<int>(it - entity_types.begin());
}

LabelInventory LabelInventory::from_documents(std::span<const Document> docs) {
  std::set<std::string> events, entities;
  for (const Document& d : docs) {
    for (const Sentence& s : d.sentences) {
      for (const Token& t : s) {
        if (t.trigger_label != "NA") events.insert(t.trigger_label);
        if (t.entity_type != "NA") entities.insert(t.entity_type);
      }
    }
  }
  LabelInventory inv;
  inv.event_types.insert(inv.event_types.end(), events.begin(), events.end());
  inv.entity_types.insert(inv.entity_types.end(), entities.begin(), entities.end());
  return inv;
}

namespace {

void validate_sentence_offsets(const Sentence& s, std::size_t line_no) {
  int prev_end = -1;
  for (const Token& t : s) {
    if (t.start >= t.end) {
      throw data_error("line " + std::to_string(line_no) + ": token '" + t.surface +
                       "' has start >= end");
    }
    if (t.start < prev_end) {
      throw data_error("line " + std::to_string(line_no) + ": token '" + t.surface +
                       "' overlaps the previous token");
    }
    prev_end = t.end;
  }
}

Document parse_document_line(const std::string& line, std::size_t line_no) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::exception& e) {
    throw data_error("line " + std::to_string(line_no) + ": " + e.what());
  }
  Document doc;
  try {
    doc.doc_id = rec.at("doc_id").get<std::string>();
    for (const json& sj : rec.at("sentences")) {
      Sentence sent;
      for (const json& tj : sj) {
        Token t;
        t.surface = tj.at("surface").get<std::string>();
        t.start = tj.at("start").get<int>();
        t.end = tj.at("end").get<int>();
        t.entity_type = tj.at("entity_type").get<std::string>();
        t.trigger_label = tj.at("trigger_label").get<std::string>();
        sent.push_back(std::move(t));
      }
      if (sent.empty()) {
        throw data_error("line " + std::to_string(line_no) + ": empty sentence");
      }
      doc.sentences.push_back(std::move(sent));
    }
  } catch (const json::exception& e) {
    throw data_error("line " + std::to_string(line_no) + ": " + e.what());
  }
  for (const Sentence& s : doc.sentences) validate_sentence_offsets(s, line_no);
  return doc;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    corpus.documents.push_back(parse_document_line(line, line_no));
  }
  corpus.inventory = LabelInventory::from_documents(corpus.documents);
  return corpus;
}

Corpus load_corpus(const std::string& path, const LabelInventory& inventory) {
  Corpus corpus = load_corpus(path);
  for (const Document& d : corpus.documents) {
    for (const Sentence& s : d.sentences) {
      for (const Token& t : s) {
        if (inventory.event_id(t.trigger_label) < 0) {
          throw data_error("document " + d.doc_id + ": unknown trigger label '" +
                           t.trigger_label + "'");
        }
        if (inventory.entity_id(t.entity_type) < 0) {
          throw data_error("document " + d.doc_id + ": unknown entity type '" + t.entity_type +
                           "'");
        }
      }
    }
  }
  corpus.inventory = inventory;
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write corpus file: " + path);
  for (const Document& d : corpus.documents) {
    ordered_json rec;
    rec["doc_id"] = d.doc_id;
    ordered_json sentences = ordered_json::array();
    for (const Sentence& s : d.sentences) {
      ordered_json sj = ordered_json::array();
      for (const Token& t : s) {
        sj.push_back(ordered_json{{"surface", t.surface},
                                  {"start", t.start},
                                  {"end", t.end},
                                  {"entity_type", t.entity_type},
                                  {"trigger_label", t.trigger_label}});
      }
      sentences.push_back(std::move(sj));
    }
    rec["sentences"] = std::move(sentences);
    out << rec.dump() << '\n';
  }
}

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open stopword file: " + path);
  StopwordSet set;
  std::string word;
  while (std::getline(in, word)) {
    while (!word.empty() && (word.back() == '\r' || word.back() == ' ')) word.pop_back();
    if (!word.empty() && word[0] != '#') set.insert(lowercase(word));
  }
  return set;
}

bool is_punctuation(const std::string& surface) {
  if (surface.empty()) return false;
  return std::all_of(surface.begin(), surface.end(), [](unsigned char c) {
    return std::ispunct(c) != 0;
  });
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

PreprocessedDocument preprocess(const Document& doc, const StopwordSet& stopwords) {
  PreprocessedDocument result;
  result.doc.doc_id = doc.doc_id;
  for (const Sentence& s : doc.sentences) {
    Sentence kept;
    for (const Token& t : s) {
      // Trigger-bearing tokens always survive; deleting gold triggers would
      // corrupt evaluation.
      if (!t.is_trigger() && (is_punctuation(t.surface) || stopwords.count(lowercase(t.surface)))) {
        continue;
      }
      kept.push_back(t);
    }
    if (kept.size() > 2) result.doc.sentences.push_back(std::move(kept));
  }
  result.empty = result.doc.sentences.empty();
  return result;
}

Corpus preprocess_corpus(const Corpus& corpus, const StopwordSet& stopwords,
                         PreprocessStats* stats) {
  Corpus out;
  out.inventory = corpus.inventory;
  std::size_t dropped = 0;
  for (const Document& d : corpus.documents) {
    PreprocessedDocument p = preprocess(d, stopwords);
    if (p.empty) {
      ++dropped;
      continue;
    }
    out.documents.push_back(std::move(p.doc));
  }
  if (stats) stats->dropped_documents = dropped;
  return out;
}

int Vocabulary::id(const std::string& surface) const {
  auto it = index.find(lowercase(surface));
  return it == index.end() ? 0 : it->second;
}

void Vocabulary::insert(const std::string& lowercased) {
  if (index.emplace(lowercased, static_cast<int>(words.size())).second) {
    words.push_back(lowercased);
  }
}

Vocabulary Vocabulary::from_documents(std::span<const Document> docs) {
  std::set<std::string> surfaces;
  for (const Document& d : docs) {
    for (const Sentence& s : d.sentences) {
      for (const Token& t : s) surfaces.insert(lowercase(t.surface));
    }
  }
  Vocabulary v;
  for (const std::string& s : surfaces) v.insert(s);
  return v;
}

std::vector<EncodedDocument> encode_documents(std::span<const Document> docs,
                                              const Vocabulary& vocab,
                                              const LabelInventory& inventory) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const Document& d : docs) {
    EncodedDocument ed;
    ed.doc_id = d.doc_id;
    for (const Sentence& s : d.sentences) {
      EncodedSentence es;
      for (const Token& t : s) {
        es.words.push_back(vocab.id(t.surface));
        const int ent = inventory.entity_id(t.entity_type);
        if (ent < 0) {
          throw data_error("document " + d.doc_id + ": unknown entity type '" + t.entity_type +
                           "'");
        }
        const int lab = inventory.event_id(t.trigger_label);
        if (lab < 0) {
          throw data_error("document " + d.doc_id + ": unknown trigger label '" +
                           t.trigger_label + "'");
        }
        es.entities.push_back(ent);
        es.labels.push_back(lab);
        es.offsets.emplace_back(t.start, t.end);
      }
      ed.sentences.push_back(std::move(es));
    }
    out.push_back(std::move(ed));
  }
  return out;
}

DownsampleResult downsample_negatives(std::span<const EncodedDocument> docs, double ratio,
                                      std::uint64_t seed, std::uint64_t epoch) {
  if (ratio <= 0.0) throw config_error("down-sampling ratio must be positive");

  DownsampleResult result;
  result.masks.reserve(docs.size());
  struct Coord {
    std::size_t doc, sent, tok;
  };
  std::vector<Coord> negatives;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    DocMask mask;
    for (std::size_t s = 0; s < docs[d].sentences.size(); ++s) {
      const EncodedSentence& es = docs[d].sentences[s];
      mask.emplace_back(es.size(), std::uint8_t{0});
      for (std::size_t t = 0; t < es.size(); ++t) {
        if (es.labels[t] != 0) {
          mask[s][t] = 1;
          ++result.positives;
        } else {
          negatives.push_back({d, s, t});
        }
      }
    }
    result.masks.push_back(std::move(mask));
  }
  result.negatives_total = negatives.size();

  const std::size_t target = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(result.positives)));
  result.negatives_kept = std::min(target, negatives.size());

  Rng rng(mix_seed(seed, 0x6d61736bULL, epoch));
  rng.shuffle(negatives);
  for (std::size_t i = 0; i < result.negatives_kept; ++i) {
    const Coord& c = negatives[i];
    result.masks[c.doc][c.sent][c.tok] = 1;
  }
  return result;
}

FoldSplit kfold_split(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw config_error("k-fold split needs k >= 2");
  if (corpus.documents.size() < k) {
    throw config_error("corpus has " + std::to_string(corpus.documents.size()) +
                       " documents, fewer than k = " + std::to_string(k));
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.documents.size());
  for (const Document& d : corpus.documents) ids.push_back(d.doc_id);
  Rng rng(mix_seed(seed, 0x666f6c64ULL));
  rng.shuffle(ids);

  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < ids.size(); ++i) split.folds[i % k].push_back(ids[i]);
  return split;
}

void save_fold_manifest(const FoldSplit& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write fold manifest: " + path);
  for (std::size_t f = 0; f < split.folds.size(); ++f) {
    out << f << '\t';
    for (std::size_t i = 0; i < split.folds[f].size(); ++i) {
      if (i) out << ',';
      out << split.folds[f][i];
    }
    out << '\n';
  }
}

FoldSplit load_fold_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open fold manifest: " + path);
  FoldSplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw data_error("fold manifest line " + std::to_string(line_no) + ": missing tab");
    }
    std::vector<std::string> ids;
    std::stringstream rest(line.substr(tab + 1));
    std::string id;
    while (std::getline(rest, id, ',')) {
      if (!id.empty()) ids.push_back(id);
    }
    split.folds.push_back(std::move(ids));
  }
  return split;
}

EmbeddingTable build_embeddings(const Corpus& corpus,
                                const std::optional<std::string>& embedding_file,
                                std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.vocab = Vocabulary::from_documents(corpus.documents);
  Rng rng(mix_seed(seed, 0x656d6264ULL));
  table.matrix = Tensor::uniform({table.vocab.size(), dim}, rng, -0.1, 0.1, false);

  if (embedding_file) {
    std::ifstream in(*embedding_file);
    if (!in) throw data_error("cannot open embedding file: " + *embedding_file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      std::vector<double> values;
      double v;
      while (ss >> v) values.push_back(v);
      if (values.size() != dim) {
        throw data_error("embedding file line " + std::to_string(line_no) + ": got " +
                         std::to_string(values.size()) + " values, expected " +
                         std::to_string(dim));
      }
      const auto it = table.vocab.index.find(lowercase(word));
      if (it == table.vocab.index.end()) continue;
      std::copy(values.begin(), values.end(),
                table.matrix.data() + static_cast<std::size_t>(it->second) * dim);
    }
  }
  return table;
}

}  // namespace tddmn
