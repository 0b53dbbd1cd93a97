#include "tddmn/model.hpp"

#include <algorithm>
#include <cmath>

#include "tddmn/error.hpp"
#include "tddmn/gradcheck.hpp"

namespace tddmn {

void ModelConfig::validate() const {
  if (H < 1) throw config_error("model: H must be >= 1");
  if (hops < 1) throw config_error("model: hops must be >= 1");
  if (D_w < 1 || D_e < 1) throw config_error("model: embedding widths must be >= 1");
  if (O < 2) throw config_error("model: need at least one event type besides NA");
  if (dropout_answer < 0.0 || dropout_answer >= 1.0 || dropout_other < 0.0 ||
      dropout_other >= 1.0) {
    throw config_error("model: dropout rates must be in [0,1)");
  }
}

ModelParams ModelParams::init(const ModelConfig& config, Tensor word_embedding,
                              std::size_t entity_count, Rng& rng) {
  config.validate();
  if (!word_embedding.defined() || word_embedding.rank() != 2 ||
      word_embedding.shape()[1] != config.D_w) {
    throw config_error("model: word embedding must be |V| x D_w");
  }
  const std::size_t h = config.H;
  const std::size_t d_in = config.D_w + config.D_e;

  ModelParams p;
  p.word_embedding = std::move(word_embedding);
  p.word_embedding.set_requires_grad(false);
  p.adapter = glorot({config.D_w, config.D_w}, rng);
  p.entity_embedding = glorot({entity_count, config.D_e}, rng);
  p.sentence_gru = BiGru::init(d_in, h, rng);
  p.fusion_gru = BiGru::init(h, h, rng);
  p.question_gru = BiGru::init(d_in, h, rng);
  p.W_s1 = glorot({h, 2 * h}, rng);
  p.W_s2 = glorot({2 * h, 1}, rng);
  p.W_m1 = glorot({4 * h, 2 * h}, rng);
  p.W_m2 = glorot({2 * h, 1}, rng);
  p.attn_gru = AttnGruCell::init(h, h, rng);
  p.W_u = glorot({3 * h, h}, rng);
  p.answer_gru = BiGru::init(2 * h, h, rng);
  p.W_out = glorot({h, config.O}, rng);
  p.b_out = Tensor::zeros({config.O}, true);
  return p;
}

std::vector<NamedTensor> ModelParams::trainable() const {
  std::vector<NamedTensor> out;
  out.emplace_back("adapter", adapter);
  out.emplace_back("entity_embedding", entity_embedding);
  sentence_gru.collect_params("sentence_gru", out);
  fusion_gru.collect_params("fusion_gru", out);
  question_gru.collect_params("question_gru", out);
  out.emplace_back("W_s1", W_s1);
  out.emplace_back("W_s2", W_s2);
  out.emplace_back("W_m1", W_m1);
  out.emplace_back("W_m2", W_m2);
  attn_gru.collect_params("attn_gru", out);
  out.emplace_back("W_u", W_u);
  answer_gru.collect_params("answer_gru", out);
  out.emplace_back("W_out", W_out);
  out.emplace_back("b_out", b_out);
  return out;
}

std::vector<NamedTensor> ModelParams::all() const {
  std::vector<NamedTensor> out;
  out.emplace_back("word_embedding", word_embedding);
  for (NamedTensor& nt : trainable()) out.push_back(std::move(nt));
  return out;
}

void ModelParams::zero_grads() {
  for (auto& [name, t] : trainable()) t.zero_grad();
}

TdDmn::TdDmn(ModelConfig config, ModelParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

Tensor TdDmn::embed_tokens(Tape& tape, std::span<const int> word_ids,
                           std::span<const int> entity_ids) const {
  if (word_ids.size() != entity_ids.size() || word_ids.empty()) {
    throw shape_error("embed_tokens: need equal, non-empty id lists");
  }
  using namespace ops;
  Tensor w = rows(tape, params_.word_embedding, word_ids);
  Tensor adapted = matmul(tape, w, params_.adapter);
  Tensor e = rows(tape, params_.entity_embedding, entity_ids);
  return concat(tape, 1, {adapted, e});
}

SentenceEncoding TdDmn::encode_sentence(Tape& tape, const Tensor& embedded) const {
  if (embedded.rank() != 2 || embedded.shape()[0] < 1) {
    throw shape_error("encode_sentence: empty sentence");
  }
  using namespace ops;
  const std::size_t n = embedded.shape()[0];
  Tensor h = bigru_run(tape, params_.sentence_gru, embedded);
  Tensor scores = matmul(tape, tanh(tape, matmul(tape, h, params_.W_s1)), params_.W_s2);
  Tensor alpha_row = softmax_rows(tape, reshape(tape, scores, {1, n}));
  Tensor pooled = reshape(tape, matmul(tape, alpha_row, h), {config_.H});
  return {h, reshape(tape, alpha_row, {n}), pooled};
}

Tensor TdDmn::fuse(Tape& tape, const Tensor& sentence_vectors) const {
  if (sentence_vectors.rank() != 2 || sentence_vectors.shape()[0] < 1) {
    throw shape_error("fuse: empty document");
  }
  return bigru_run(tape, params_.fusion_gru, sentence_vectors);
}

QuestionEncoding TdDmn::encode_question(Tape& tape, const Tensor& embedded) const {
  if (embedded.rank() != 2 || embedded.shape()[0] < 1) {
    throw shape_error("encode_question: empty sentence");
  }
  Tensor hidden = bigru_run(tape, params_.question_gru, embedded);
  Tensor q_star = config_.empty_question ? Tensor::zeros({config_.H})
                                         : ops::mean_rows(tape, hidden);
  return {hidden, q_star};
}

Tensor TdDmn::attention_gate(Tape& tape, const Tensor& facts, const Tensor& q_star,
                             const Tensor& m_prev) const {
  const std::size_t h = config_.H;
  if (facts.rank() != 2 || facts.shape()[1] != h || q_star.size() != h || m_prev.size() != h) {
    throw shape_error("attention_gate: widths must all equal H = " + std::to_string(h));
  }
  using namespace ops;
  const std::size_t l = facts.shape()[0];
  Tensor features = concat(tape, 1,
                           {mul(tape, facts, q_star), abs(tape, sub(tape, facts, q_star)),
                            mul(tape, facts, m_prev), abs(tape, sub(tape, facts, m_prev))});
  Tensor scores =
      matmul(tape, tanh(tape, matmul(tape, features, params_.W_m1)), params_.W_m2);
  return reshape(tape, softmax_rows(tape, reshape(tape, scores, {1, l})), {l});
}

std::pair<Tensor, Tensor> TdDmn::memory_hop(Tape& tape, const Tensor& facts,
                                            const Tensor& q_star, const Tensor& m_prev) const {
  using namespace ops;
  Tensor beta = attention_gate(tape, facts, q_star, m_prev);
  Tensor context = attn_gru_run(tape, params_.attn_gru, facts, beta);
  Tensor m_next =
      relu(tape, matmul(tape, concat(tape, 0, {q_star, m_prev, context}), params_.W_u));
  return {m_next, beta};
}

EpisodeTrace TdDmn::run_memory(Tape& tape, const Tensor& facts, const Tensor& q_star) const {
  EpisodeTrace trace;
  trace.facts = facts;
  trace.question = q_star;
  trace.memories.push_back(q_star);  // m0; already the zero vector when ablated
  for (std::size_t k = 0; k < config_.hops; ++k) {
    auto [m_next, beta] = memory_hop(tape, facts, q_star, trace.memories.back());
    trace.memories.push_back(m_next);
    trace.betas.push_back(beta);
  }
  return trace;
}

Tensor TdDmn::answer(Tape& tape, const Tensor& q_hidden, const Tensor& memory, bool train,
                     Rng* rng) const {
  using namespace ops;
  const std::size_t n = q_hidden.shape()[0];
  Tensor x = concat(tape, 1, {q_hidden, tile_rows(tape, memory, n)});
  if (train) {
    if (!rng) throw shape_error("answer: training mode needs an rng for dropout");
    x = dropout(tape, x, config_.dropout_answer, *rng);
  }
  Tensor a = bigru_run(tape, params_.answer_gru, x);
  Tensor logits = add(tape, matmul(tape, a, params_.W_out), params_.b_out);
  return softmax_rows(tape, logits);
}

DocumentForward TdDmn::forward_document(Tape& tape, const EncodedDocument& doc, bool train,
                                        Rng* rng) const {
  if (doc.sentences.empty()) throw shape_error("forward_document: document has no sentences");
  if (train && !rng) throw shape_error("forward_document: training mode needs an rng");
  using namespace ops;

  std::vector<Tensor> embedded(doc.sentences.size());
  std::vector<Tensor> sentence_vectors(doc.sentences.size());
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const EncodedSentence& s = doc.sentences[i];
    if (s.size() == 0) throw shape_error("forward_document: empty sentence");
    embedded[i] = embed_tokens(tape, s.words, s.entities);
    Tensor enc_in =
        train ? dropout(tape, embedded[i], config_.dropout_other, *rng) : embedded[i];
    sentence_vectors[i] = encode_sentence(tape, enc_in).vector;
  }
  Tensor stacked = stack_rows(tape, sentence_vectors);
  Tensor fusion_in = train ? dropout(tape, stacked, config_.dropout_other, *rng) : stacked;
  Tensor facts = fuse(tape, fusion_in);

  DocumentForward out;
  out.sentences.reserve(doc.sentences.size());
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    Tensor q_in = train ? dropout(tape, embedded[i], config_.dropout_other, *rng) : embedded[i];
    QuestionEncoding q = encode_question(tape, q_in);
    EpisodeTrace trace = run_memory(tape, facts, q.vector);
    trace.probs = answer(tape, q.hidden, trace.memories.back(), train, rng);
    out.sentences.push_back(std::move(trace));
  }
  return out;
}

Tensor TdDmn::loss(Tape& tape, const DocumentForward& fwd, const EncodedDocument& doc,
                   const DocMask& mask) {
  if (fwd.sentences.size() != doc.sentences.size() || mask.size() != doc.sentences.size()) {
    throw shape_error("loss: forward/document/mask sentence counts differ");
  }
  Tensor total;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    Tensor term = ops::masked_nll(tape, fwd.sentences[i].probs, doc.sentences[i].labels,
                                  mask[i]);
    total = total.defined() ? ops::add(tape, total, term) : term;
  }
  return total;
}

std::vector<std::vector<int>> TdDmn::predict(const EncodedDocument& doc) const {
  Tape tape(false);
  DocumentForward fwd = forward_document(tape, doc, false, nullptr);
  std::vector<std::vector<int>> labels(doc.sentences.size());
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const Tensor& p = fwd.sentences[i].probs;
    const std::size_t n = p.shape()[0];
    const std::size_t o = p.shape()[1];
    labels[i].resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double* prow = p.data() + j * o;
      std::size_t best = 0;
      for (std::size_t k = 1; k < o; ++k) {
        if (prow[k] > prow[best]) best = k;  // strict: ties keep the lowest index
      }
      labels[i][j] = static_cast<int>(best);
    }
  }
  return labels;
}

double full_model_grad_check(std::uint64_t seed, double eps) {
  ModelConfig config;
  config.H = 8;
  config.hops = 2;
  config.D_w = 6;
  config.D_e = 4;
  config.O = 3;
  config.dropout_answer = 0.0;
  config.dropout_other = 0.0;

  Rng rng(mix_seed(seed, 0x67636865ULL));
  const std::size_t vocab = 9, entities = 3;
  // Wider-than-usual embeddings keep every gradient well above the
  // cancellation noise floor of the central differences.
  Tensor word_emb = Tensor::uniform({vocab, config.D_w}, rng, -0.7, 0.7, false);
  TdDmn model(config, ModelParams::init(config, word_emb, entities, rng));

  // Two sentences of three tokens; one token is masked out of the loss.
  EncodedDocument doc;
  doc.doc_id = "gradcheck";
  for (std::size_t s = 0; s < 2; ++s) {
    EncodedSentence es;
    for (std::size_t t = 0; t < 3; ++t) {
      es.words.push_back(static_cast<int>(rng.below(vocab)));
      es.entities.push_back(static_cast<int>(rng.below(entities)));
      es.labels.push_back(static_cast<int>(rng.below(config.O)));
      es.offsets.emplace_back(static_cast<int>(t * 4), static_cast<int>(t * 4 + 3));
    }
    doc.sentences.push_back(std::move(es));
  }
  DocMask mask{{1, 1, 1}, {1, 0, 1}};

  const auto f = [&](Tape& tape) {
    DocumentForward fwd = model.forward_document(tape, doc, false, nullptr);
    return TdDmn::loss(tape, fwd, doc, mask);
  };

  std::vector<Tensor> inputs;
  for (auto& [name, t] : model.params().trainable()) inputs.push_back(t);

  model.params().word_embedding.zero_grad();
  const double max_rel = grad_check(f, inputs, eps);

  for (double g : model.params().word_embedding.grad()) {
    if (g != 0.0) throw numeric_error("frozen word embedding received gradient");
  }
  return max_rel;
}

}  // namespace tddmn
