#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tddmn/corpus.hpp"
#include "tddmn/gru.hpp"
#include "tddmn/tensor.hpp"

namespace tddmn {

// All encoder/memory widths share one value H so the attention gate's
// element-wise similarity features line up.
struct ModelConfig {
  std::size_t H = 300;
  std::size_t hops = 1;
  std::size_t D_w = 300;  // word embedding width
  std::size_t D_e = 50;   // entity type embedding width
  std::size_t O = 2;      // label count including NA
  double dropout_answer = 0.4;
  double dropout_other = 0.2;
  bool empty_question = false;

  void validate() const;
};

// Every trainable weight, plus the frozen word embedding table. The per-token
// adapter is the 1x1 convolution that stands in for fine-tuning the frozen
// embeddings.
struct ModelParams {
  Tensor word_embedding;    // |V| x D_w, frozen
  Tensor adapter;           // D_w x D_w
  Tensor entity_embedding;  // |E| x D_e
  BiGru sentence_gru;       // D_w+D_e -> H
  BiGru fusion_gru;         // H -> H
  BiGru question_gru;       // D_w+D_e -> H
  Tensor W_s1;              // H x 2H
  Tensor W_s2;              // 2H x 1
  Tensor W_m1;              // 4H x 2H
  Tensor W_m2;              // 2H x 1
  AttnGruCell attn_gru;     // H -> H
  Tensor W_u;               // 3H x H
  BiGru answer_gru;         // 2H -> H
  Tensor W_out;             // H x O
  Tensor b_out;             // O

  static ModelParams init(const ModelConfig& config, Tensor word_embedding,
                          std::size_t entity_count, Rng& rng);

  std::vector<NamedTensor> trainable() const;
  std::vector<NamedTensor> all() const;  // includes the frozen table
  void zero_grads();
};

// Per-hop attention vectors and memory states for one question sentence,
// exposed for inspection and tests.
struct EpisodeTrace {
  std::vector<Tensor> betas;     // hops entries, each [l]
  std::vector<Tensor> memories;  // hops+1 entries, each [H]; memories[0] is q*
  Tensor facts;                  // [l, H]
  Tensor question;               // q* [H]
  Tensor probs;                  // [n, O]
};

struct SentenceEncoding {
  Tensor hidden;     // [n, H]
  Tensor attention;  // alpha [n]
  Tensor vector;     // s [H]
};

struct QuestionEncoding {
  Tensor hidden;  // [n, H]
  Tensor vector;  // q* [H]; exact zero vector in empty-question mode
};

struct DocumentForward {
  std::vector<EpisodeTrace> sentences;
};

class TdDmn {
 public:
  TdDmn(ModelConfig config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // [adapter(w); e] per token.
  Tensor embed_tokens(Tape& tape, std::span<const int> word_ids,
                      std::span<const int> entity_ids) const;

  // Bi-GRU hidden states plus two-layer-perceptron attention pooling.
  SentenceEncoding encode_sentence(Tape& tape, const Tensor& embedded) const;

  // Cross-sentence exchange: Bi-GRU over the sentence vectors.
  Tensor fuse(Tape& tape, const Tensor& sentence_vectors) const;

  // Bi-GRU hidden states and their mean (or zero in empty-question mode).
  QuestionEncoding encode_question(Tape& tape, const Tensor& embedded) const;

  // Softmax over fact scores from [F*q; |F-q|; F*m; |F-m|].
  Tensor attention_gate(Tape& tape, const Tensor& facts, const Tensor& q_star,
                        const Tensor& m_prev) const;

  // One episode: attention, attentional-GRU context, memory update.
  std::pair<Tensor, Tensor> memory_hop(Tape& tape, const Tensor& facts, const Tensor& q_star,
                                       const Tensor& m_prev) const;  // (m_next, beta)

  // config().hops episodes from m0 = q*.
  EpisodeTrace run_memory(Tape& tape, const Tensor& facts, const Tensor& q_star) const;

  // Per-token label distributions from [q_hidden_j; m_t] rows.
  Tensor answer(Tape& tape, const Tensor& q_hidden, const Tensor& memory, bool train,
                Rng* rng) const;

  // Full pass over one document: facts once, then question/memory/answer per
  // sentence. rng is required when train is true (dropout).
  DocumentForward forward_document(Tape& tape, const EncodedDocument& doc, bool train,
                                   Rng* rng = nullptr) const;

  // Document cross-entropy: -sum over masked-in tokens of log p[gold].
  static Tensor loss(Tape& tape, const DocumentForward& fwd, const EncodedDocument& doc,
                     const DocMask& mask);

  // Arg-max labels per token (ties break to the lowest index), eval mode.
  std::vector<std::vector<int>> predict(const EncodedDocument& doc) const;

 private:
  ModelConfig config_;
  ModelParams params_;
};

// Tiny-model finite-difference sweep over every trainable parameter; returns
// the maximum relative error. Also verifies the frozen word embedding
// receives no gradient (throws numeric_error otherwise). The default step is
// coarser than the per-op checks use: with ~5k coordinates the loss is large
// enough that 1e-5 steps leave some tiny gradients inside rounding noise.
double full_model_grad_check(std::uint64_t seed = 9, double eps = 3e-4);

}  // namespace tddmn
