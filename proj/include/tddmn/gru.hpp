#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tddmn/tensor.hpp"

namespace tddmn {

using NamedTensor = std::pair<std::string, Tensor>;

// Standard gated recurrent unit:
//   r = sigmoid(x W_r + h U_r + b_r)
//   z = sigmoid(x W_z + h U_z + b_z)
//   h~ = tanh(x W_h + (r o h) U_h + b_h)
//   h' = z o h + (1 - z) o h~        (z gates retention)
struct GruCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor W_r, W_z, W_h;  // input_size x hidden_size
  Tensor U_r, U_z, U_h;  // hidden_size x hidden_size
  Tensor b_r, b_z, b_h;  // hidden_size

  static GruCell init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Two independent cells over the same input, one per direction. Directional
// hidden states are merged by element-wise addition, so both hidden sizes
// must match.
struct BiGru {
  GruCell fwd;
  GruCell bwd;

  static BiGru init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// GRU variant with no learned update gate: the caller supplies a per-step
// attention weight that blends the candidate into the hidden state. Only the
// reset-gate and candidate parameters exist.
struct AttnGruCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor W_r, W_h;  // input_size x hidden_size
  Tensor U_r, U_h;  // hidden_size x hidden_size
  Tensor b_r, b_h;  // hidden_size

  static AttnGruCell init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  void collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// One recurrence step. x is [input_size], h_prev is [hidden_size].
Tensor gru_step(Tape& tape, const GruCell& cell, const Tensor& x, const Tensor& h_prev);

// Runs both directions over seq [n, input_size] from zero initial states and
// returns the summed hidden states as [n, hidden_size]. n must be >= 1.
Tensor bigru_run(Tape& tape, const BiGru& net, const Tensor& seq);

// Consumes facts [l, input_size] with attention weights beta [l] (entries in
// [0,1]); step t computes the reset gate and candidate as a GRU would and
// applies h_t = beta_t * h~ + (1 - beta_t) * h_{t-1} from h_0 = 0. Returns
// the final hidden state (the context vector).
Tensor attn_gru_run(Tape& tape, const AttnGruCell& cell, const Tensor& facts, const Tensor& beta);

// Glorot-style uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot(Shape shape, Rng& rng);

}  // namespace tddmn
