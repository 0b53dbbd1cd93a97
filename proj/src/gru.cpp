#include "tddmn/gru.hpp"

#include <cmath>

namespace tddmn {

namespace {

void check_step_shapes(const char* what, std::size_t d, std::size_t h, const Tensor& x,
                       const Tensor& h_prev) {
  if (x.rank() != 1 || x.shape()[0] != d) {
    throw shape_error(std::string(what) + ": input " + shape_str(x.shape()) + ", cell expects [" +
                      std::to_string(d) + "]");
  }
  if (h_prev.rank() != 1 || h_prev.shape()[0] != h) {
    throw shape_error(std::string(what) + ": hidden " + shape_str(h_prev.shape()) +
                      ", cell expects [" + std::to_string(h) + "]");
  }
}

}  // namespace

Tensor glorot(Shape shape, Rng& rng) {
  const std::size_t fan_in = shape.size() == 1 ? shape[0] : shape[0];
  const std::size_t fan_out = shape.size() == 1 ? shape[0] : shape[1];
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), rng, -a, a, true);
}

GruCell GruCell::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  GruCell c;
  c.input_size = input_size;
  c.hidden_size = hidden_size;
  c.W_r = glorot({input_size, hidden_size}, rng);
  c.W_z = glorot({input_size, hidden_size}, rng);
  c.W_h = glorot({input_size, hidden_size}, rng);
  c.U_r = glorot({hidden_size, hidden_size}, rng);
  c.U_z = glorot({hidden_size, hidden_size}, rng);
  c.U_h = glorot({hidden_size, hidden_size}, rng);
  c.b_r = Tensor::zeros({hidden_size}, true);
  c.b_z = Tensor::zeros({hidden_size}, true);
  c.b_h = Tensor::zeros({hidden_size}, true);
  return c;
}

void GruCell::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".W_r", W_r);
  out.emplace_back(prefix + ".W_z", W_z);
  out.emplace_back(prefix + ".W_h", W_h);
  out.emplace_back(prefix + ".U_r", U_r);
  out.emplace_back(prefix + ".U_z", U_z);
  out.emplace_back(prefix + ".U_h", U_h);
  out.emplace_back(prefix + ".b_r", b_r);
  out.emplace_back(prefix + ".b_z", b_z);
  out.emplace_back(prefix + ".b_h", b_h);
}

BiGru BiGru::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  BiGru b;
  b.fwd = GruCell::init(input_size, hidden_size, rng);
  b.bwd = GruCell::init(input_size, hidden_size, rng);
  return b;
}

void BiGru::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  fwd.collect_params(prefix + ".fwd", out);
  bwd.collect_params(prefix + ".bwd", out);
}

AttnGruCell AttnGruCell::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  AttnGruCell c;
  c.input_size = input_size;
  c.hidden_size = hidden_size;
  c.W_r = glorot({input_size, hidden_size}, rng);
  c.W_h = glorot({input_size, hidden_size}, rng);
  c.U_r = glorot({hidden_size, hidden_size}, rng);
  c.U_h = glorot({hidden_size, hidden_size}, rng);
  c.b_r = Tensor::zeros({hidden_size}, true);
  c.b_h = Tensor::zeros({hidden_size}, true);
  return c;
}

void AttnGruCell::collect_params(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".W_r", W_r);
  out.emplace_back(prefix + ".W_h", W_h);
  out.emplace_back(prefix + ".U_r", U_r);
  out.emplace_back(prefix + ".U_h", U_h);
  out.emplace_back(prefix + ".b_r", b_r);
  out.emplace_back(prefix + ".b_h", b_h);
}

Tensor gru_step(Tape& tape, const GruCell& cell, const Tensor& x, const Tensor& h_prev) {
  check_step_shapes("gru_step", cell.input_size, cell.hidden_size, x, h_prev);
  using namespace ops;
  Tensor r = sigmoid(tape, add(tape, add(tape, matmul(tape, x, cell.W_r),
                                         matmul(tape, h_prev, cell.U_r)),
                               cell.b_r));
  Tensor z = sigmoid(tape, add(tape, add(tape, matmul(tape, x, cell.W_z),
                                         matmul(tape, h_prev, cell.U_z)),
                               cell.b_z));
  Tensor cand = tanh(tape, add(tape, add(tape, matmul(tape, x, cell.W_h),
                                         matmul(tape, mul(tape, r, h_prev), cell.U_h)),
                               cell.b_h));
  Tensor one = Tensor::scalar(1.0);
  return add(tape, mul(tape, z, h_prev), mul(tape, sub(tape, one, z), cand));
}

Tensor bigru_run(Tape& tape, const BiGru& net, const Tensor& seq) {
  if (seq.rank() != 2) throw shape_error("bigru_run: sequence must be rank 2");
  const std::size_t n = seq.shape()[0];
  if (n < 1) throw shape_error("bigru_run: empty sequence");
  if (net.fwd.hidden_size != net.bwd.hidden_size) {
    throw shape_error("bigru_run: directional hidden sizes differ");
  }
  const std::size_t h = net.fwd.hidden_size;
  using namespace ops;

  std::vector<Tensor> fwd_h(n), bwd_h(n);
  Tensor state = Tensor::zeros({h});
  for (std::size_t j = 0; j < n; ++j) {
    state = gru_step(tape, net.fwd, row(tape, seq, j), state);
    fwd_h[j] = state;
  }
  state = Tensor::zeros({h});
  for (std::size_t j = n; j-- > 0;) {
    state = gru_step(tape, net.bwd, row(tape, seq, j), state);
    bwd_h[j] = state;
  }
  std::vector<Tensor> merged(n);
  for (std::size_t j = 0; j < n; ++j) merged[j] = add(tape, fwd_h[j], bwd_h[j]);
  return stack_rows(tape, merged);
}

Tensor attn_gru_run(Tape& tape, const AttnGruCell& cell, const Tensor& facts,
                    const Tensor& beta) {
  if (facts.rank() != 2) throw shape_error("attn_gru_run: facts must be rank 2");
  const std::size_t l = facts.shape()[0];
  if (beta.rank() != 1 || beta.shape()[0] != l) {
    throw shape_error("attn_gru_run: beta " + shape_str(beta.shape()) + " vs " +
                      std::to_string(l) + " facts");
  }
  for (std::size_t t = 0; t < l; ++t) {
    const double b = beta.data()[t];
    if (!(b >= 0.0 && b <= 1.0)) {
      throw std::domain_error("attn_gru_run: beta[" + std::to_string(t) + "] = " +
                              std::to_string(b) + " outside [0,1]");
    }
  }
  using namespace ops;
  Tensor one = Tensor::scalar(1.0);
  Tensor h = Tensor::zeros({cell.hidden_size});
  for (std::size_t t = 0; t < l; ++t) {
    Tensor f = row(tape, facts, t);
    Tensor r = sigmoid(tape, add(tape, add(tape, matmul(tape, f, cell.W_r),
                                           matmul(tape, h, cell.U_r)),
                                 cell.b_r));
    Tensor cand = tanh(tape, add(tape, add(tape, matmul(tape, f, cell.W_h),
                                           matmul(tape, mul(tape, r, h), cell.U_h)),
                                 cell.b_h));
    Tensor bt = pick(tape, beta, t);
    h = add(tape, mul(tape, bt, cand), mul(tape, sub(tape, one, bt), h));
  }
  return h;
}

}  // namespace tddmn
