#include "tddmn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tddmn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw shape_error("tensor rank must be 1-3, got " + shape_str(shape));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw shape_error("zero extent in shape " + shape_str(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<Node>();
  node->values.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw shape_error("value count " + std::to_string(values.size()) +
                      " does not fill shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  check_shape(shape);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return from(std::move(shape), std::move(v), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    throw shape_error("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->values[0];
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) {
    throw std::logic_error("gradient read before any backward pass");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->values.size(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(node_->values.begin(), node_->values.end(),
                     [](double x) { return std::isfinite(x); });
}

void Tape::backward(Tensor loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw shape_error("backward requires a scalar loss");
  }
  if (!recording_) {
    throw std::logic_error("backward on a non-recording tape");
  }
  if (used_) {
    throw std::logic_error("second backward without a new forward pass");
  }
  used_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

namespace ops {
namespace {

bool want_grad(const Tape& tape, const Tensor& a) {
  return tape.recording() && a.requires_grad();
}

bool want_grad(const Tape& tape, const Tensor& a, const Tensor& b) {
  return tape.recording() && (a.requires_grad() || b.requires_grad());
}

// Broadcast classification for binary element-wise ops.
enum class Bcast { none, a_scalar, b_scalar, a_row, b_row };

bool is_row_over(const Tensor& v, const Tensor& m) {
  if (m.rank() != 2) return false;
  const std::size_t n = m.shape()[1];
  if (v.rank() == 1) return v.shape()[0] == n;
  return v.rank() == 2 && v.shape()[0] == 1 && v.shape()[1] == n;
}

Bcast classify(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.shape() == b.shape()) return Bcast::none;
  if (a.size() == 1) return Bcast::a_scalar;
  if (b.size() == 1) return Bcast::b_scalar;
  if (is_row_over(a, b)) return Bcast::a_row;
  if (is_row_over(b, a)) return Bcast::b_row;
  throw shape_error(std::string(opname) + ": incompatible shapes " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
}

// Accumulates an output-shaped gradient into a broadcast operand: identity,
// full sum (scalar), or per-column sum over rows (row vector).
void reduce_into(std::vector<double>& dst, const std::vector<double>& g, std::size_t dst_size) {
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  } else if (dst_size == 1) {
    double s = 0.0;
    for (double x : g) s += x;
    dst[0] += s;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i % dst_size] += g[i];
  }
}

template <class Fwd, class MakeBwd>
Tensor binary_ew(Tape& tape, const Tensor& a, const Tensor& b, const char* opname, Fwd fwd,
                 MakeBwd make_bwd) {
  const Bcast bc = classify(a, b, opname);
  const Tensor& big = (bc == Bcast::a_scalar || bc == Bcast::a_row) ? b : a;
  const std::size_t n = big.size();
  std::vector<double> out(n);
  const double* pa = a.data();
  const double* pb = b.data();
  const std::size_t an = a.size();
  const std::size_t bn = b.size();
  for (std::size_t i = 0; i < n; ++i) {
    fwd(out[i], pa[an == n ? i : i % an], pb[bn == n ? i : i % bn]);
  }
  Tensor result = Tensor::from(big.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  if (want_grad(tape, a, b)) tape.record(make_bwd(a, b, result));
  return result;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2) {
    throw shape_error("matmul: operands must be rank 1 or 2, got " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.rank() == 1 ? 1 : a.shape()[0];
  const std::size_t k = a.rank() == 1 ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = b.rank() == 1 ? b.shape()[0] : b.shape()[0];
  const std::size_t n = b.rank() == 1 ? 1 : b.shape()[1];
  if (k != kb) {
    throw shape_error("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }

  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = pa[i * k + t];
      if (av == 0.0) continue;
      const double* brow = pb + t * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  Shape out_shape;
  if (a.rank() == 1 && b.rank() == 1) {
    out_shape = {1};
  } else if (a.rank() == 1) {
    out_shape = {n};
  } else if (b.rank() == 1) {
    out_shape = {m};
  } else {
    out_shape = {m, n};
  }
  Tensor result = Tensor::from(out_shape, std::move(out), a.requires_grad() || b.requires_grad());

  if (want_grad(tape, a, b)) {
    tape.record([a = a, b = b, result, m, k, n]() mutable {
      const std::vector<double>& g = result.grad();
      if (a.requires_grad()) {
        std::vector<double>& da = a.grad();
        const double* pb = b.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < k; ++t) {
            double s = 0.0;
            const double* brow = pb + t * n;
            const double* grow = g.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            da[i * k + t] += s;
          }
        }
      }
      if (b.requires_grad()) {
        std::vector<double>& db = b.grad();
        const double* pa = a.data();
        for (std::size_t t = 0; t < k; ++t) {
          for (std::size_t i = 0; i < m; ++i) {
            const double av = pa[i * k + t];
            if (av == 0.0) continue;
            const double* grow = g.data() + i * n;
            double* drow = db.data() + t * n;
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_ew(
      tape, a, b, "add", [](double& o, double x, double y) { o = x + y; },
      [](Tensor a, Tensor b, Tensor out) {
        return [a, b, out]() mutable {
          const std::vector<double>& g = out.grad();
          if (a.requires_grad()) reduce_into(a.grad(), g, a.size());
          if (b.requires_grad()) reduce_into(b.grad(), g, b.size());
        };
      });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_ew(
      tape, a, b, "sub", [](double& o, double x, double y) { o = x - y; },
      [](Tensor a, Tensor b, Tensor out) {
        return [a, b, out]() mutable {
          const std::vector<double>& g = out.grad();
          if (a.requires_grad()) reduce_into(a.grad(), g, a.size());
          if (b.requires_grad()) {
            std::vector<double> neg(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
            reduce_into(b.grad(), neg, b.size());
          }
        };
      });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_ew(
      tape, a, b, "mul", [](double& o, double x, double y) { o = x * y; },
      [](Tensor a, Tensor b, Tensor out) {
        return [a, b, out]() mutable {
          const std::vector<double>& g = out.grad();
          const std::size_t n = g.size();
          const std::size_t an = a.size();
          const std::size_t bn = b.size();
          if (a.requires_grad()) {
            std::vector<double> ga(n);
            const double* pb = b.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] = g[i] * pb[bn == n ? i : i % bn];
            reduce_into(a.grad(), ga, an);
          }
          if (b.requires_grad()) {
            std::vector<double> gb(n);
            const double* pa = a.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] = g[i] * pa[an == n ? i : i % an];
            reduce_into(b.grad(), gb, bn);
          }
        };
      });
}

namespace {

template <class Fwd, class Dfn>
Tensor unary_ew(Tape& tape, const Tensor& a, Fwd fwd, Dfn dfn) {
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i]);
  Tensor result = Tensor::from(a.shape(), std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, dfn]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      const double* x = a.data();
      const double* y = result.data();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * dfn(x[i], y[i]);
    });
  }
  return result;
}

}  // namespace

Tensor abs(Tape& tape, const Tensor& a) {
  return unary_ew(
      tape, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x < 0.0 ? -1.0 : 1.0; });
}

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary_ew(
      tape, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_ew(
      tape, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary_ew(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  if (a.rank() > 2) throw shape_error("softmax_rows: rank must be 1 or 2");
  const std::size_t m = a.rank() == 1 ? 1 : a.shape()[0];
  const std::size_t n = a.rank() == 1 ? a.shape()[0] : a.shape()[1];
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = pa + i * n;
    double* y = out.data() + i * n;
    double mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= s;
  }
  Tensor result = Tensor::from(a.shape(), std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, m, n]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      const double* y = result.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* yr = y + i * n;
        const double* gr = g.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return result;
}

Tensor concat(Tape& tape, std::size_t axis, std::span<const Tensor> parts) {
  if (parts.empty()) throw shape_error("concat: no operands");
  const std::size_t rank = parts[0].rank();
  if (axis >= rank) throw shape_error("concat: axis out of range");
  for (const Tensor& t : parts) {
    if (t.rank() != rank) throw shape_error("concat: mixed ranks");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && t.shape()[d] != parts[0].shape()[d]) {
        throw shape_error("concat: extent mismatch off axis, " + shape_str(parts[0].shape()) +
                          " vs " + shape_str(t.shape()));
      }
    }
  }
  if (rank > 2) throw shape_error("concat: rank must be 1 or 2");

  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const Tensor& t : parts) out_shape[axis] += t.shape()[axis];

  bool rg = false;
  for (const Tensor& t : parts) rg = rg || t.requires_grad();

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> col_off;  // axis-1 bookkeeping
  if (rank == 1 || axis == 0) {
    std::size_t off = 0;
    for (const Tensor& t : parts) {
      std::copy(t.data(), t.data() + t.size(), out.begin() + static_cast<long>(off));
      off += t.size();
    }
  } else {
    const std::size_t m = out_shape[0];
    const std::size_t total_cols = out_shape[1];
    std::size_t off = 0;
    for (const Tensor& t : parts) {
      const std::size_t cols = t.shape()[1];
      col_off.push_back(off);
      for (std::size_t i = 0; i < m; ++i) {
        std::copy(t.data() + i * cols, t.data() + (i + 1) * cols,
                  out.begin() + static_cast<long>(i * total_cols + off));
      }
      off += cols;
    }
  }

  Tensor result = Tensor::from(out_shape, std::move(out), rg);
  if (tape.recording() && rg) {
    std::vector<Tensor> held(parts.begin(), parts.end());
    tape.record([held = std::move(held), result, axis, rank]() mutable {
      const std::vector<double>& g = result.grad();
      if (rank == 1 || axis == 0) {
        std::size_t off = 0;
        for (Tensor& t : held) {
          if (t.requires_grad()) {
            std::vector<double>& dt = t.grad();
            for (std::size_t i = 0; i < t.size(); ++i) dt[i] += g[off + i];
          }
          off += t.size();
        }
      } else {
        const std::size_t m = result.shape()[0];
        const std::size_t total_cols = result.shape()[1];
        std::size_t off = 0;
        for (Tensor& t : held) {
          const std::size_t cols = t.shape()[1];
          if (t.requires_grad()) {
            std::vector<double>& dt = t.grad();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < cols; ++j) {
                dt[i * cols + j] += g[i * total_cols + off + j];
              }
            }
          }
          off += cols;
        }
      }
    });
  }
  return result;
}

Tensor concat(Tape& tape, std::size_t axis, std::initializer_list<Tensor> parts) {
  return concat(tape, axis, std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw shape_error("reshape: " + shape_str(a.shape()) + " has " + std::to_string(a.size()) +
                      " elements, target " + shape_str(shape));
  }
  Tensor result = Tensor::from(std::move(shape), a.values(), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    });
  }
  return result;
}

Tensor rows(Tape& tape, const Tensor& table, std::span<const int> indices) {
  if (table.rank() != 2) throw shape_error("rows: table must be rank 2");
  if (indices.empty()) throw shape_error("rows: empty index list");
  const std::size_t v = table.shape()[0];
  const std::size_t d = table.shape()[1];
  std::vector<double> out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int id = indices[i];
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw shape_error("rows: index " + std::to_string(id) + " out of bounds for table " +
                        shape_str(table.shape()));
    }
    std::copy(table.data() + id * d, table.data() + (id + 1) * d,
              out.begin() + static_cast<long>(i * d));
  }
  Tensor result =
      Tensor::from({indices.size(), d}, std::move(out), table.requires_grad());
  if (want_grad(tape, table)) {
    std::vector<int> idx(indices.begin(), indices.end());
    Tensor t = table;
    tape.record([t, result, idx = std::move(idx), d]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& dt = t.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        double* drow = dt.data() + static_cast<std::size_t>(idx[i]) * d;
        const double* grow = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) drow[j] += grow[j];
      }
    });
  }
  return result;
}

Tensor row(Tape& tape, const Tensor& a, std::size_t i) {
  if (a.rank() != 2) throw shape_error("row: operand must be rank 2");
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  if (i >= m) throw shape_error("row: index out of range");
  std::vector<double> out(a.data() + i * n, a.data() + (i + 1) * n);
  Tensor result = Tensor::from({n}, std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, i, n]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j];
    });
  }
  return result;
}

Tensor pick(Tape& tape, const Tensor& a, std::size_t i) {
  if (a.rank() != 1) throw shape_error("pick: operand must be rank 1");
  if (i >= a.size()) throw shape_error("pick: index out of range");
  Tensor result = Tensor::from({1}, {a.data()[i]}, a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, i]() mutable { a.grad()[i] += result.grad()[0]; });
  }
  return result;
}

Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t m) {
  if (v.rank() > 2 || (v.rank() == 2 && v.shape()[0] != 1)) {
    throw shape_error("tile_rows: operand must be a vector or single row");
  }
  const std::size_t n = v.size();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(v.data(), v.data() + n, out.begin() + static_cast<long>(i * n));
  }
  Tensor result = Tensor::from({m, n}, std::move(out), v.requires_grad());
  if (want_grad(tape, v)) {
    tape.record([v = v, result, m, n]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& dv = v.grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dv[j] += g[i * n + j];
      }
    });
  }
  return result;
}

Tensor stack_rows(Tape& tape, std::span<const Tensor> rows_in) {
  if (rows_in.empty()) throw shape_error("stack_rows: no rows");
  std::vector<Tensor> as_rows;
  as_rows.reserve(rows_in.size());
  for (const Tensor& r : rows_in) {
    if (r.rank() != 1) throw shape_error("stack_rows: operands must be rank 1");
    as_rows.push_back(reshape(tape, r, {1, r.size()}));
  }
  return concat(tape, 0, std::span<const Tensor>(as_rows));
}

Tensor mean_rows(Tape& tape, const Tensor& a) {
  if (a.rank() != 2) throw shape_error("mean_rows: operand must be rank 2");
  const std::size_t m = a.shape()[0];
  const std::size_t n = a.shape()[1];
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += a.data()[i * n + j];
  }
  for (double& x : out) x /= static_cast<double>(m);
  Tensor result = Tensor::from({n}, std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, m, n]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j] * inv;
      }
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  Tensor result = Tensor::from({1}, {s}, a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result]() mutable {
      const double g = result.grad()[0];
      std::vector<double>& da = a.grad();
      for (double& x : da) x += g;
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * c;
  Tensor result = Tensor::from(a.shape(), std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, c]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * c;
    });
  }
  return result;
}

Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw shape_error("dropout: rate must be in [0,1)");
  if (rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * mask[i];
  Tensor result = Tensor::from(a.shape(), std::move(out), a.requires_grad());
  if (want_grad(tape, a)) {
    tape.record([a = a, result, mask = std::move(mask)]() mutable {
      const std::vector<double>& g = result.grad();
      std::vector<double>& da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * mask[i];
    });
  }
  return result;
}

Tensor masked_nll(Tape& tape, const Tensor& p, std::span<const int> labels,
                  std::span<const std::uint8_t> mask) {
  if (p.rank() != 2) throw shape_error("masked_nll: p must be rank 2");
  const std::size_t n = p.shape()[0];
  const std::size_t o = p.shape()[1];
  if (labels.size() != n || mask.size() != n) {
    throw shape_error("masked_nll: labels/mask length " + std::to_string(labels.size()) + "/" +
                      std::to_string(mask.size()) + " vs " + std::to_string(n) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= o) {
      throw shape_error("masked_nll: label " + std::to_string(y) + " outside [0," +
                        std::to_string(o) + ")");
    }
  }
  double j = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) j -= std::log(p.data()[i * o + labels[i]]);
  }
  Tensor result = Tensor::from({1}, {j}, p.requires_grad());
  if (want_grad(tape, p)) {
    std::vector<int> ls(labels.begin(), labels.end());
    std::vector<std::uint8_t> ms(mask.begin(), mask.end());
    tape.record([p = p, result, ls = std::move(ls), ms = std::move(ms), o]() mutable {
      const double g = result.grad()[0];
      std::vector<double>& dp = p.grad();
      for (std::size_t i = 0; i < ls.size(); ++i) {
        if (ms[i]) {
          const std::size_t at = i * o + static_cast<std::size_t>(ls[i]);
          dp[at] -= g / p.data()[at];
        }
      }
    });
  }
  return result;
}

}  // namespace ops
}  // namespace tddmn
