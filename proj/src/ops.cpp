#include "jpis/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jpis/errors.hpp"

namespace jpis {
namespace {

std::string shapes(const Tensor& a, const Tensor& b) {
  return a.shape().str() + " and " + b.shape().str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shapes(a, b));
  }
}

void add_into(Tensor& dst, const Tensor& src, double factor = 1.0) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

}  // namespace

Mask column_mask(std::size_t rows, const std::vector<bool>& valid_cols) {
  Mask m;
  m.reserve(rows * valid_cols.size());
  for (std::size_t r = 0; r < rows; ++r) {
    m.insert(m.end(), valid_cols.begin(), valid_cols.end());
  }
  return m;
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: inner dimensions differ for " + shapes(A, B));
  }
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  out.mat().noalias() = A.mat() * B.mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      auto ga = t.grad(ia).mat();
      ga.noalias() += g.mat() * t.value(ib).mat().transpose();
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad(ib).mat();
      gb.noalias() += t.value(ia).mat().transpose() * g.mat();
    }
  });
}

Var transpose(Var a) {
  Tensor out = a.value().transposed();
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto ga = t.grad(ia).mat();
    ga += t.grad(self).mat().transpose();
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "add");
  Tensor out = A;
  add_into(out, B);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) add_into(t.grad(ia), g);
    if (t.needs_grad(ib)) add_into(t.grad(ib), g);
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "mul");
  Tensor out = A;
  auto o = out.data();
  auto bd = B.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    if (t.needs_grad(ia)) {
      auto ga = t.grad(ia).data();
      auto vb = t.value(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad(ib).data();
      auto va = t.value(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, factor](Tape& t, std::size_t self) {
    add_into(t.grad(ia), t.grad(self), factor);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  const Tensor& first = parts.front().value();
  require_matrix(first, "concat");
  std::size_t rows = first.rows(), cols = first.cols();
  std::vector<std::size_t> offsets{0};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Tensor& p = parts[k].value();
    require_matrix(p, "concat");
    const std::size_t shared = axis == 1 ? p.rows() : p.cols();
    if (shared != (axis == 1 ? rows : cols)) {
      throw ShapeError("concat: incompatible operands " + shapes(first, p));
    }
    offsets.push_back(axis == 1 ? cols : rows);
    (axis == 1 ? cols : rows) += axis == 1 ? p.cols() : p.rows();
  }
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& p = parts[k].value();
    if (axis == 1) {
      out.mat().block(0, offsets[k], p.rows(), p.cols()) = p.mat();
    } else {
      out.mat().block(offsets[k], 0, p.rows(), p.cols()) = p.mat();
    }
  }
  std::vector<std::size_t> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  return parts.front().tape().record(
      std::move(out), parts,
      [ids, offsets, axis](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          auto gk = t.grad(ids[k]).mat();
          if (axis == 1) {
            gk += g.mat().block(0, offsets[k], gk.rows(), gk.cols());
          } else {
            gk += g.mat().block(offsets[k], 0, gk.rows(), gk.cols());
          }
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  require_matrix(A, "slice");
  if (axis > 1) throw ShapeError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? A.rows() : A.cols();
  if (count == 0 || begin + count > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of bounds for " +
                     A.shape().str());
  }
  const std::size_t r = axis == 0 ? count : A.rows();
  const std::size_t c = axis == 0 ? A.cols() : count;
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 0 ? 0 : begin;
  Tensor out = Tensor::matrix(r, c);
  out.mat() = A.mat().block(r0, c0, r, c);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r0, c0, r, c](Tape& t, std::size_t self) {
    auto ga = t.grad(ia).mat();
    ga.block(r0, c0, r, c) += t.grad(self).mat();
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto y = t.value(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto y = t.value(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var a, const Mask* mask) {
  const Tensor& A = a.value();
  require_matrix(A, "softmax_rows");
  if (mask && mask->size() != A.numel()) {
    throw ShapeError("softmax_rows: mask has " + std::to_string(mask->size()) +
                     " entries for shape " + A.shape().str());
  }
  const std::size_t R = A.rows(), C = A.cols();
  Tensor out = Tensor::matrix(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      if (!mask || (*mask)[r * C + c]) mx = std::max(mx, A(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (mask && !(*mask)[r * C + c]) continue;
      out(r, c) = std::exp(A(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < C; ++c) out(r, c) /= total;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) {
        ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& T = table.value();
  require_matrix(T, "embedding");
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  const std::size_t dim = T.cols();
  Tensor out = Tensor::matrix(ids.size(), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= T.rows()) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) +
                       " out of range for table " + T.shape().str());
    }
    std::copy_n(T.data().begin() + ids[i] * dim, dim,
                out.data().begin() + i * dim);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  const std::size_t it = table.id();
  return table.tape().record(std::move(out), {table},
                             [it, rows = std::move(rows), dim](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto gt = t.grad(it).data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t k = 0; k < dim; ++k) gt[rows[i] * dim + k] += g[i * dim + k];
    }
  });
}

Var dropout(Var a, double rate, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ValidationError("dropout: rate must be in [0, 1)");
  }
  if (!rng || rate == 0.0) return a;
  a.tape().mark_stochastic();
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> factors(a.value().numel());
  for (double& f : factors) f = keep(*rng) ? inv : 0.0;
  Tensor out = a.value();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= factors[i];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, factors = std::move(factors)](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factors[i];
  });
}

double logsumexp_value(std::span<const double> values) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : values) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  // log1p keeps precision when one term dominates.
  double rest = 0.0;
  bool skipped = false;
  for (double v : values) {
    if (!skipped && v == mx) {
      skipped = true;
      continue;
    }
    rest += std::exp(v - mx);
  }
  return mx + std::log1p(rest);
}

Var logsumexp(Var a) {
  const double lse = logsumexp_value(a.value().data());
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(lse), {a}, [ia, lse](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    auto x = t.value(ia).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g * std::exp(x[i] - lse);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(total), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ia).data()) v += g;
  });
}

Var weighted_sum(const std::vector<Var>& parts, std::span<const double> weights) {
  if (parts.empty()) throw ShapeError("weighted_sum: no operands");
  if (parts.size() != weights.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(parts.size()) +
                     " operands but " + std::to_string(weights.size()) + " weights");
  }
  Tensor out(parts.front().value().shape(), 0.0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    require_same_shape(out, parts[k].value(), "weighted_sum");
    add_into(out, parts[k].value(), weights[k]);
  }
  std::vector<std::size_t> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  std::vector<double> w(weights.begin(), weights.end());
  return parts.front().tape().record(
      std::move(out), parts, [ids, w](Tape& t, std::size_t self) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.needs_grad(ids[k])) add_into(t.grad(ids[k]), t.grad(self), w[k]);
        }
      });
}

Var cross_entropy_with_logits(Var logits, std::size_t gold) {
  auto x = logits.value().data();
  if (gold >= x.size()) {
    throw ShapeError("cross_entropy_with_logits: gold index " +
                     std::to_string(gold) + " out of range for shape " +
                     logits.value().shape().str());
  }
  const double lse = logsumexp_value(x);
  // Margins relative to the gold logit make the gold term exactly zero, so
  // a confident prediction does not lose its loss to cancellation.
  std::vector<double> margins(x.begin(), x.end());
  for (double& m : margins) m -= x[gold];
  margins[gold] = 0.0;
  const std::size_t ia = logits.id();
  return logits.tape().record(
      Tensor::scalar(logsumexp_value(margins)), {logits}, [ia, lse, gold](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        auto xs = t.value(ia).data();
        auto ga = t.grad(ia).data();
        for (std::size_t i = 0; i < xs.size(); ++i) {
          ga[i] += g * (std::exp(xs[i] - lse) - (i == gold ? 1.0 : 0.0));
        }
      });
}

}  // namespace jpis
