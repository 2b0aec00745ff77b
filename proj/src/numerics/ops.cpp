#include "ntrr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ntrr/error.hpp"
#include "ntrr/kernels.hpp"

namespace ntrr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_matrix(const Tensor& t, const char* op) {
  if (!t.defined() || t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         (t.defined() ? shape_string(t.shape()) : std::string("undefined tensor")));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

std::size_t row_count(const Tensor& t) { return t.rank() == 1 ? 1 : t.size() / t.shape().back(); }

bool row_active(std::span<const std::uint8_t> mask, std::size_t r) { return mask.empty() || mask[r] != 0; }

void check_row_mask(std::span<const std::uint8_t> mask, std::size_t rows, const char* op) {
  if (!mask.empty() && mask.size() != rows) {
    throw DimensionError(std::string(op) + ": row mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(rows) + " rows");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make_op({m, n}, std::move(out), {a, b}, [m, k, n](BackwardContext& ctx) {
    const double* g = ctx.out_grad().data();
    if (auto da = ctx.input_grad(0); !da.empty()) {
      kernels::gemm_nt(g, ctx.input(1).values().data(), da.data(), m, n, k);
    }
    if (auto db = ctx.input_grad(1); !db.empty()) {
      kernels::gemm_tn(ctx.input(0).values().data(), g, db.data(), m, k, n);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::make_op({m, n}, std::move(out), {a, b}, [m, k, n](BackwardContext& ctx) {
    const double* g = ctx.out_grad().data();
    if (auto da = ctx.input_grad(0); !da.empty()) {
      kernels::gemm_nn(g, ctx.input(1).values().data(), da.data(), m, n, k);
    }
    if (auto db = ctx.input_grad(1); !db.empty()) {
      kernels::gemm_tn(g, ctx.input(0).values().data(), db.data(), m, n, k);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto x = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return Tensor::make_op({n, m}, std::move(out), {a}, [m, n](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto da = ctx.input_grad(0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  kernels::active().axpy(1.0, b.values().data(), out.data(), out.size());
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    for (std::size_t i = 0; i < 2; ++i) {
      if (auto d = ctx.input_grad(i); !d.empty()) kernels::active().axpy(1.0, g.data(), d.data(), d.size());
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  kernels::active().axpy(-1.0, b.values().data(), out.data(), out.size());
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (auto d = ctx.input_grad(0); !d.empty()) kernels::active().axpy(1.0, g.data(), d.data(), d.size());
    if (auto d = ctx.input_grad(1); !d.empty()) kernels::active().axpy(-1.0, g.data(), d.data(), d.size());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size(), 0.0);
  kernels::active().mul_acc(a.values().data(), b.values().data(), out.data(), out.size());
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](BackwardContext& ctx) {
    const double* g = ctx.out_grad().data();
    if (auto d = ctx.input_grad(0); !d.empty())
      kernels::active().mul_acc(g, ctx.input(1).values().data(), d.data(), d.size());
    if (auto d = ctx.input_grad(1); !d.empty())
      kernels::active().mul_acc(g, ctx.input(0).values().data(), d.data(), d.size());
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return Tensor::make_op(a.shape(), std::move(out), {a}, [factor](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    kernels::active().axpy(factor, ctx.out_grad().data(), d.data(), d.size());
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                         shape_string(x.shape()));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const double* b = bias.values().data();
  for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(1.0, b, out.data() + i * n, n);
  return Tensor::make_op(x.shape(), std::move(out), {x, bias}, [m, n](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (auto dx = ctx.input_grad(0); !dx.empty()) kernels::active().axpy(1.0, g.data(), dx.data(), dx.size());
    if (auto db = ctx.input_grad(1); !db.empty()) {
      for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(1.0, g.data() + i * n, db.data(), n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias);
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(v[i]);
  return Tensor::make_op(x.shape(), std::move(out), {x}, [](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    kernels::active().mul_acc(ctx.out_grad().data(), ctx.out_values().data(), d.data(), d.size());
  });
}

Tensor gelu(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = 0.5 * v[i] * (1.0 + std::erf(v[i] * std::numbers::sqrt2 / 2.0));
  return Tensor::make_op(x.shape(), std::move(out), {x}, [](BackwardContext& ctx) {
    const auto in = ctx.input(0).values();
    const auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double z = in[i];
      const double cdf = 0.5 * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * z * z);
      d[i] += g[i] * (cdf + z * pdf);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " + shape_string(bias.shape()) +
                         " do not match " + shape_string(x.shape()));
  }
  const auto v = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> out(m * n);
  std::vector<double> normed(m * n);
  std::vector<double> rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      normed[i * n + j] = (row[j] - mu) * rstd[i];
      out[i * n + j] = normed[i * n + j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [m, n, normed = std::move(normed), rstd = std::move(rstd)](BackwardContext& ctx) {
        const auto g = ctx.out_grad();
        const auto gv = ctx.input(1).values();
        auto dx = ctx.input_grad(0);
        auto dgain = ctx.input_grad(1);
        auto dbias = ctx.input_grad(2);
        std::vector<double> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          const double* gr = g.data() + i * n;
          const double* xh = normed.data() + i * n;
          if (!dgain.empty()) kernels::active().mul_acc(gr, xh, dgain.data(), n);
          if (!dbias.empty()) kernels::active().axpy(1.0, gr, dbias.data(), n);
          if (dx.empty()) continue;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            dxhat[j] = gr[j] * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
      });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  const auto v = x.values();
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = kNegInf;
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, v[base + j * inner]);
      if (mx == kNegInf) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(v[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return Tensor::make_op(shape, std::move(out), {x}, [outer, inner, len](BackwardContext& ctx) {
    const auto y = ctx.out_values();
    const auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          d[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require_matrix(x, "log_softmax");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  return Tensor::make_op(x.shape(), std::move(out), {x}, [m, n](BackwardContext& ctx) {
    const auto y = ctx.out_values();
    const auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t i = 0; i < m; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gsum;
    }
  });
}

Tensor cross_entropy(const Tensor& log_probs, std::span<const int> targets, Reduction reduction,
                     std::span<const std::uint8_t> row_mask) {
  require_matrix(log_probs, "cross_entropy");
  const std::size_t m = log_probs.rows(), n = log_probs.cols();
  if (targets.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(m) +
                         " rows");
  }
  check_row_mask(row_mask, m, "cross_entropy");
  const auto lp = log_probs.values();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= n) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(n) + ")");
    }
    if (!row_active(row_mask, i)) continue;
    total -= lp[i * n + static_cast<std::size_t>(targets[i])];
    ++count;
  }
  double factor = 1.0;
  if (reduction == Reduction::mean) factor = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
  return Tensor::make_op({1}, {total * factor}, {log_probs},
                         [n, factor, tg = std::move(tg), mask = std::move(mask)](BackwardContext& ctx) {
                           const double g = ctx.out_grad()[0] * factor;
                           auto d = ctx.input_grad(0);
                           for (std::size_t i = 0; i < tg.size(); ++i) {
                             if (!row_active(mask, i)) continue;
                             d[i * n + static_cast<std::size_t>(tg[i])] -= g;
                           }
                         });
}

Tensor kl_divergence(const Tensor& p, const Tensor& q, Reduction reduction, std::span<const std::uint8_t> row_mask) {
  require_same_shape(p, q, "kl_divergence");
  const std::size_t m = row_count(p);
  const std::size_t n = p.shape().back();
  check_row_mask(row_mask, m, "kl_divergence");
  const auto pv = p.values();
  const auto qv = q.values();
  if (debug_checks()) {
    for (std::size_t i = 0; i < m; ++i) {
      double sp = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        sp += pv[i * n + j];
        sq += qv[i * n + j];
      }
      if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6) {
        throw ContractError("kl_divergence: row " + std::to_string(i) + " is not a distribution (sums " +
                            std::to_string(sp) + ", " + std::to_string(sq) + ")");
      }
    }
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!row_active(row_mask, i)) continue;
    ++count;
    for (std::size_t j = 0; j < n; ++j) {
      const double pj = pv[i * n + j];
      const double qj = qv[i * n + j];
      total += pj * (std::log(std::max(pj, kKlEpsilon)) - std::log(std::max(qj, kKlEpsilon)));
    }
  }
  double factor = 1.0;
  if (reduction == Reduction::mean) factor = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
  std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
  return Tensor::make_op({1}, {total * factor}, {p, q}, [m, n, factor, mask = std::move(mask)](BackwardContext& ctx) {
    const double g = ctx.out_grad()[0] * factor;
    const auto pv = ctx.input(0).values();
    const auto qv = ctx.input(1).values();
    auto dp = ctx.input_grad(0);
    auto dq = ctx.input_grad(1);
    for (std::size_t i = 0; i < m; ++i) {
      if (!row_active(mask, i)) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = i * n + j;
        const double pj = pv[idx];
        const double qj = qv[idx];
        if (!dp.empty()) {
          const double self = pj >= kKlEpsilon ? std::log(pj) + 1.0 : std::log(kKlEpsilon);
          dp[idx] += g * (self - std::log(std::max(qj, kKlEpsilon)));
        }
        if (!dq.empty() && qj >= kKlEpsilon) dq[idx] -= g * pj / qj;
      }
    }
  });
}

Tensor dropout(const Tensor& x, double drop_prob, Rng& rng, bool training) {
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(drop_prob));
  }
  if (!training || drop_prob == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - drop_prob);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() >= drop_prob ? keep_scale : 0.0;
  std::vector<double> out(x.size(), 0.0);
  kernels::active().mul_acc(x.values().data(), mask.data(), out.data(), out.size());
  return Tensor::make_op(x.shape(), std::move(out), {x}, [mask = std::move(mask)](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    kernels::active().mul_acc(ctx.out_grad().data(), mask.data(), d.data(), d.size());
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding");
  const std::size_t rows = table.rows(), n = table.cols();
  if (ids.empty()) throw DimensionError("embedding: empty id sequence");
  std::vector<double> out(ids.size() * n);
  const auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(rows) +
                       " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * n, n, out.data() + i * n);
  }
  std::vector<int> id_copy(ids.begin(), ids.end());
  return Tensor::make_op({ids.size(), n}, std::move(out), {table}, [n, id_copy = std::move(id_copy)](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    const auto g = ctx.out_grad();
    for (std::size_t i = 0; i < id_copy.size(); ++i) {
      kernels::active().axpy(1.0, g.data() + i * n, d.data() + static_cast<std::size_t>(id_copy[i]) * n, n);
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.cols();
  if (rows.empty()) throw DimensionError("gather_rows: no rows requested");
  std::vector<double> out(rows.size() * n);
  const auto v = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(v.data() + rows[i] * n, n, out.data() + i * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::make_op({rows.size(), n}, std::move(out), {x}, [n, idx = std::move(idx)](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    const auto g = ctx.out_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) kernels::active().axpy(1.0, g.data() + i * n, d.data() + idx[i] * n, n);
  });
}

Tensor block(const Tensor& x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
  require_matrix(x, "block");
  const std::size_t n = x.cols();
  if (nrows == 0 || ncols == 0 || row0 + nrows > x.rows() || col0 + ncols > n) {
    throw DimensionError("block: [" + std::to_string(row0) + "+" + std::to_string(nrows) + ", " +
                         std::to_string(col0) + "+" + std::to_string(ncols) + "] outside " + shape_string(x.shape()));
  }
  std::vector<double> out(nrows * ncols);
  const auto v = x.values();
  for (std::size_t i = 0; i < nrows; ++i) std::copy_n(v.data() + (row0 + i) * n + col0, ncols, out.data() + i * ncols);
  return Tensor::make_op({nrows, ncols}, std::move(out), {x}, [=](BackwardContext& ctx) {
    auto d = ctx.input_grad(0);
    const auto g = ctx.out_grad();
    for (std::size_t i = 0; i < nrows; ++i)
      kernels::active().axpy(1.0, g.data() + i * ncols, d.data() + (row0 + i) * n + col0, ncols);
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].cols();
  std::size_t total_rows = 0;
  for (const Tensor& t : parts) {
    require_matrix(t, "concat_rows");
    if (t.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(t.shape()));
    }
    total_rows += t.rows();
  }
  std::vector<double> out;
  out.reserve(total_rows * n);
  for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  const std::size_t count = parts.size();
  return Tensor::make_op({total_rows, n}, std::move(out), std::move(inputs), [count](BackwardContext& ctx) {
    const auto g = ctx.out_grad();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t len = ctx.input(i).size();
      if (auto d = ctx.input_grad(i); !d.empty()) kernels::active().axpy(1.0, g.data() + offset, d.data(), len);
      offset += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::size_t total_cols = 0;
  for (const Tensor& t : parts) {
    require_matrix(t, "concat_cols");
    if (t.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(t.shape()));
    }
    total_cols += t.cols();
  }
  std::vector<double> out(m * total_cols);
  std::vector<std::size_t> offsets;
  std::size_t col = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(col);
    const std::size_t c = t.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(t.values().data() + i * c, c, out.data() + i * total_cols + col);
    col += c;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_op({m, total_cols}, std::move(out), std::move(inputs),
                         [m, total_cols, offsets = std::move(offsets)](BackwardContext& ctx) {
                           const auto g = ctx.out_grad();
                           for (std::size_t p = 0; p < offsets.size(); ++p) {
                             auto d = ctx.input_grad(p);
                             if (d.empty()) continue;
                             const std::size_t c = ctx.input(p).cols();
                             for (std::size_t i = 0; i < m; ++i)
                               kernels::active().axpy(1.0, g.data() + i * total_cols + offsets[p], d.data() + i * c, c);
                           }
                         });
}

Tensor sum(const Tensor& x) {
  const double total = kernels::active().sum(x.values().data(), x.size());
  return Tensor::make_op({1}, {total}, {x}, [](BackwardContext& ctx) {
    const double g = ctx.out_grad()[0];
    for (double& d : ctx.input_grad(0)) d += g;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

}  // namespace ntrr
