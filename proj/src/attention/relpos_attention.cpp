#include <algorithm>
#include <cmath>
#include <limits>

#include "ntrr/attention.hpp"
#include "ntrr/error.hpp"
#include "ntrr/kernels.hpp"
#include "ntrr/ops.hpp"

namespace ntrr::attention {
namespace {

void check_positions(std::size_t rows, std::span<const Position> pos, const char* what) {
  if (pos.size() != rows) {
    throw ContractError(std::string(what) + ": " + std::to_string(pos.size()) + " positions for " +
                        std::to_string(rows) + " rows");
  }
}

void check_table(const RelPosTable& table, std::size_t head_dim, int clip_k) {
  const std::size_t rows = static_cast<std::size_t>(2 * table.radius + 1);
  if (table.key.shape() != Shape{rows, head_dim} || table.value.shape() != Shape{rows, head_dim}) {
    throw DimensionError("relative position table " + shape_string(table.key.shape()) + "/" +
                         shape_string(table.value.shape()) + " does not match radius " +
                         std::to_string(table.radius) + " and head dim " + std::to_string(head_dim));
  }
  if (clip_k < 1 || clip_k > table.radius) {
    throw ConfigError("clip distance " + std::to_string(clip_k) + " outside 1.." + std::to_string(table.radius));
  }
}

}  // namespace

void AttentionConfig::validate() const {
  if (model_dim == 0 || num_heads == 0) throw ConfigError("attention: model_dim and num_heads must be positive");
  if (model_dim % num_heads != 0) {
    throw ConfigError("attention: model_dim " + std::to_string(model_dim) + " not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (mode == PeMode::relative && clip_k < 1) throw ConfigError("attention: clip_k must be >= 1 in relative mode");
  if (!(attn_dropout >= 0.0 && attn_dropout < 1.0)) throw ConfigError("attention: attn_dropout must be in [0, 1)");
}

int clip_rel(Position displacement, int k) {
  if (k < 1) throw ContractError("clip_rel: k must be >= 1");
  return static_cast<int>(std::max<Position>(-k, std::min<Position>(k, displacement)));
}

RelPosTable RelPosTable::zeros(int radius, std::size_t head_dim, bool requires_grad) {
  if (radius < 1) throw ConfigError("relative position table radius must be >= 1");
  const std::size_t rows = static_cast<std::size_t>(2 * radius + 1);
  return RelPosTable{Tensor::zeros({rows, head_dim}, requires_grad), Tensor::zeros({rows, head_dim}, requires_grad),
                     radius};
}

std::size_t RelPosTable::row(Position displacement, int clip_k) const {
  return static_cast<std::size_t>(clip_rel(displacement, clip_k) + radius);
}

Tensor sinusoidal_pe(std::size_t length, std::size_t model_dim, Position first_position) {
  if (model_dim == 0 || model_dim % 2 != 0) {
    throw ConfigError("sinusoidal_pe: model_dim must be even and positive, got " + std::to_string(model_dim));
  }
  std::vector<double> v(length * model_dim);
  for (std::size_t p = 0; p < length; ++p) {
    const double pos = static_cast<double>(first_position + static_cast<Position>(p));
    for (std::size_t j = 0; j < model_dim / 2; ++j) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(model_dim));
      v[p * model_dim + 2 * j] = std::sin(pos * freq);
      v[p * model_dim + 2 * j + 1] = std::cos(pos * freq);
    }
  }
  return Tensor::from({length, model_dim}, std::move(v));
}

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

AttentionMask AttentionMask::with_memory(std::size_t memory_cols) const {
  AttentionMask out(rows_, cols_ + memory_cols, true);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out.set(r, memory_cols + c, allowed(r, c));
  return out;
}

AttentionMask AttentionMask::causal(std::size_t rows, std::size_t memory_cols) {
  AttentionMask out(rows, rows + memory_cols, false);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < memory_cols + r + 1; ++c) out.set(r, c, true);
  return out;
}

std::vector<Position> position_range(Position first, std::size_t count) {
  std::vector<Position> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + static_cast<Position>(i);
  return out;
}

Tensor rel_attention_scores(const Tensor& q, const Tensor& k, const RelPosTable* table, int clip_k,
                            const AttentionMask* mask, std::span<const Position> pos_q,
                            std::span<const Position> pos_k) {
  if (q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols()) {
    throw DimensionError("rel_attention_scores: q " + shape_string(q.shape()) + " and k " + shape_string(k.shape()) +
                         " disagree");
  }
  const std::size_t nq = q.rows(), nk = k.rows(), d = q.cols();
  check_positions(nq, pos_q, "rel_attention_scores (queries)");
  check_positions(nk, pos_k, "rel_attention_scores (keys)");
  if (mask != nullptr && (mask->rows() != nq || mask->cols() != nk)) {
    throw ContractError("rel_attention_scores: mask " + std::to_string(mask->rows()) + "x" +
                        std::to_string(mask->cols()) + " does not match scores " + std::to_string(nq) + "x" +
                        std::to_string(nk));
  }
  if (table != nullptr) check_table(*table, d, clip_k);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto qv = q.values();
  const auto kv = k.values();
  const auto dot = kernels::active().dot;
  // rel_rows[i * nk + l]: table row used by the pair, shared with backward.
  std::vector<std::size_t> rel_rows;
  if (table != nullptr) {
    rel_rows.resize(nq * nk);
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t l = 0; l < nk; ++l) rel_rows[i * nk + l] = table->row(pos_k[l] - pos_q[i], clip_k);
  }
  const double* wk = table != nullptr ? table->key.values().data() : nullptr;
  std::vector<double> out(nq * nk);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t l = 0; l < nk; ++l) {
      if (mask != nullptr && !mask->allowed(i, l)) {
        out[i * nk + l] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double s = dot(qv.data() + i * d, kv.data() + l * d, d);
      if (wk != nullptr) s += dot(qv.data() + i * d, wk + rel_rows[i * nk + l] * d, d);
      out[i * nk + l] = s * scale;
    }
  }
  std::vector<Tensor> inputs{q, k};
  if (table != nullptr) inputs.push_back(table->key);
  return Tensor::make_op(
      {nq, nk}, std::move(out), std::move(inputs),
      [nq, nk, d, scale, rel_rows = std::move(rel_rows)](BackwardContext& ctx) {
        const auto g = ctx.out_grad();
        const auto qv = ctx.input(0).values();
        const auto kv = ctx.input(1).values();
        const bool has_table = !rel_rows.empty();
        const double* wk = has_table ? ctx.input(2).values().data() : nullptr;
        auto dq = ctx.input_grad(0);
        auto dk = ctx.input_grad(1);
        std::span<double> dw = has_table ? ctx.input_grad(2) : std::span<double>{};
        const auto axpy = kernels::active().axpy;
        for (std::size_t i = 0; i < nq; ++i) {
          for (std::size_t l = 0; l < nk; ++l) {
            const double gil = g[i * nk + l] * scale;
            if (gil == 0.0) continue;
            if (!dq.empty()) {
              axpy(gil, kv.data() + l * d, dq.data() + i * d, d);
              if (has_table) axpy(gil, wk + rel_rows[i * nk + l] * d, dq.data() + i * d, d);
            }
            if (!dk.empty()) axpy(gil, qv.data() + i * d, dk.data() + l * d, d);
            if (!dw.empty()) axpy(gil, qv.data() + i * d, dw.data() + rel_rows[i * nk + l] * d, d);
          }
        }
      });
}

Tensor rel_attention_values(const Tensor& weights, const Tensor& v, const RelPosTable* table, int clip_k,
                            std::span<const Position> pos_q, std::span<const Position> pos_k) {
  if (weights.rank() != 2 || v.rank() != 2 || weights.cols() != v.rows()) {
    throw DimensionError("rel_attention_values: weights " + shape_string(weights.shape()) + " and values " +
                         shape_string(v.shape()) + " disagree");
  }
  const std::size_t nq = weights.rows(), nk = v.rows(), d = v.cols();
  check_positions(nq, pos_q, "rel_attention_values (queries)");
  check_positions(nk, pos_k, "rel_attention_values (keys)");
  if (table != nullptr) check_table(*table, d, clip_k);

  std::vector<double> out(nq * d, 0.0);
  kernels::gemm_nn(weights.values().data(), v.values().data(), out.data(), nq, nk, d);
  std::vector<std::size_t> rel_rows;
  if (table != nullptr) {
    rel_rows.resize(nq * nk);
    const auto w = weights.values();
    const double* wv = table->value.values().data();
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t l = 0; l < nk; ++l) {
        const std::size_t r = table->row(pos_k[l] - pos_q[i], clip_k);
        rel_rows[i * nk + l] = r;
        if (w[i * nk + l] != 0.0) kernels::active().axpy(w[i * nk + l], wv + r * d, out.data() + i * d, d);
      }
    }
  }
  std::vector<Tensor> inputs{weights, v};
  if (table != nullptr) inputs.push_back(table->value);
  return Tensor::make_op(
      {nq, d}, std::move(out), std::move(inputs), [nq, nk, d, rel_rows = std::move(rel_rows)](BackwardContext& ctx) {
        const auto g = ctx.out_grad();
        const auto w = ctx.input(0).values();
        const auto vv = ctx.input(1).values();
        const bool has_table = !rel_rows.empty();
        const double* wv = has_table ? ctx.input(2).values().data() : nullptr;
        const auto& k = kernels::active();
        if (auto dw = ctx.input_grad(0); !dw.empty()) {
          for (std::size_t i = 0; i < nq; ++i) {
            for (std::size_t l = 0; l < nk; ++l) {
              double s = k.dot(g.data() + i * d, vv.data() + l * d, d);
              if (has_table) s += k.dot(g.data() + i * d, wv + rel_rows[i * nk + l] * d, d);
              dw[i * nk + l] += s;
            }
          }
        }
        if (auto dv = ctx.input_grad(1); !dv.empty()) kernels::gemm_tn(w.data(), g.data(), dv.data(), nq, nk, d);
        if (has_table) {
          if (auto dtab = ctx.input_grad(2); !dtab.empty()) {
            for (std::size_t i = 0; i < nq; ++i)
              for (std::size_t l = 0; l < nk; ++l)
                if (w[i * nk + l] != 0.0)
                  k.axpy(w[i * nk + l], g.data() + i * d, dtab.data() + rel_rows[i * nk + l] * d, d);
          }
        }
      });
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionConfig& config,
                            const AttentionParams& params, const AttentionCall& call) {
  config.validate();
  if (x_q.rank() != 2 || x_kv.rank() != 2 || x_q.cols() != config.model_dim || x_kv.cols() != config.model_dim) {
    throw DimensionError("multi_head_attention: inputs " + shape_string(x_q.shape()) + " / " +
                         shape_string(x_kv.shape()) + " do not have model_dim " + std::to_string(config.model_dim));
  }
  const RelPosTable* table = config.mode == PeMode::relative ? call.table : nullptr;
  if (config.mode == PeMode::relative && table == nullptr) {
    throw ContractError("multi_head_attention: relative mode needs a position table");
  }
  const std::size_t nq = x_q.rows(), nk = x_kv.rows(), hd = config.head_dim();
  const Tensor q = linear(x_q, params.wq, params.bq);
  const Tensor k = linear(x_kv, params.wk, params.bk);
  const Tensor v = linear(x_kv, params.wv, params.bv);
  const bool drop = call.training && config.attn_dropout > 0.0;
  if (drop && call.rng == nullptr) throw ContractError("multi_head_attention: attention dropout needs an rng");

  std::vector<Tensor> heads;
  heads.reserve(config.num_heads);
  for (std::size_t h = 0; h < config.num_heads; ++h) {
    const Tensor qh = config.num_heads == 1 ? q : block(q, 0, nq, h * hd, hd);
    const Tensor kh = config.num_heads == 1 ? k : block(k, 0, nk, h * hd, hd);
    const Tensor vh = config.num_heads == 1 ? v : block(v, 0, nk, h * hd, hd);
    const Tensor scores = rel_attention_scores(qh, kh, table, config.clip_k, call.mask, call.pos_q, call.pos_k);
    Tensor weights = softmax(scores, 1);
    if (drop) weights = dropout(weights, config.attn_dropout, *call.rng, true);
    heads.push_back(rel_attention_values(weights, vh, table, config.clip_k, call.pos_q, call.pos_k));
  }
  const Tensor merged = heads.size() == 1 ? heads[0] : concat_cols(heads);
  return linear(merged, params.wo, params.bo);
}

}  // namespace ntrr::attention
