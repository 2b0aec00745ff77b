#pragma once

// Multi-head self-attention with either absolute sinusoidal position
// encodings (added to the inputs by the caller) or clipped relative position
// encodings inside the score and value computations:
//
//   score(i, l) = q_i . (k_l + aK[clip(l - i, k)]) / sqrt(d)
//   out_i       = sum_l w(i, l) (v_l + aV[clip(l - i, k)])
//
// Positions are global token indices, so keys taken from a cached memory
// segment get their true (negative) displacements.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ntrr/rng.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr::attention {

using Position = std::int64_t;

enum class PeMode { absolute, relative };

struct AttentionConfig {
  std::size_t model_dim = 64;
  std::size_t num_heads = 4;
  int clip_k = 8;
  PeMode mode = PeMode::relative;
  double attn_dropout = 0.0;

  std::size_t head_dim() const { return model_dim / num_heads; }
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// max(-k, min(k, displacement)); k >= 1.
int clip_rel(Position displacement, int k);

/// Learned relative-position embeddings. Row r holds displacement r - radius.
/// `radius` may exceed the clip distance in use (the clip can be scheduled).
struct RelPosTable {
  Tensor key;
  Tensor value;
  int radius = 0;

  static RelPosTable zeros(int radius, std::size_t head_dim, bool requires_grad = false);
  std::size_t row(Position displacement, int clip_k) const;
};

/// Interleaved sine/cosine table: pe[p, 2j] = sin(p / 10000^(2j/d)),
/// pe[p, 2j+1] = cos(...), for p = first_position .. first_position+length-1.
Tensor sinusoidal_pe(std::size_t length, std::size_t model_dim, Position first_position = 0);

/// Boolean attention mask, true = the query row may attend to the key column.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t rows, std::size_t cols, bool fill);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool value) { bits_[r * cols_ + c] = value ? 1 : 0; }
  /// Prepends `memory_cols` always-visible key columns.
  AttentionMask with_memory(std::size_t memory_cols) const;
  /// Causal mask over [memory ; current] keys: query i sees memory and
  /// current keys 0..i.
  static AttentionMask causal(std::size_t rows, std::size_t memory_cols);

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Scaled scores [nq, nk]. Without a table this is q k^T / sqrt(d). Masked
/// entries are -inf.
Tensor rel_attention_scores(const Tensor& q, const Tensor& k, const RelPosTable* table, int clip_k,
                            const AttentionMask* mask, std::span<const Position> pos_q,
                            std::span<const Position> pos_k);

/// Weighted value sum [nq, d], with the aV term when a table is given.
Tensor rel_attention_values(const Tensor& weights, const Tensor& v, const RelPosTable* table, int clip_k,
                            std::span<const Position> pos_q, std::span<const Position> pos_k);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttentionCall {
  const RelPosTable* table = nullptr;  // required in relative mode
  const AttentionMask* mask = nullptr;  // nullptr: all keys visible
  std::span<const Position> pos_q;
  std::span<const Position> pos_k;
  Rng* rng = nullptr;  // attention-weight dropout; required when training with attn_dropout > 0
  bool training = false;
};

/// Projections, per-head scoring (relative or vanilla per config.mode),
/// softmax, optional weight dropout, value aggregation, head concat, output
/// projection. Fully masked query rows produce zero head outputs.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionConfig& config,
                            const AttentionParams& params, const AttentionCall& call);

/// Contiguous positions first .. first+count-1.
std::vector<Position> position_range(Position first, std::size_t count);

}  // namespace ntrr::attention
