#pragma once

// Permutation language modelling: factorisation-order sampling, the
// query/content attention masks derived from an order, prediction targets,
// and the two-stream attention layer.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ntrr/attention.hpp"
#include "ntrr/encoder_block.hpp"
#include "ntrr/rng.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr::plm {

using attention::AttentionMask;

/// Fraction of each factorisation order (its tail) that is predicted.
inline constexpr std::size_t kTargetPercent = 15;

/// ceil(0.15 * n), computed in integers.
std::size_t target_count(std::size_t n);

struct PermutationPlan {
  std::vector<std::size_t> order;    // order[t] = token at step t
  std::vector<std::size_t> rank;     // rank[token] = step at which it appears
  std::vector<std::size_t> targets;  // tokens with the largest ranks, ascending token index
  AttentionMask query_mask;          // [i][j] iff rank[j] <  rank[i]
  AttentionMask content_mask;        // [i][j] iff rank[j] <= rank[i]
};

/// Throws ContractError unless `order` is a permutation of 0..n-1.
std::pair<AttentionMask, AttentionMask> build_masks(std::span<const std::size_t> order);
PermutationPlan plan_from_order(std::vector<std::size_t> order);
/// Uniform Fisher-Yates order; n >= 1.
PermutationPlan sample_permutation(std::size_t n, Rng& rng);

struct TwoStreamOutput {
  Tensor h;  // content stream
  Tensor g;  // query stream
};

struct TwoStreamCall {
  const attention::RelPosTable* table = nullptr;
  /// Detached hidden states of the previous segment for this layer (may be
  /// undefined). Visible to both streams.
  Tensor memory;
  std::span<const attention::Position> pos_current;
  std::span<const attention::Position> pos_keys;  // memory positions followed by pos_current
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool training = false;
};

/// g' = Block(Q = g, KV = [mem ; h], query mask);  h' = Block(Q = h, KV = [mem ; h], content mask).
/// Both streams share `params`.
TwoStreamOutput two_stream_layer(const Tensor& h_prev, const Tensor& g_prev, const PermutationPlan& plan,
                                 const attention::AttentionConfig& config,
                                 const attention::EncoderLayerParams& params, const TwoStreamCall& call);

/// Mean cross-entropy of the target tokens' identities predicted from their
/// query-stream states through a linear vocabulary head ([dim, vocab] weight).
Tensor plm_loss(const Tensor& g_final, std::span<const std::size_t> targets, const Tensor& head_weight,
                const Tensor& head_bias, std::span<const int> token_ids);

}  // namespace ntrr::plm
