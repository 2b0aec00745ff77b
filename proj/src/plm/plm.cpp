#include "ntrr/plm.hpp"

#include <algorithm>

#include "ntrr/error.hpp"
#include "ntrr/ops.hpp"

namespace ntrr::plm {

std::size_t target_count(std::size_t n) { return (n * kTargetPercent + 99) / 100; }

std::pair<AttentionMask, AttentionMask> build_masks(std::span<const std::size_t> order) {
  const std::size_t n = order.size();
  if (n == 0) throw ContractError("build_masks: empty order");
  std::vector<std::size_t> rank(n, n);
  for (std::size_t t = 0; t < n; ++t) {
    if (order[t] >= n || rank[order[t]] != n) throw ContractError("build_masks: order is not a permutation");
    rank[order[t]] = t;
  }
  AttentionMask query(n, n, false);
  AttentionMask content(n, n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      query.set(i, j, rank[j] < rank[i]);
      content.set(i, j, rank[j] <= rank[i]);
    }
  }
  return {std::move(query), std::move(content)};
}

PermutationPlan plan_from_order(std::vector<std::size_t> order) {
  PermutationPlan plan;
  auto [query, content] = build_masks(order);
  const std::size_t n = order.size();
  plan.rank.resize(n);
  for (std::size_t t = 0; t < n; ++t) plan.rank[order[t]] = t;
  plan.targets.assign(order.end() - static_cast<std::ptrdiff_t>(target_count(n)), order.end());
  std::sort(plan.targets.begin(), plan.targets.end());
  plan.order = std::move(order);
  plan.query_mask = std::move(query);
  plan.content_mask = std::move(content);
  return plan;
}

PermutationPlan sample_permutation(std::size_t n, Rng& rng) {
  if (n == 0) throw ContractError("sample_permutation: n must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  return plan_from_order(std::move(order));
}

TwoStreamOutput two_stream_layer(const Tensor& h_prev, const Tensor& g_prev, const PermutationPlan& plan,
                                 const attention::AttentionConfig& config,
                                 const attention::EncoderLayerParams& params, const TwoStreamCall& call) {
  const std::size_t n = plan.order.size();
  if (h_prev.rank() != 2 || h_prev.shape() != g_prev.shape() || h_prev.rows() != n) {
    throw DimensionError("two_stream_layer: streams " + shape_string(h_prev.shape()) + " / " +
                         shape_string(g_prev.shape()) + " do not match a plan of length " + std::to_string(n));
  }
  const std::size_t mem_rows = call.memory.defined() ? call.memory.rows() : 0;
  Tensor kv = h_prev;
  AttentionMask query_mask = plan.query_mask;
  AttentionMask content_mask = plan.content_mask;
  if (mem_rows > 0) {
    const Tensor parts[] = {call.memory, h_prev};
    kv = concat_rows(parts);
    query_mask = query_mask.with_memory(mem_rows);
    content_mask = content_mask.with_memory(mem_rows);
  }

  attention::BlockCall block_call;
  block_call.attention.table = call.table;
  block_call.attention.pos_q = call.pos_current;
  block_call.attention.pos_k = call.pos_keys;
  block_call.attention.rng = call.rng;
  block_call.attention.training = call.training;
  block_call.dropout = call.dropout;

  block_call.attention.mask = &query_mask;
  Tensor g = attention::encoder_block(g_prev, kv, config, params, block_call);
  block_call.attention.mask = &content_mask;
  Tensor h = attention::encoder_block(h_prev, kv, config, params, block_call);
  return {std::move(h), std::move(g)};
}

Tensor plm_loss(const Tensor& g_final, std::span<const std::size_t> targets, const Tensor& head_weight,
                const Tensor& head_bias, std::span<const int> token_ids) {
  if (targets.empty()) throw ContractError("plm_loss: no prediction targets");
  if (g_final.rank() != 2 || token_ids.size() != g_final.rows()) {
    throw DimensionError("plm_loss: query stream " + shape_string(g_final.shape()) + " for " +
                         std::to_string(token_ids.size()) + " tokens");
  }
  std::vector<int> labels;
  labels.reserve(targets.size());
  for (std::size_t t : targets) {
    if (t >= token_ids.size()) throw IndexError("plm_loss: target " + std::to_string(t) + " out of range");
    labels.push_back(token_ids[t]);
  }
  const Tensor logits = linear(gather_rows(g_final, targets), head_weight, head_bias);
  return cross_entropy(log_softmax(logits), labels);
}

}  // namespace ntrr::plm
