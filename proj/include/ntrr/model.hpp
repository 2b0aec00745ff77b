#pragma once

// XLNet-Transformer-R network: token embedding, an XLNet-style encoder stack
// with segment-recurrence memory (two-stream during permutation pretraining,
// content stream only when tagging), a relative-position Transformer stack on
// top, and a per-token tag classifier.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntrr/attention.hpp"
#include "ntrr/encoder_block.hpp"
#include "ntrr/gradcheck.hpp"
#include "ntrr/plm.hpp"
#include "ntrr/rng.hpp"
#include "ntrr/tagging.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr::model {

using attention::PeMode;
using attention::Position;

enum class DecodeMode { greedy, constrained };

struct ModelConfig {
  std::size_t vocab_size = 0;  // bound to the vocabulary at training time
  std::size_t model_dim = 64;
  std::size_t ffn_dim = 256;
  std::size_t xlnet_layers = 2;
  std::size_t transformer_layers = 2;
  std::size_t num_heads = 4;
  int clip_k = 8;
  // Optional linear clip-distance schedule over epochs; both 0 = fixed clip_k.
  int clip_k_start = 0;
  int clip_k_end = 0;
  PeMode pe_mode = PeMode::relative;
  std::size_t memory_len = 0;
  std::size_t segment_len = 0;  // 0 = whole sentence is one segment
  bool causal = false;          // causal self-attention in every layer
  double dropout = 0.15;
  double attn_dropout = 0.0;
  DecodeMode decode = DecodeMode::constrained;
  tagging::LabelSet labels;

  /// Rows of the relative tables are allocated for this radius.
  int table_radius() const;
  /// Clip distance used at inference (end of the schedule, if any).
  int final_clip_k() const;
  /// Clip distance for a 0-based epoch out of `epochs`.
  int clip_k_for_epoch(std::size_t epoch, std::size_t epochs) const;
  attention::AttentionConfig attention(int clip) const;
  void validate() const;
};

struct ModelParams {
  Tensor embedding;    // [vocab, dim]
  Tensor query_init;   // [1, dim], initial query stream
  std::vector<attention::EncoderLayerParams> xlnet;
  std::vector<attention::EncoderLayerParams> transformer;
  std::optional<attention::RelPosTable> xlnet_rel;        // relative mode only
  std::optional<attention::RelPosTable> transformer_rel;  // relative mode with transformer layers
  attention::LayerNormParams final_norm;
  Tensor classifier_w, classifier_b;  // [dim, labels], [labels]
  attention::LayerNormParams lm_norm;
  Tensor lm_w, lm_b;  // [dim, vocab], [vocab]

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  /// Every trainable tensor exactly once, in a stable order.
  std::vector<NamedTensor> named() const;
  std::vector<Tensor> tensors() const;
  std::size_t parameter_count() const;
  /// Rebuilds parameters from named tensors (checkpoint load). Throws
  /// ContractError on missing or mis-shaped entries.
  static ModelParams from_named(const ModelConfig& config, std::span<const NamedTensor> tensors);
  /// Copies values of same-named, same-shaped tensors from `source`; returns
  /// the number copied.
  std::size_t copy_matching(std::span<const NamedTensor> source);
  ModelParams clone() const;
};

/// Cached per-layer inputs of the previous segment. Never part of the graph.
struct SegmentMemory {
  Position next_position = 0;  // global position of the next segment's first token
  std::size_t rows = 0;
  std::vector<Tensor> xlnet;        // one [rows, dim] tensor per XLNet layer
  std::vector<Tensor> transformer;  // one per Transformer layer
};

struct ForwardContext {
  Rng* rng = nullptr;
  bool training = false;
  int clip_k = 0;  // 0: config.final_clip_k()
};

struct EncodeResult {
  Tensor hidden;
  SegmentMemory memory;
};

/// XLNet stack, content stream only, over [memory ; current].
EncodeResult encode(std::span<const int> token_ids, const SegmentMemory* memory, const ModelConfig& config,
                    const ModelParams& params, const ForwardContext& ctx);

struct PretrainResult {
  Tensor loss;
  SegmentMemory memory;
};

PretrainResult pretrain_forward(std::span<const int> token_ids, const plm::PermutationPlan& plan,
                                const SegmentMemory* memory, const ModelConfig& config, const ModelParams& params,
                                const ForwardContext& ctx);

/// Final norm, linear head and log-softmax over the label set.
Tensor classify(const Tensor& hidden, const ModelParams& params);

struct NerResult {
  Tensor log_probs;  // [tokens, labels]
  SegmentMemory memory;
};

NerResult forward_ner(std::span<const int> token_ids, const SegmentMemory* memory, const ModelConfig& config,
                      const ModelParams& params, const ForwardContext& ctx);

/// Whole sentence, split into segment_len chunks linked by memory when
/// segment_len > 0. Returns log-probabilities for every token.
Tensor forward_sequence(std::span<const int> token_ids, const ModelConfig& config, const ModelParams& params,
                        const ForwardContext& ctx);

/// Greedy: per-token argmax. Constrained: best-scoring path among sequences
/// with legal BMES transitions (Viterbi, ties to the lower tag index).
tagging::TagSequence decode(const Tensor& log_probs, const tagging::LabelSet& labels, DecodeMode mode);

std::string to_string(DecodeMode mode);
std::string to_string(PeMode mode);

}  // namespace ntrr::model
