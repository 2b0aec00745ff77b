#pragma once

// Pre-norm Transformer encoder layer shared by the XLNet-style stack and the
// relative-position Transformer stack:
//
//   a   = x + Dropout(MHA(LN1(x), LN1(kv)))
//   out = a + Dropout(W2 GELU(W1 LN2(a) + b1) + b2)
//
// `kv` is the raw (un-normalised) key/value source, already concatenated with
// any cached memory rows by the caller.

#include <string>
#include <vector>

#include "ntrr/attention.hpp"
#include "ntrr/gradcheck.hpp"
#include "ntrr/rng.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr::attention {

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
  static LayerNormParams identity(std::size_t dim);
};

struct EncoderLayerParams {
  LayerNormParams norm1;
  AttentionParams attn;
  LayerNormParams norm2;
  Tensor w1, b1, w2, b2;

  /// Xavier-uniform projections, zero biases, unit gains.
  static EncoderLayerParams init(std::size_t model_dim, std::size_t ffn_dim, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
  static std::size_t parameter_count(std::size_t model_dim, std::size_t ffn_dim);
};

struct BlockCall {
  AttentionCall attention;
  double dropout = 0.0;  // residual-branch dropout
};

Tensor encoder_block(const Tensor& x, const Tensor& kv, const AttentionConfig& config,
                     const EncoderLayerParams& params, const BlockCall& call);

}  // namespace ntrr::attention
