#include "ntrr/encoder_block.hpp"

#include "ntrr/error.hpp"
#include "ntrr/init.hpp"
#include "ntrr/ops.hpp"

namespace ntrr::attention {

LayerNormParams LayerNormParams::identity(std::size_t dim) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

EncoderLayerParams EncoderLayerParams::init(std::size_t d, std::size_t f, Rng& rng) {
  EncoderLayerParams p;
  p.norm1 = LayerNormParams::identity(d);
  p.attn.wq = xavier_uniform(d, d, rng);
  p.attn.bq = Tensor::zeros({d}, true);
  p.attn.wk = xavier_uniform(d, d, rng);
  p.attn.bk = Tensor::zeros({d}, true);
  p.attn.wv = xavier_uniform(d, d, rng);
  p.attn.bv = Tensor::zeros({d}, true);
  p.attn.wo = xavier_uniform(d, d, rng);
  p.attn.bo = Tensor::zeros({d}, true);
  p.norm2 = LayerNormParams::identity(d);
  p.w1 = xavier_uniform(d, f, rng);
  p.b1 = Tensor::zeros({f}, true);
  p.w2 = xavier_uniform(f, d, rng);
  p.b2 = Tensor::zeros({d}, true);
  return p;
}

void EncoderLayerParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".norm1.gain", norm1.gain});
  out.push_back({prefix + ".norm1.bias", norm1.bias});
  out.push_back({prefix + ".attn.wq", attn.wq});
  out.push_back({prefix + ".attn.bq", attn.bq});
  out.push_back({prefix + ".attn.wk", attn.wk});
  out.push_back({prefix + ".attn.bk", attn.bk});
  out.push_back({prefix + ".attn.wv", attn.wv});
  out.push_back({prefix + ".attn.bv", attn.bv});
  out.push_back({prefix + ".attn.wo", attn.wo});
  out.push_back({prefix + ".attn.bo", attn.bo});
  out.push_back({prefix + ".norm2.gain", norm2.gain});
  out.push_back({prefix + ".norm2.bias", norm2.bias});
  out.push_back({prefix + ".ffn.w1", w1});
  out.push_back({prefix + ".ffn.b1", b1});
  out.push_back({prefix + ".ffn.w2", w2});
  out.push_back({prefix + ".ffn.b2", b2});
}

std::size_t EncoderLayerParams::parameter_count(std::size_t d, std::size_t f) {
  return 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
}

Tensor encoder_block(const Tensor& x, const Tensor& kv, const AttentionConfig& config,
                     const EncoderLayerParams& params, const BlockCall& call) {
  const bool training = call.attention.training && call.dropout > 0.0;
  if (training && call.attention.rng == nullptr) throw ContractError("encoder_block: dropout needs an rng");

  const Tensor xq = layer_norm(x, params.norm1.gain, params.norm1.bias);
  const Tensor xkv = kv.same_as(x) ? xq : layer_norm(kv, params.norm1.gain, params.norm1.bias);
  Tensor attn = multi_head_attention(xq, xkv, config, params.attn, call.attention);
  if (training) attn = dropout(attn, call.dropout, *call.attention.rng, true);
  const Tensor mid = add(x, attn);

  const Tensor hidden = gelu(linear(layer_norm(mid, params.norm2.gain, params.norm2.bias), params.w1, params.b1));
  Tensor ffn = linear(hidden, params.w2, params.b2);
  if (training) ffn = dropout(ffn, call.dropout, *call.attention.rng, true);
  return add(mid, ffn);
}

}  // namespace ntrr::attention
