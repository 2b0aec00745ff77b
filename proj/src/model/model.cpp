#include "ntrr/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ntrr/error.hpp"
#include "ntrr/init.hpp"
#include "ntrr/ops.hpp"

namespace ntrr::model {
namespace {

using attention::AttentionMask;
using attention::EncoderLayerParams;
using attention::RelPosTable;

constexpr double kEmbeddingStd = 0.02;

int effective_clip(const ModelConfig& config, const ForwardContext& ctx) {
  return ctx.clip_k > 0 ? ctx.clip_k : config.final_clip_k();
}

void check_memory(const SegmentMemory* memory, const ModelConfig& config, bool need_transformer) {
  if (memory == nullptr || memory->rows == 0) return;
  if (memory->xlnet.size() != config.xlnet_layers ||
      (need_transformer && memory->transformer.size() != config.transformer_layers)) {
    throw ContractError("segment memory has " + std::to_string(memory->xlnet.size()) + "+" +
                        std::to_string(memory->transformer.size()) + " layers, config expects " +
                        std::to_string(config.xlnet_layers) + "+" + std::to_string(config.transformer_layers));
  }
  for (const auto* stack : {&memory->xlnet, &memory->transformer}) {
    for (const Tensor& t : *stack) {
      if (t.shape() != Shape{memory->rows, config.model_dim}) {
        throw ContractError("segment memory layer has shape " + shape_string(t.shape()));
      }
    }
  }
}

/// Last `keep` rows of [old ; current], detached.
Tensor roll_memory(const Tensor* old, const Tensor& current, std::size_t keep) {
  const std::size_t dim = current.cols();
  std::vector<double> rows;
  if (old != nullptr && old->defined()) rows.assign(old->values().begin(), old->values().end());
  rows.insert(rows.end(), current.values().begin(), current.values().end());
  const std::size_t total = rows.size() / dim;
  const std::size_t start = total - keep;
  return Tensor::from({keep, dim}, std::vector<double>(rows.begin() + static_cast<std::ptrdiff_t>(start * dim), rows.end()));
}

struct StackRun {
  Tensor out;
  std::vector<Tensor> memory;
};

StackRun run_stack(Tensor x, std::span<const EncoderLayerParams> layers, const RelPosTable* table,
                   const std::vector<Tensor>* memory, std::size_t mem_rows, Position first,
                   const ModelConfig& config, const ForwardContext& ctx) {
  const std::size_t n = x.rows();
  const auto att = config.attention(effective_clip(config, ctx));
  const auto pos_q = attention::position_range(first, n);
  const auto pos_k = attention::position_range(first - static_cast<Position>(mem_rows), mem_rows + n);
  std::optional<AttentionMask> mask;
  if (config.causal) mask = AttentionMask::causal(n, mem_rows);

  const std::size_t keep = std::min(config.memory_len, mem_rows + n);
  StackRun run;
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const Tensor* old = mem_rows > 0 ? &(*memory)[m] : nullptr;
    if (keep > 0) run.memory.push_back(roll_memory(old, x, keep));
    Tensor kv = x;
    if (old != nullptr) {
      const Tensor parts[] = {*old, x};
      kv = concat_rows(parts);
    }
    attention::BlockCall call;
    call.attention.table = table;
    call.attention.mask = mask ? &*mask : nullptr;
    call.attention.pos_q = pos_q;
    call.attention.pos_k = pos_k;
    call.attention.rng = ctx.rng;
    call.attention.training = ctx.training;
    call.dropout = config.dropout;
    x = attention::encoder_block(x, kv, att, layers[m], call);
  }
  run.out = std::move(x);
  return run;
}

Tensor embed(std::span<const int> token_ids, Position first, const ModelConfig& config, const ModelParams& params,
             const ForwardContext& ctx) {
  Tensor x = embedding(params.embedding, token_ids);
  if (config.pe_mode == PeMode::absolute) x = add(x, attention::sinusoidal_pe(token_ids.size(), config.model_dim, first));
  if (ctx.training && config.dropout > 0.0) {
    if (ctx.rng == nullptr) throw ContractError("training forward needs an rng");
    x = dropout(x, config.dropout, *ctx.rng, true);
  }
  return x;
}

Tensor trainable_zeros(std::size_t n) { return Tensor::zeros({n}, true); }

}  // namespace

int ModelConfig::table_radius() const { return std::max({clip_k, clip_k_start, clip_k_end, 1}); }

int ModelConfig::final_clip_k() const { return clip_k_end > 0 ? clip_k_end : clip_k; }

int ModelConfig::clip_k_for_epoch(std::size_t epoch, std::size_t epochs) const {
  if (clip_k_start <= 0 || clip_k_end <= 0) return clip_k;
  if (epochs <= 1) return clip_k_end;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return static_cast<int>(std::lround(clip_k_start + t * (clip_k_end - clip_k_start)));
}

attention::AttentionConfig ModelConfig::attention(int clip) const {
  attention::AttentionConfig a;
  a.model_dim = model_dim;
  a.num_heads = num_heads;
  a.clip_k = clip;
  a.mode = pe_mode;
  a.attn_dropout = attn_dropout;
  return a;
}

void ModelConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (model_dim == 0 || ffn_dim == 0 || num_heads == 0) throw ConfigError("model dimensions must be positive");
  if (xlnet_layers + transformer_layers == 0) throw ConfigError("the model needs at least one layer");
  if (pe_mode == PeMode::absolute && model_dim % 2 != 0) throw ConfigError("absolute encodings need an even model_dim");
  if (clip_k < 1) throw ConfigError("clip_k must be >= 1");
  if ((clip_k_start > 0) != (clip_k_end > 0)) throw ConfigError("clip_k_start and clip_k_end must be set together");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  attention(clip_k).validate();
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, Rng::stream_id(StreamPurpose::init));
  const std::size_t d = config.model_dim;
  const std::size_t head_dim = d / config.num_heads;
  ModelParams p;
  p.embedding = normal_init({config.vocab_size, d}, kEmbeddingStd, rng);
  p.query_init = normal_init({1, d}, kEmbeddingStd, rng);
  for (std::size_t i = 0; i < config.xlnet_layers; ++i) p.xlnet.push_back(EncoderLayerParams::init(d, config.ffn_dim, rng));
  for (std::size_t i = 0; i < config.transformer_layers; ++i)
    p.transformer.push_back(EncoderLayerParams::init(d, config.ffn_dim, rng));
  const std::size_t table_rows = static_cast<std::size_t>(2 * config.table_radius() + 1);
  if (config.pe_mode == PeMode::relative) {
    if (config.xlnet_layers > 0) {
      p.xlnet_rel = RelPosTable{normal_init({table_rows, head_dim}, kEmbeddingStd, rng),
                                normal_init({table_rows, head_dim}, kEmbeddingStd, rng), config.table_radius()};
    }
    if (config.transformer_layers > 0) {
      p.transformer_rel = RelPosTable{normal_init({table_rows, head_dim}, kEmbeddingStd, rng),
                                      normal_init({table_rows, head_dim}, kEmbeddingStd, rng), config.table_radius()};
    }
  }
  const std::size_t num_labels = config.labels.size();
  p.final_norm = attention::LayerNormParams::identity(d);
  p.classifier_w = xavier_uniform(d, num_labels, rng);
  p.classifier_b = trainable_zeros(num_labels);
  p.lm_norm = attention::LayerNormParams::identity(d);
  p.lm_w = xavier_uniform(d, config.vocab_size, rng);
  p.lm_b = trainable_zeros(config.vocab_size);
  return p;
}

std::vector<NamedTensor> ModelParams::named() const {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", embedding});
  out.push_back({"query_init", query_init});
  for (std::size_t i = 0; i < xlnet.size(); ++i) xlnet[i].collect("xlnet." + std::to_string(i), out);
  if (xlnet_rel) {
    out.push_back({"xlnet_rel.key", xlnet_rel->key});
    out.push_back({"xlnet_rel.value", xlnet_rel->value});
  }
  for (std::size_t i = 0; i < transformer.size(); ++i) transformer[i].collect("transformer." + std::to_string(i), out);
  if (transformer_rel) {
    out.push_back({"transformer_rel.key", transformer_rel->key});
    out.push_back({"transformer_rel.value", transformer_rel->value});
  }
  out.push_back({"final_norm.gain", final_norm.gain});
  out.push_back({"final_norm.bias", final_norm.bias});
  out.push_back({"classifier.w", classifier_w});
  out.push_back({"classifier.b", classifier_b});
  out.push_back({"lm_norm.gain", lm_norm.gain});
  out.push_back({"lm_norm.bias", lm_norm.bias});
  out.push_back({"lm_head.w", lm_w});
  out.push_back({"lm_head.b", lm_b});
  return out;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& nt : named()) n += nt.tensor.size();
  return n;
}

ModelParams ModelParams::from_named(const ModelConfig& config, std::span<const NamedTensor> tensors) {
  ModelParams p = init(config, 0);
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : tensors) {
    if (!by_name.emplace(nt.name, &nt.tensor).second) throw ContractError("duplicate parameter '" + nt.name + "'");
  }
  const auto expected = p.named();
  if (by_name.size() != expected.size()) {
    throw ContractError("expected " + std::to_string(expected.size()) + " parameter tensors, found " +
                        std::to_string(by_name.size()));
  }
  for (NamedTensor nt : expected) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end()) throw ContractError("missing parameter '" + nt.name + "'");
    if (it->second->shape() != nt.tensor.shape()) {
      throw ContractError("parameter '" + nt.name + "' has shape " + shape_string(it->second->shape()) +
                          ", expected " + shape_string(nt.tensor.shape()));
    }
    auto dst = nt.tensor.mutable_values();
    std::copy(it->second->values().begin(), it->second->values().end(), dst.begin());
  }
  return p;
}

std::size_t ModelParams::copy_matching(std::span<const NamedTensor> source) {
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : source) by_name.emplace(nt.name, &nt.tensor);
  std::size_t copied = 0;
  for (NamedTensor nt : named()) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end() || it->second->shape() != nt.tensor.shape()) continue;
    auto dst = nt.tensor.mutable_values();
    std::copy(it->second->values().begin(), it->second->values().end(), dst.begin());
    ++copied;
  }
  return copied;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;
  auto fresh = [](Tensor& t) { t = Tensor::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), true); };
  fresh(copy.embedding);
  fresh(copy.query_init);
  for (auto* stack : {&copy.xlnet, &copy.transformer}) {
    for (auto& layer : *stack) {
      for (Tensor* t : {&layer.norm1.gain, &layer.norm1.bias, &layer.attn.wq, &layer.attn.bq, &layer.attn.wk,
                        &layer.attn.bk, &layer.attn.wv, &layer.attn.bv, &layer.attn.wo, &layer.attn.bo,
                        &layer.norm2.gain, &layer.norm2.bias, &layer.w1, &layer.b1, &layer.w2, &layer.b2}) {
        fresh(*t);
      }
    }
  }
  for (auto* table : {&copy.xlnet_rel, &copy.transformer_rel}) {
    if (*table) {
      fresh((*table)->key);
      fresh((*table)->value);
    }
  }
  for (Tensor* t : {&copy.final_norm.gain, &copy.final_norm.bias, &copy.classifier_w, &copy.classifier_b,
                    &copy.lm_norm.gain, &copy.lm_norm.bias, &copy.lm_w, &copy.lm_b}) {
    fresh(*t);
  }
  return copy;
}

EncodeResult encode(std::span<const int> token_ids, const SegmentMemory* memory, const ModelConfig& config,
                    const ModelParams& params, const ForwardContext& ctx) {
  if (token_ids.empty()) throw ContractError("encode: empty token sequence");
  check_memory(memory, config, false);
  const std::size_t mem_rows = memory != nullptr ? memory->rows : 0;
  const Position first = memory != nullptr ? memory->next_position : 0;
  const Tensor x = embed(token_ids, first, config, params, ctx);
  const RelPosTable* table = params.xlnet_rel ? &*params.xlnet_rel : nullptr;
  StackRun run = run_stack(x, params.xlnet, table, mem_rows > 0 ? &memory->xlnet : nullptr, mem_rows, first, config, ctx);
  EncodeResult result;
  result.hidden = std::move(run.out);
  result.memory.next_position = first + static_cast<Position>(token_ids.size());
  result.memory.xlnet = std::move(run.memory);
  result.memory.rows = result.memory.xlnet.empty() ? 0 : result.memory.xlnet.front().rows();
  return result;
}

PretrainResult pretrain_forward(std::span<const int> token_ids, const plm::PermutationPlan& plan,
                                const SegmentMemory* memory, const ModelConfig& config, const ModelParams& params,
                                const ForwardContext& ctx) {
  const std::size_t n = token_ids.size();
  if (n == 0) throw ContractError("pretrain_forward: empty token sequence");
  if (plan.order.size() != n) {
    throw ContractError("pretrain_forward: plan built for " + std::to_string(plan.order.size()) + " tokens, got " +
                        std::to_string(n));
  }
  if (config.xlnet_layers == 0) throw ConfigError("pretraining needs at least one XLNet layer");
  check_memory(memory, config, false);
  const std::size_t mem_rows = memory != nullptr ? memory->rows : 0;
  const Position first = memory != nullptr ? memory->next_position : 0;

  Tensor h = embed(token_ids, first, config, params, ctx);
  const std::vector<std::size_t> broadcast(n, 0);
  Tensor g = gather_rows(params.query_init, broadcast);
  if (config.pe_mode == PeMode::absolute) g = add(g, attention::sinusoidal_pe(n, config.model_dim, first));
  if (ctx.training && config.dropout > 0.0) g = dropout(g, config.dropout, *ctx.rng, true);

  const auto att = config.attention(effective_clip(config, ctx));
  const auto pos_q = attention::position_range(first, n);
  const auto pos_k = attention::position_range(first - static_cast<Position>(mem_rows), mem_rows + n);
  const std::size_t keep = std::min(config.memory_len, mem_rows + n);
  PretrainResult result;
  for (std::size_t m = 0; m < config.xlnet_layers; ++m) {
    plm::TwoStreamCall call;
    call.table = params.xlnet_rel ? &*params.xlnet_rel : nullptr;
    if (mem_rows > 0) call.memory = memory->xlnet[m];
    call.pos_current = pos_q;
    call.pos_keys = pos_k;
    call.dropout = config.dropout;
    call.rng = ctx.rng;
    call.training = ctx.training;
    if (keep > 0) result.memory.xlnet.push_back(roll_memory(mem_rows > 0 ? &memory->xlnet[m] : nullptr, h, keep));
    auto out = plm::two_stream_layer(h, g, plan, att, params.xlnet[m], call);
    h = std::move(out.h);
    g = std::move(out.g);
  }
  result.memory.next_position = first + static_cast<Position>(n);
  result.memory.rows = keep;
  result.loss = plm::plm_loss(layer_norm(g, params.lm_norm.gain, params.lm_norm.bias), plan.targets, params.lm_w,
                              params.lm_b, token_ids);
  return result;
}

Tensor classify(const Tensor& hidden, const ModelParams& params) {
  const Tensor normed = layer_norm(hidden, params.final_norm.gain, params.final_norm.bias);
  return log_softmax(linear(normed, params.classifier_w, params.classifier_b));
}

NerResult forward_ner(std::span<const int> token_ids, const SegmentMemory* memory, const ModelConfig& config,
                      const ModelParams& params, const ForwardContext& ctx) {
  check_memory(memory, config, true);
  EncodeResult enc = encode(token_ids, memory, config, params, ctx);
  const std::size_t mem_rows = memory != nullptr ? memory->rows : 0;
  const Position first = memory != nullptr ? memory->next_position : 0;
  const RelPosTable* table = params.transformer_rel ? &*params.transformer_rel : nullptr;
  StackRun run = run_stack(enc.hidden, params.transformer, table, mem_rows > 0 ? &memory->transformer : nullptr,
                           mem_rows, first, config, ctx);
  NerResult result;
  result.log_probs = classify(run.out, params);
  result.memory = std::move(enc.memory);
  result.memory.transformer = std::move(run.memory);
  if (result.memory.rows == 0 && !result.memory.transformer.empty()) result.memory.rows = result.memory.transformer.front().rows();
  return result;
}

Tensor forward_sequence(std::span<const int> token_ids, const ModelConfig& config, const ModelParams& params,
                        const ForwardContext& ctx) {
  const std::size_t n = token_ids.size();
  if (config.segment_len == 0 || n <= config.segment_len) return forward_ner(token_ids, nullptr, config, params, ctx).log_probs;
  std::vector<Tensor> parts;
  SegmentMemory memory;
  for (std::size_t start = 0; start < n; start += config.segment_len) {
    const std::size_t len = std::min(config.segment_len, n - start);
    NerResult r = forward_ner(token_ids.subspan(start, len), &memory, config, params, ctx);
    parts.push_back(std::move(r.log_probs));
    memory = std::move(r.memory);
  }
  return concat_rows(parts);
}

tagging::TagSequence decode(const Tensor& log_probs, const tagging::LabelSet& labels, DecodeMode mode) {
  if (log_probs.rank() != 2 || log_probs.cols() != labels.size()) {
    throw DimensionError("decode: scores " + shape_string(log_probs.shape()) + " for " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = log_probs.rows(), c = log_probs.cols();
  const auto lp = log_probs.values();
  std::vector<int> tags(n, 0);
  if (mode == DecodeMode::greedy) {
    for (std::size_t t = 0; t < n; ++t) {
      const double* row = lp.data() + t * c;
      tags[t] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    return tagging::make_tag_sequence(labels, std::move(tags));
  }

  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> score(n * c, kNone);
  std::vector<int> back(n * c, -1);
  for (std::size_t j = 0; j < c; ++j) {
    if (labels.allowed_transition(-1, static_cast<int>(j))) score[j] = lp[j];
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < c; ++j) {
      double best = kNone;
      int arg = -1;
      for (std::size_t i = 0; i < c; ++i) {
        const double s = score[(t - 1) * c + i];
        if (s == kNone || !labels.allowed_transition(static_cast<int>(i), static_cast<int>(j))) continue;
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      if (arg >= 0) {
        score[t * c + j] = best + lp[t * c + j];
        back[t * c + j] = arg;
      }
    }
  }
  double best = kNone;
  int last = 0;
  for (std::size_t j = 0; j < c; ++j) {
    const double s = score[(n - 1) * c + j];
    if (s != kNone && labels.allowed_end(static_cast<int>(j)) && s > best) {
      best = s;
      last = static_cast<int>(j);
    }
  }
  for (std::size_t t = n; t-- > 0;) {
    tags[t] = last;
    if (t > 0) last = back[t * c + static_cast<std::size_t>(last)];
  }
  return tagging::make_tag_sequence(labels, std::move(tags));
}

std::string to_string(DecodeMode mode) { return mode == DecodeMode::greedy ? "greedy" : "constrained"; }
std::string to_string(PeMode mode) { return mode == PeMode::absolute ? "absolute" : "relative"; }

}  // namespace ntrr::model
