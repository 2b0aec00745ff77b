#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ntrr/error.hpp"
#include "ntrr/ops.hpp"
#include "ntrr/training.hpp"

namespace ntrr::training {
namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(8) << v;
  return os.str();
}

std::vector<int> stacked_targets(const data::Batch& batch) {
  std::vector<int> out;
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    const auto t = batch.tags(r);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

void check_labels(const data::Corpus& corpus, const tagging::LabelSet& labels) {
  const auto& known = labels.entity_types();
  for (const auto& type : corpus.entity_types()) {
    if (std::find(known.begin(), known.end(), type) == known.end()) {
      throw ContractError("label-set mismatch: entity type '" + type + "' is not in the model's label set");
    }
  }
}

void check_finite(const RDropLossBreakdown& loss, std::size_t step, double lr) {
  const double total = loss.total.item();
  if (std::isfinite(total)) return;
  throw NumericError("non-finite loss at step " + std::to_string(step) + ": ce=" + format_number(loss.ce.item()) +
                     " kl=" + format_number(loss.kl_sym.item()) + " total=" + format_number(total) +
                     " lr=" + format_number(lr));
}

}  // namespace

std::string log_header() { return "# step\tlr\tce\tkl\ttotal"; }

Tensor forward_rows(const data::Batch& batch, std::span<const int> branches, std::span<const std::size_t> indices,
                    const model::ModelConfig& model_config, const model::ModelParams& params, std::uint64_t seed,
                    std::size_t step, bool training, int clip_k) {
  if (branches.size() != batch.batch_size || indices.size() != batch.batch_size) {
    throw ContractError("forward_rows: one branch and index per batch row expected");
  }
  std::vector<Tensor> parts;
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    if (batch.lengths[r] == 0) continue;
    Rng rng(seed, Rng::stream_id(StreamPurpose::dropout, step, static_cast<std::uint64_t>(branches[r]), indices[r]));
    model::ForwardContext ctx{&rng, training, clip_k};
    parts.push_back(model::forward_sequence(batch.tokens(r), model_config, params, ctx));
  }
  if (parts.empty()) throw ContractError("forward_rows: batch has no tokens");
  return parts.size() == 1 ? parts[0] : concat_rows(parts);
}

RDropLossBreakdown train_step(const data::Batch& batch, model::ModelParams& params, AdamState& state,
                              const model::ModelConfig& model_config, const TrainConfig& config,
                              const StepOptions& options) {
  std::vector<Tensor> tensors = params.tensors();
  if (options.apply_update)
    for (Tensor& t : tensors) t.zero_grad();
  const std::vector<int> targets = stacked_targets(batch);
  const std::size_t b = batch.batch_size;

  RDropLossBreakdown loss;
  if (!config.rdrop_enabled) {
    std::vector<int> branches(b, 1);
    std::vector<std::size_t> indices(b);
    for (std::size_t r = 0; r < b; ++r) indices[r] = r;
    const Tensor lp = forward_rows(batch, branches, indices, model_config, params, config.seed, options.step, true,
                                   options.clip_k);
    loss.alpha = 0.0;
    loss.ce = cross_entropy(lp, targets);
    loss.kl_sym = Tensor::scalar(0.0);
    loss.total = loss.ce;
    loss.p1 = exp(lp);
    loss.p2 = loss.p1;
  } else if (config.rdrop_duplicate) {
    const data::Batch doubled = batch.duplicated();
    std::vector<int> branches(2 * b);
    std::vector<std::size_t> indices(2 * b);
    for (std::size_t j = 0; j < 2 * b; ++j) {
      branches[j] = j < b ? 1 : 2;
      indices[j] = j % b;
    }
    const Tensor lp = forward_rows(doubled, branches, indices, model_config, params, config.seed, options.step, true,
                                   options.clip_k);
    const std::size_t tokens = targets.size(), c = lp.cols();
    loss = rdrop_loss(block(lp, 0, tokens, 0, c), block(lp, tokens, tokens, 0, c), targets, config.alpha, {},
                      config.kl_half);
  } else {
    std::vector<std::size_t> indices(b);
    for (std::size_t r = 0; r < b; ++r) indices[r] = r;
    const std::vector<int> ones(b, 1), twos(b, 2);
    const Tensor lp1 = forward_rows(batch, ones, indices, model_config, params, config.seed, options.step, true,
                                    options.clip_k);
    const Tensor lp2 = forward_rows(batch, twos, indices, model_config, params, config.seed, options.step, true,
                                    options.clip_k);
    loss = rdrop_loss(lp1, lp2, targets, config.alpha, {}, config.kl_half);
  }
  check_finite(loss, options.step, options.lr);
  if (!options.apply_update) return loss;
  loss.total.backward();
  clip_grad_norm(tensors, config.grad_clip_norm);
  adam_step(tensors, state, options.lr);
  return loss;
}

std::vector<std::string> predict_tags(std::span<const std::string> tokens, const data::Vocab& vocab,
                                      const model::ModelParams& params, const model::ModelConfig& model_config) {
  if (tokens.empty()) return {};
  const std::vector<int> ids = vocab.encode(tokens);
  model::ForwardContext ctx;
  const Tensor lp = model::forward_sequence(ids, model_config, params, ctx);
  const auto seq = model::decode(lp, model_config.labels, model_config.decode);
  std::vector<std::string> out;
  out.reserve(seq.tags.size());
  for (int t : seq.tags) out.push_back(model_config.labels.name(t));
  return out;
}

EvalResult evaluate(const data::Corpus& corpus, const data::Vocab& vocab, const model::ModelParams& params,
                    const model::ModelConfig& model_config, int clip_k) {
  check_labels(corpus, model_config.labels);
  const auto& labels = model_config.labels;
  EvalResult result;
  tagging::PrfAccumulator acc;
  for (const data::Sentence& s : corpus.sentences) {
    std::vector<int> pred_ids;
    if (!s.tokens.empty()) {
      model::ForwardContext ctx{nullptr, false, clip_k};
      const Tensor lp = model::forward_sequence(vocab.encode(s.tokens), model_config, params, ctx);
      pred_ids = model::decode(lp, labels, model_config.decode).tags;
    }
    const auto pred = tagging::extract_entities(labels, pred_ids);
    const auto gold = tagging::extract_entities(s.tags);
    acc.add(pred.entities, gold.entities);
    result.repairs += pred.repairs;
    std::vector<std::string> names;
    for (int t : pred_ids) names.push_back(labels.name(t));
    result.predictions.push_back(std::move(names));
  }
  result.prf = acc.report();
  return result;
}

TrainReport train(const data::Corpus& train_set, const data::Corpus& dev_set, const data::Vocab& vocab,
                  const model::ModelConfig& model_config, const TrainConfig& config, model::ModelParams& params,
                  std::ostream* log) {
  if (train_set.sentences.empty()) throw ContractError("train: training set is empty");
  if (model_config.vocab_size != vocab.size()) {
    throw ConfigError("train: model vocab_size " + std::to_string(model_config.vocab_size) + " but vocabulary has " +
                      std::to_string(vocab.size()) + " entries");
  }
  model_config.validate();
  check_labels(train_set, model_config.labels);
  const data::Corpus& dev = dev_set.sentences.empty() ? train_set : dev_set;
  check_labels(dev, model_config.labels);

  const std::size_t per_epoch = (train_set.sentences.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.total_steps > 0 ? config.total_steps : per_epoch * config.epochs;
  const std::size_t warmup = effective_warmup(config, total_steps);
  std::vector<Tensor> tensors = params.tensors();
  AdamState state = AdamState::for_params(tensors, config);

  TrainReport report;
  report.best_params = params.clone();
  if (log) *log << log_header() << "\n";
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle(config.seed, Rng::stream_id(StreamPurpose::shuffle, epoch));
    const auto batches = data::make_batches(train_set, vocab, model_config.labels, config.batch_size, &shuffle);
    const int clip = model_config.clip_k_for_epoch(epoch, config.epochs);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.clip_k = clip;
    for (const data::Batch& batch : batches) {
      StepOptions opt;
      opt.step = ++report.steps;
      opt.lr = lr_schedule(opt.step, config.lr_init, warmup);
      opt.clip_k = clip;
      const auto loss = train_step(batch, params, state, model_config, config, opt);
      rec.mean_ce += loss.ce.item();
      rec.mean_kl += loss.kl_sym.item();
      rec.mean_total += loss.total.item();
      if (log) {
        *log << opt.step << '\t' << format_number(opt.lr) << '\t' << format_number(loss.ce.item()) << '\t'
             << format_number(loss.kl_sym.item()) << '\t' << format_number(loss.total.item()) << '\n';
      }
    }
    const double nb = static_cast<double>(batches.size());
    rec.mean_ce /= nb;
    rec.mean_kl /= nb;
    rec.mean_total /= nb;
    const EvalResult ev = evaluate(dev, vocab, params, model_config, clip);
    rec.dev = ev.prf.overall;
    rec.repairs = ev.repairs;
    if (log) {
      *log << "epoch\t" << rec.epoch << "\tclip_k\t" << rec.clip_k << "\tloss\t" << format_number(rec.mean_total)
           << "\tprecision\t" << format_number(rec.dev.precision) << "\trecall\t" << format_number(rec.dev.recall)
           << "\tf1\t" << format_number(rec.dev.f1) << "\trepairs\t" << rec.repairs << '\n';
      log->flush();
    }
    if (rec.dev.f1 > report.best_f1) {
      report.best_f1 = rec.dev.f1;
      report.best_epoch = rec.epoch;
      report.best_params = params.clone();
    }
    report.epochs.push_back(rec);
  }
  return report;
}

PretrainReport pretrain(const data::Corpus& corpus, const data::Vocab& vocab, const model::ModelConfig& model_config,
                        const TrainConfig& config, model::ModelParams& params, std::ostream* log) {
  if (corpus.sentences.empty()) throw ContractError("pretrain: corpus is empty");
  if (model_config.vocab_size != vocab.size()) throw ConfigError("pretrain: model vocab_size does not match vocabulary");
  model_config.validate();
  const std::size_t per_epoch = (corpus.sentences.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = per_epoch * config.pretrain_epochs;
  const std::size_t warmup = effective_warmup(config, total_steps);
  std::vector<Tensor> tensors = params.tensors();
  AdamState state = AdamState::for_params(tensors, config);
  PretrainReport report;
  if (log) *log << log_header() << "\n";
  for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    Rng shuffle(config.seed, Rng::stream_id(StreamPurpose::shuffle, epoch, 1));
    const auto batches = data::make_batches(corpus, vocab, model_config.labels, config.batch_size, &shuffle);
    double epoch_loss = 0.0;
    for (const data::Batch& batch : batches) {
      const std::size_t step = ++report.steps;
      const double lr = lr_schedule(step, config.lr_init, warmup);
      for (Tensor& t : tensors) t.zero_grad();
      std::vector<Tensor> losses;
      for (std::size_t r = 0; r < batch.batch_size; ++r) {
        const auto ids = batch.tokens(r);
        if (ids.empty()) continue;
        Rng drop(config.seed, Rng::stream_id(StreamPurpose::dropout, step, 0, r));
        Rng perm(config.seed, Rng::stream_id(StreamPurpose::permutation, step, 0, r));
        model::ForwardContext ctx{&drop, true, 0};
        const std::size_t seg = model_config.segment_len == 0 ? ids.size() : model_config.segment_len;
        model::SegmentMemory memory;
        for (std::size_t start = 0; start < ids.size(); start += seg) {
          const std::size_t len = std::min(seg, ids.size() - start);
          const auto plan = plm::sample_permutation(len, perm);
          auto res = model::pretrain_forward(ids.subspan(start, len), plan, start == 0 ? nullptr : &memory,
                                             model_config, params, ctx);
          losses.push_back(res.loss);
          memory = std::move(res.memory);
        }
      }
      Tensor loss = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) loss = add(loss, losses[i]);
      loss = scale(loss, 1.0 / static_cast<double>(losses.size()));
      if (!std::isfinite(loss.item())) {
        throw NumericError("non-finite pretraining loss at step " + std::to_string(step) +
                           ": loss=" + format_number(loss.item()) + " lr=" + format_number(lr));
      }
      loss.backward();
      clip_grad_norm(tensors, config.grad_clip_norm);
      adam_step(tensors, state, lr);
      epoch_loss += loss.item();
      if (log) {
        *log << step << '\t' << format_number(lr) << '\t' << format_number(loss.item()) << "\t0\t"
             << format_number(loss.item()) << '\n';
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
    if (log) *log << "epoch\t" << epoch + 1 << "\tplm_loss\t" << format_number(report.epoch_loss.back()) << '\n';
  }
  return report;
}

}  // namespace ntrr::training
