#pragma once

// R-Drop objective, optimiser, learning-rate schedule and the training loop.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ntrr/data_io.hpp"
#include "ntrr/model.hpp"
#include "ntrr/tagging.hpp"
#include "ntrr/tensor.hpp"
#include "ntrr/train_config.hpp"

namespace ntrr::training {

struct RDropLossBreakdown {
  Tensor ce;      // CE(branch 1) + CE(branch 2), token means
  Tensor kl_sym;  // KL(p1||p2) + KL(p2||p1), token mean; halved with kl_half
  double alpha = 1.0;
  Tensor total;   // ce + alpha * kl_sym
  Tensor p1, p2;  // branch distributions
};

/// Both branches [tokens, labels] log-probabilities. `token_mask` (optional)
/// excludes padding rows.
RDropLossBreakdown rdrop_loss(const Tensor& log_probs_1, const Tensor& log_probs_2, std::span<const int> targets,
                              double alpha, std::span<const std::uint8_t> token_mask = {}, bool kl_half = false);

/// Linear warm-up to lr_init, then inverse square-root decay. step >= 1.
double lr_schedule(std::size_t step, double lr_init, std::size_t warmup_steps);
/// Warm-up length implied by a config: warmup_steps, or 10% of total_steps.
std::size_t effective_warmup(const TrainConfig& config, std::size_t total_steps);

struct AdamState {
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m, v;

  static AdamState for_params(std::span<const Tensor> params, const TrainConfig& config);
};

/// Bias-corrected Adam update from each parameter's accumulated gradient.
/// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

/// Scales gradients so their global L2 norm is at most max_norm (0 disables).
/// Returns the norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

/// Log-probabilities of every row of `batch`, stacked [tokens, labels].
/// Row r draws its dropout masks from stream (seed, step, branches[r], indices[r]).
Tensor forward_rows(const data::Batch& batch, std::span<const int> branches, std::span<const std::size_t> indices,
                    const model::ModelConfig& model_config, const model::ModelParams& params, std::uint64_t seed,
                    std::size_t step, bool training, int clip_k);

struct StepOptions {
  std::size_t step = 1;   // 1-based optimiser step
  double lr = 0.0;
  int clip_k = 0;         // 0: final clip distance
  bool apply_update = true;  // false: loss only, gradients untouched
};

/// Forward (duplicated batch or two forwards), R-Drop loss, backward,
/// gradient clip and Adam update. Throws NumericError on a non-finite loss.
RDropLossBreakdown train_step(const data::Batch& batch, model::ModelParams& params, AdamState& state,
                              const model::ModelConfig& model_config, const TrainConfig& config,
                              const StepOptions& options);

struct EvalResult {
  tagging::PrfReport prf;
  std::size_t repairs = 0;  // ill-formed predicted spans dropped before scoring
  std::vector<std::vector<std::string>> predictions;
};

/// Deterministic decoding and entity-level scoring. Throws ContractError when
/// the corpus uses entity types unknown to the model's label set.
EvalResult evaluate(const data::Corpus& corpus, const data::Vocab& vocab, const model::ModelParams& params,
                    const model::ModelConfig& model_config, int clip_k = 0);

/// Tags for one token sequence.
std::vector<std::string> predict_tags(std::span<const std::string> tokens, const data::Vocab& vocab,
                                      const model::ModelParams& params, const model::ModelConfig& model_config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  int clip_k = 0;
  double mean_ce = 0.0;
  double mean_kl = 0.0;
  double mean_total = 0.0;
  tagging::Score dev;
  std::size_t repairs = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  model::ModelParams best_params;
};

/// Epoch loop: seeded shuffle, one train_step per batch, dev evaluation after
/// every epoch, best-F1 parameter snapshot. `dev` empty evaluates on `train`.
/// Log lines go to `log` when non-null.
TrainReport train(const data::Corpus& train_set, const data::Corpus& dev_set, const data::Vocab& vocab,
                  const model::ModelConfig& model_config, const TrainConfig& config, model::ModelParams& params,
                  std::ostream* log);

struct PretrainReport {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Permutation language-model training of the embedding, XLNet stack and LM
/// head.
PretrainReport pretrain(const data::Corpus& corpus, const data::Vocab& vocab, const model::ModelConfig& model_config,
                        const TrainConfig& config, model::ModelParams& params, std::ostream* log);

/// Header written before the step lines of a log.
std::string log_header();

}  // namespace ntrr::training
