#include <cmath>

#include "ntrr/error.hpp"
#include "ntrr/ops.hpp"
#include "ntrr/training.hpp"

namespace ntrr::training {

RDropLossBreakdown rdrop_loss(const Tensor& log_probs_1, const Tensor& log_probs_2, std::span<const int> targets,
                              double alpha, std::span<const std::uint8_t> token_mask, bool kl_half) {
  if (log_probs_1.shape() != log_probs_2.shape()) {
    throw DimensionError("rdrop_loss: branch shapes " + shape_string(log_probs_1.shape()) + " and " +
                         shape_string(log_probs_2.shape()) + " differ");
  }
  if (!(alpha >= 0.0)) throw ConfigError("rdrop_loss: alpha must be non-negative");
  RDropLossBreakdown out;
  out.alpha = alpha;
  out.p1 = exp(log_probs_1);
  out.p2 = exp(log_probs_2);
  out.ce = add(cross_entropy(log_probs_1, targets, Reduction::mean, token_mask),
               cross_entropy(log_probs_2, targets, Reduction::mean, token_mask));
  out.kl_sym = add(kl_divergence(out.p1, out.p2, Reduction::mean, token_mask),
                   kl_divergence(out.p2, out.p1, Reduction::mean, token_mask));
  if (kl_half) out.kl_sym = scale(out.kl_sym, 0.5);
  out.total = alpha == 0.0 ? out.ce : add(out.ce, scale(out.kl_sym, alpha));
  return out;
}

}  // namespace ntrr::training
