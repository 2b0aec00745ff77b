#include <algorithm>
#include <cmath>

#include "ntrr/error.hpp"
#include "ntrr/training.hpp"

namespace ntrr::training {

double lr_schedule(std::size_t step, double lr_init, std::size_t warmup_steps) {
  if (step == 0) throw ContractError("lr_schedule: steps are 1-based");
  if (warmup_steps == 0) return lr_init;
  const double s = static_cast<double>(step), w = static_cast<double>(warmup_steps);
  return lr_init * std::min(s / w, std::sqrt(w / s));
}

std::size_t effective_warmup(const TrainConfig& config, std::size_t total_steps) {
  if (config.warmup_steps > 0) return config.warmup_steps;
  return std::max<std::size_t>(1, (total_steps + 5) / 10);
}

AdamState AdamState::for_params(std::span<const Tensor> params, const TrainConfig& config) {
  AdamState s;
  s.beta1 = config.adam_beta1;
  s.beta2 = config.adam_beta2;
  s.eps = config.adam_eps;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimiser state holds " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) throw DimensionError("adam_step: moment shape does not match parameter");
    if (!p.has_grad()) {
      // A zero gradient still decays the moments.
      for (std::size_t j = 0; j < m.size(); ++j) {
        m[j] *= state.beta1;
        v[j] *= state.beta2;
      }
    }
    const auto g = p.grad();
    auto w = p.mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (p.has_grad()) {
        m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
        v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      }
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace ntrr::training
