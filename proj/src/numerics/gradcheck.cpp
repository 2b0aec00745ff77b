#include "ntrr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ntrr/error.hpp"

namespace ntrr {

std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f, std::span<Tensor> params,
                                                  double step) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (Tensor& p : params) {
    auto values = p.mutable_values();
    std::vector<double> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        return f();
      };
      // Fourth-order central stencil.
      const double d = 8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step));
      values[i] = saved;
      g[i] = d / (12.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw DimensionError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const GroupError& g : groups) w = std::max(w, g.max_rel_error);
  return w;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::span<NamedTensor> params, double step,
                                bool group_by_prefix) {
  for (NamedTensor& p : params) p.tensor.zero_grad();
  loss_fn().backward();

  std::vector<Tensor> tensors;
  tensors.reserve(params.size());
  for (NamedTensor& p : params) tensors.push_back(p.tensor);
  const auto numeric = finite_diff_grad([&] { return loss_fn().item(); }, tensors, step);

  GradCheckReport report;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::string group = params[i].name;
    if (group_by_prefix) group = group.substr(0, group.find('.'));
    auto [it, inserted] = index.try_emplace(group, report.groups.size());
    if (inserted) report.groups.push_back({group, 0, 0.0});
    GroupError& g = report.groups[it->second];
    g.count += params[i].tensor.size();
    g.max_rel_error = std::max(g.max_rel_error, max_relative_error(params[i].tensor.grad(), numeric[i]));
  }
  return report;
}

}  // namespace ntrr
