#pragma once

#include <cstddef>

#include "ntrr/rng.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr {

/// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); trainable.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// N(0, stddev^2) entries; trainable.
Tensor normal_init(Shape shape, double stddev, Rng& rng);

}  // namespace ntrr
