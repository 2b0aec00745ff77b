#include "ntrr/rng.hpp"

#include <cmath>
#include <numbers>

#include "ntrr/error.hpp"

namespace ntrr {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

std::uint64_t Rng::stream_id(StreamPurpose purpose, std::uint64_t step, std::uint64_t branch, std::uint64_t index) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(purpose));
  h = mix64(h ^ step);
  h = mix64(h ^ branch);
  return mix64(h ^ index);
}

std::uint64_t Rng::next_u64() {
  // Two rounds over (key, counter): a keyed bijection of the counter.
  const std::uint64_t c = counter_++;
  return mix64(mix64(c ^ key_) + key_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ContractError("Rng::below needs a positive bound");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = ~0ULL - (~0ULL % bound);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ntrr

#include "ntrr/init.hpp"

namespace ntrr {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = (2.0 * rng.uniform() - 1.0) * a;
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace ntrr
