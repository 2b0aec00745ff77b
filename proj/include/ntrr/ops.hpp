#pragma once

// Differentiable operations over ntrr::Tensor. Matrix ops expect rank-2
// tensors laid out as [rows, cols]; vectors are rank-1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ntrr/rng.hpp"
#include "ntrr/tensor.hpp"

namespace ntrr {

enum class Reduction { mean, sum };

/// Clamp applied to probabilities inside logarithms of the KL divergence.
inline constexpr double kKlEpsilon = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[r, c] + bias[c]
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x * W + b, with W stored [in, out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor exp(const Tensor& x);
/// Exact GELU: x * Phi(x).
Tensor gelu(const Tensor& x);
/// Row-wise normalisation over the last axis of a matrix.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Softmax along `axis`. Max-subtracted; a slice whose entries are all -inf
/// yields zeros.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Log-softmax along the last axis of a matrix.
Tensor log_softmax(const Tensor& x);

/// Negative log-likelihood of `targets` under row-wise log-probabilities.
/// `row_mask` (optional, one entry per row) excludes rows with value 0.
Tensor cross_entropy(const Tensor& log_probs, std::span<const int> targets, Reduction reduction = Reduction::mean,
                     std::span<const std::uint8_t> row_mask = {});

/// Row-wise KL(p || q) = sum p ln(p/q), both clamped below by kKlEpsilon
/// inside the log, reduced over (unmasked) rows. A single distribution may be
/// given as a vector.
Tensor kl_divergence(const Tensor& p, const Tensor& q, Reduction reduction = Reduction::mean,
                     std::span<const std::uint8_t> row_mask = {});

/// Inverted dropout. Identity when `training` is false or drop_prob == 0.
Tensor dropout(const Tensor& x, double drop_prob, Rng& rng, bool training = true);

/// Rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Sub-matrix [row0, row0+nrows) x [col0, col0+ncols).
Tensor block(const Tensor& x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace ntrr
