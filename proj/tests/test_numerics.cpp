#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ntrr/error.hpp"
#include "ntrr/gradcheck.hpp"
#include "ntrr/init.hpp"
#include "ntrr/ops.hpp"
#include "ntrr/rng.hpp"
#include "test_util.hpp"

using namespace ntrr;
using test::grad_error;
using test::kGradTolerance;
using test::random_tensor;

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensor::from({2, 0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor::matrix({{1, 2}, {3}}), DimensionError);
  CHECK(shape_string({2, 3}) == "[2x3]");
}

TEST_CASE("backward accumulates until zeroed") {
  const Tensor x = Tensor::scalar(2.0, true);
  const Tensor y = Tensor::scalar(3.0, true);
  mul(x, y).backward();
  CHECK(x.grad()[0] == 3.0);
  CHECK(y.grad()[0] == 2.0);
  mul(x, y).backward();
  CHECK(x.grad()[0] == 6.0);
  Tensor xx = x;
  xx.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward needs a scalar") {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(scale(x, 2.0).backward(), ContractError);
}

TEST_CASE("shared subexpressions receive the sum of both paths") {
  const Tensor x = Tensor::scalar(1.5, true);
  const Tensor y = mul(x, x);
  add(y, y).backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("only leaves may be mutated") {
  const Tensor x = Tensor::scalar(1.0, true);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(y.mutable_values(), ContractError);
}

TEST_CASE("detach drops history") {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  const Tensor d = scale(x, 3.0).detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(d.values()[1] == 6.0);
}

TEST_CASE("matmul examples") {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(test::max_abs_diff(matmul(eye, a).values(), a.values()) == 0.0);
  const Tensor sel = Tensor::matrix({{1, 0}, {0, 0}});
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  const Tensor r = matmul(sel, b);
  CHECK(r.at(0, 0) == 5);
  CHECK(r.at(0, 1) == 6);
  CHECK(r.at(1, 0) == 0);
  CHECK(r.at(1, 1) == 0);
}

TEST_CASE("matmul matches a triple loop") {
  Rng rng(3, Rng::stream_id(StreamPurpose::test, 3));
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(c.at(i, j) - s) <= 1e-12);
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  const Tensor s0 = softmax(Tensor::from({2}, {0, 0}), 0);
  CHECK(s0.at(0) == doctest::Approx(0.5));
  const Tensor s1 = softmax(Tensor::from({2}, {1000, 1000}), 0);
  CHECK(s1.at(0) == doctest::Approx(0.5));
  CHECK(s1.at(1) == doctest::Approx(0.5));
  const Tensor s2 = softmax(Tensor::from({2}, {0, std::log(3.0)}), 0);
  CHECK(s2.at(0) == doctest::Approx(0.25));
  CHECK(s2.at(1) == doctest::Approx(0.75));
}

TEST_CASE("softmax rows sum to one and ignore constant shifts") {
  Rng rng(4, Rng::stream_id(StreamPurpose::test, 4));
  for (int t = 0; t < 50; ++t) {
    const Tensor x = random_tensor({3, 5}, rng, 5.0, false);
    const Tensor shifted = add(x, Tensor::full({3, 5}, 17.25));
    const Tensor a = softmax(x, 1), b = softmax(shifted, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 5; ++c) s += a.at(r, c);
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK(test::max_abs_diff(a.values(), b.values()) <= 1e-12);
  }
}

TEST_CASE("softmax of an all -inf row is zeros") {
  const double ninf = -std::numeric_limits<double>::infinity();
  const Tensor x = Tensor::from({2, 2}, {ninf, ninf, 0.0, 0.0});
  const Tensor s = softmax(x, 1);
  CHECK(s.at(0, 0) == 0.0);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("cross entropy examples") {
  const Tensor perfect = Tensor::from({1, 2}, {0.0, -std::numeric_limits<double>::infinity()});
  const std::vector<int> zero{0};
  CHECK(cross_entropy(perfect, zero).item() == 0.0);
  const Tensor uniform = log_softmax(Tensor::zeros({1, 4}));
  CHECK(cross_entropy(uniform, zero).item() == doctest::Approx(1.3862943611198906).epsilon(1e-12));
  const Tensor p = Tensor::from({1, 2}, {std::log(0.6), std::log(0.4)});
  CHECK(cross_entropy(p, zero).item() == doctest::Approx(0.5108256237659907).epsilon(1e-12));
  const std::vector<int> bad{2};
  CHECK_THROWS_AS(cross_entropy(p, bad), IndexError);
}

TEST_CASE("cross entropy sum, mean and row mask") {
  const Tensor lp = log_softmax(Tensor::matrix({{1, 2}, {0, 0}, {3, -1}}));
  const std::vector<int> t{1, 0, 0};
  const double a = -lp.at(0, 1), b = -lp.at(1, 0), c = -lp.at(2, 0);
  CHECK(cross_entropy(lp, t, Reduction::sum).item() == doctest::Approx(a + b + c));
  CHECK(cross_entropy(lp, t, Reduction::mean).item() == doctest::Approx((a + b + c) / 3));
  const std::vector<std::uint8_t> mask{1, 0, 1};
  CHECK(cross_entropy(lp, t, Reduction::mean, mask).item() == doctest::Approx((a + c) / 2));
}

TEST_CASE("softmax plus cross entropy gradient is p - onehot") {
  const Tensor logits = Tensor::matrix({{0.3, -1.2, 2.0}}, true);
  const std::vector<int> t{1};
  cross_entropy(log_softmax(logits), t).backward();
  const Tensor p = softmax(logits.detach(), 1);
  for (std::size_t j = 0; j < 3; ++j) CHECK(logits.grad()[j] == doctest::Approx(p.at(0, j) - (j == 1 ? 1.0 : 0.0)));
}

TEST_CASE("kl divergence examples against high-precision values") {
  const Tensor p = Tensor::from({2}, {0.6, 0.4}), q = Tensor::from({2}, {0.5, 0.5});
  CHECK(kl_divergence(p, p).item() == 0.0);
  CHECK(std::abs(kl_divergence(p, q).item() - 0.020135513550688873) <= 1e-15);
  CHECK(std::abs(kl_divergence(q, p).item() - 0.020410997260127565) <= 1e-15);
}

TEST_CASE("kl divergence is non-negative on random distributions") {
  Rng rng(5, Rng::stream_id(StreamPurpose::test, 5));
  for (int t = 0; t < 200; ++t) {
    const Tensor p = softmax(random_tensor({2, 4}, rng, 3.0, false), 1);
    const Tensor q = softmax(random_tensor({2, 4}, rng, 3.0, false), 1);
    CHECK(kl_divergence(p, q).item() >= -1e-12);
  }
}

TEST_CASE("kl divergence rejects non-distributions in debug mode") {
  const bool saved = debug_checks();
  set_debug_checks(true);
  const Tensor p = Tensor::from({2}, {0.7, 0.7}), q = Tensor::from({2}, {0.5, 0.5});
  CHECK_THROWS_AS(kl_divergence(p, q), ContractError);
  set_debug_checks(saved);
}

TEST_CASE("debug checks catch NaN") {
  const bool saved = debug_checks();
  set_debug_checks(true);
  const Tensor x = Tensor::from({1}, {-1.0});
  CHECK_THROWS_AS(mul(x, Tensor::from({1}, {std::nan("")})), NumericError);
  set_debug_checks(saved);
}

TEST_CASE("dropout contract") {
  Rng rng(6, 1);
  const Tensor x = Tensor::from({4}, {1, 2, 3, 4});
  CHECK(dropout(x, 0.0, rng).same_as(x));
  CHECK(dropout(x, 0.5, rng, false).same_as(x));
  CHECK_THROWS_AS(dropout(x, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(dropout(x, -0.1, rng), ConfigError);

  Rng r1(9, 77), r2(9, 77);
  const Tensor big = Tensor::full({256}, 1.0);
  CHECK(test::max_abs_diff(dropout(big, 0.3, r1).values(), dropout(big, 0.3, r2).values()) == 0.0);
}

TEST_CASE("dropout preserves the mean over many samples") {
  Rng rng(10, Rng::stream_id(StreamPurpose::test, 10));
  const Tensor x = random_tensor({100000}, rng, 1.0, false);
  const Tensor shifted = add(x, Tensor::full({100000}, 2.0));
  const double in_mean = mean(shifted).item();
  const double out_mean = mean(dropout(shifted, 0.15, rng)).item();
  CHECK(std::abs(out_mean - in_mean) / in_mean <= 0.02);
}

TEST_CASE("layer norm, gelu and linear examples") {
  const Tensor row = Tensor::full({1, 4}, 3.0);
  const Tensor ln = layer_norm(row, Tensor::full({4}, 1.0), Tensor::zeros({4}));
  for (double v : ln.values()) CHECK(v == 0.0);
  CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(gelu(Tensor::scalar(1.0)).item() == doctest::Approx(0.8413447460685429));
  const Tensor x = Tensor::matrix({{1, -2}, {3, 0.5}});
  const Tensor y = linear(x, Tensor::matrix({{1, 0}, {0, 1}}), Tensor::zeros({2}));
  CHECK(test::max_abs_diff(y.values(), x.values()) == 0.0);
}

TEST_CASE("finite differences of x^2 give 2x") {
  Tensor x = Tensor::from({3}, {-1.5, 0.25, 2.0}, true);
  std::vector<Tensor> params{x};
  const auto g = finite_diff_grad([&] { return sum(mul(x, x)).item(); }, params);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[0][i] == doctest::Approx(2.0 * x.at(i)).epsilon(1e-9));
}

TEST_CASE("relative error uses the floor") {
  const std::vector<double> a{0.0, 1.0}, n{1e-12, 1.0 + 1e-6};
  CHECK(max_relative_error(a, n) == doctest::Approx(1e-6).epsilon(1e-3));
}

// Every differentiable op against finite differences over 100 seeds.
TEST_CASE("op gradients match finite differences") {
  double worst = 0.0;
  std::string worst_op;
  auto track = [&](const char* op, double e) {
    if (e > worst) {
      worst = e;
      worst_op = op;
    }
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed, Rng::stream_id(StreamPurpose::test, 11));
    const std::size_t m = 1 + rng.below(3), k = 1 + rng.below(4), n = 1 + rng.below(4);
    const Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), bt = random_tensor({n, k}, rng);
    const Tensor c = random_tensor({m, k}, rng), bias = random_tensor({k}, rng);
    const Tensor gain = random_tensor({k}, rng);
    track("matmul", grad_error([&] { return matmul(a, b); }, {a, b}, seed));
    track("matmul_nt", grad_error([&] { return matmul_nt(a, bt); }, {a, bt}, seed));
    track("transpose", grad_error([&] { return transpose(a); }, {a}, seed));
    track("add", grad_error([&] { return add(a, c); }, {a, c}, seed));
    track("sub", grad_error([&] { return sub(a, c); }, {a, c}, seed));
    track("mul", grad_error([&] { return mul(a, c); }, {a, c}, seed));
    track("scale", grad_error([&] { return scale(a, -1.7); }, {a}, seed));
    track("add_bias", grad_error([&] { return add_bias(a, bias); }, {a, bias}, seed));
    const Tensor bias_n = random_tensor({n}, rng);
    track("linear", grad_error([&] { return linear(a, b, bias_n); }, {a, b, bias_n}, seed));
    track("exp", grad_error([&] { return exp(a); }, {a}, seed));
    track("gelu", grad_error([&] { return gelu(scale(a, 3.0)); }, {a}, seed));
    if (k > 1) track("layer_norm", grad_error([&] { return layer_norm(a, gain, bias); }, {a, gain, bias}, seed));
    track("softmax_rows", grad_error([&] { return softmax(a, 1); }, {a}, seed));
    track("softmax_cols", grad_error([&] { return softmax(a, 0); }, {a}, seed));
    track("log_softmax", grad_error([&] { return log_softmax(a); }, {a}, seed));
    std::vector<int> targets(m);
    for (int& t : targets) t = static_cast<int>(rng.below(k));
    track("cross_entropy", grad_error([&] { return cross_entropy(log_softmax(a), targets); }, {a}, seed));
    track("kl", grad_error([&] { return kl_divergence(softmax(a, 1), softmax(c, 1)); }, {a, c}, seed));
    track("dropout", grad_error(
                         [&] {
                           Rng r(seed, 5);
                           return dropout(a, 0.3, r);
                         },
                         {a}, seed));
    const Tensor table = random_tensor({5, k}, rng);
    const std::vector<int> ids{static_cast<int>(rng.below(5)), 2, 2};
    track("embedding", grad_error([&] { return embedding(table, ids); }, {table}, seed));
    const std::vector<std::size_t> rows{0, m - 1, 0};
    track("gather_rows", grad_error([&] { return gather_rows(a, rows); }, {a}, seed));
    track("block", grad_error([&] { return block(a, m - 1, 1, 0, k); }, {a}, seed));
    track("concat_rows", grad_error(
                             [&] {
                               const Tensor parts[] = {a, c};
                               return concat_rows(parts);
                             },
                             {a, c}, seed));
    track("concat_cols", grad_error(
                             [&] {
                               const Tensor parts[] = {a, c};
                               return concat_cols(parts);
                             },
                             {a, c}, seed));
    track("sum", grad_error([&] { return sum(a); }, {a}, seed));
    track("mean", grad_error([&] { return mean(a); }, {a}, seed));
  }
  INFO("worst op: " << worst_op);
  CHECK(worst <= kGradTolerance);
}

TEST_CASE("rng known answers") {
  const std::uint64_t s = Rng::stream_id(StreamPurpose::dropout, 3, 1, 5);
  CHECK(s == 0x96bada9ea3c9ccfaULL);
  Rng rng(42, s);
  CHECK(rng.next_u64() == 0x738048e078618a5eULL);
  CHECK(rng.next_u64() == 0x8295929ee1777437ULL);
  CHECK(rng.next_u64() == 0xbecbfb7a17d561a1ULL);
  Rng zero(0, 0);
  CHECK(zero.next_u64() == 0x1da8817b03b983f9ULL);
}

TEST_CASE("rng streams are distinct and draws stay in range") {
  Rng a(1, Rng::stream_id(StreamPurpose::dropout, 1, 1)), b(1, Rng::stream_id(StreamPurpose::dropout, 1, 2));
  CHECK(a.next_u64() != b.next_u64());
  Rng rng(2, 3);
  std::vector<int> hist(7, 0);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0 && u < 1.0);
    ++hist[rng.below(7)];
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
  CHECK(std::abs(s / 70000) < 0.02);
  CHECK(std::abs(s2 / 70000 - 1.0) < 0.03);
  CHECK_THROWS_AS(rng.below(0), ContractError);
}

TEST_CASE("initialisers") {
  Rng rng(3, 4);
  const Tensor w = xavier_uniform(6, 10, rng);
  CHECK(w.shape() == Shape{6, 10});
  const double bound = std::sqrt(6.0 / 16.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
  CHECK(w.requires_grad());
  const Tensor e = normal_init({2000}, 0.02, rng);
  double s2 = 0.0;
  for (double v : e.values()) s2 += v * v;
  CHECK(std::sqrt(s2 / 2000) == doctest::Approx(0.02).epsilon(0.1));
}
