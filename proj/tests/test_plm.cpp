#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ntrr/error.hpp"
#include "ntrr/ops.hpp"
#include "ntrr/plm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ntrr;
using namespace ntrr::plm;
using attention::AttentionConfig;
using attention::EncoderLayerParams;
using attention::PeMode;
using attention::Position;
using attention::position_range;
using attention::RelPosTable;
using ntrr::test::max_abs_diff;
using ntrr::test::random_tensor;

namespace {

using oracle::precedes;

struct Fixture {
  AttentionConfig cfg{8, 2, 3, PeMode::relative, 0.0};
  EncoderLayerParams layer1, layer2;
  RelPosTable table;
  Tensor w_init;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed, Rng::stream_id(StreamPurpose::test, 41));
    layer1 = EncoderLayerParams::init(8, 16, rng);
    layer2 = EncoderLayerParams::init(8, 16, rng);
    table = RelPosTable{random_tensor({7, 4}, rng, 0.5), random_tensor({7, 4}, rng, 0.5), 3};
    w_init = random_tensor({1, 8}, rng, 1.0, false);
  }

  Tensor g0(std::size_t n) const {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.insert(v.end(), w_init.values().begin(), w_init.values().end());
    return Tensor::from({n, 8}, std::move(v));
  }
};

}  // namespace

TEST_CASE("target counts") {
  CHECK(target_count(20) == 3);
  CHECK(target_count(1) == 1);
  CHECK(target_count(6) == 1);
  CHECK(target_count(7) == 2);
  CHECK(target_count(100) == 15);
  for (std::size_t n = 1; n <= 200; ++n)
    CHECK(target_count(n) == static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(n) - 1e-9)));
}

TEST_CASE("single-token masks") {
  const auto [q, c] = build_masks(std::vector<std::size_t>{0});
  CHECK_FALSE(q.allowed(0, 0));
  CHECK(c.allowed(0, 0));
}

TEST_CASE("worked order of four tokens") {
  // Order 3, 2, 4, 1 in one-based token numbers.
  const PermutationPlan plan = plan_from_order({2, 1, 3, 0});
  for (std::size_t j = 0; j < 4; ++j) CHECK(plan.query_mask.allowed(0, j) == (j != 0));
  for (std::size_t j = 0; j < 4; ++j) CHECK_FALSE(plan.query_mask.allowed(2, j));
  CHECK(plan.query_mask.allowed(1, 2));
  CHECK_FALSE(plan.query_mask.allowed(1, 3));
  CHECK(plan.rank == std::vector<std::size_t>{3, 1, 0, 2});
  CHECK(plan.targets == std::vector<std::size_t>{0});
}

TEST_CASE("identity order gives causal masks") {
  std::vector<std::size_t> order(7);
  std::iota(order.begin(), order.end(), 0);
  const auto plan = plan_from_order(order);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(plan.query_mask.allowed(i, j) == (j < i));
      CHECK(plan.content_mask.allowed(i, j) == (j <= i));
    }
  CHECK(plan.targets == std::vector<std::size_t>{5, 6});
}

TEST_CASE("masks match precedence enumeration for every order up to six tokens") {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    do {
      const auto plan = plan_from_order(order);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          REQUIRE(plan.query_mask.allowed(i, j) == precedes(order, j, i));
          REQUIRE(plan.content_mask.allowed(i, j) == (precedes(order, j, i) || i == j));
        }
      std::vector<std::size_t> tail(order.end() - static_cast<std::ptrdiff_t>(target_count(n)), order.end());
      std::sort(tail.begin(), tail.end());
      REQUIRE(plan.targets == tail);
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("non-permutations are rejected") {
  CHECK_THROWS_AS(build_masks(std::vector<std::size_t>{0, 0, 1}), ContractError);
  CHECK_THROWS_AS(build_masks(std::vector<std::size_t>{0, 3}), ContractError);
  CHECK_THROWS_AS(build_masks(std::vector<std::size_t>{}), ContractError);
}

TEST_CASE("sampled orders are permutations and cover targets evenly") {
  Rng rng(5, Rng::stream_id(StreamPurpose::permutation, 1));
  const std::size_t n = 10, trials = 3000;
  std::vector<std::size_t> hits(n, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto plan = sample_permutation(n, rng);
    std::vector<std::size_t> sorted = plan.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) REQUIRE(sorted[i] == i);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(plan.order[plan.rank[i]] == i);
    REQUIRE(plan.targets.size() == target_count(n));
    for (std::size_t tok : plan.targets) ++hits[tok];
  }
  const double p = static_cast<double>(target_count(n)) / static_cast<double>(n);
  const double mean = p * trials, sigma = std::sqrt(trials * p * (1.0 - p));
  // Ten per-cell 3-sigma checks would false-alarm about 3% of the time, so
  // the joint check is a chi-square at p = 0.001 (9 dof) with a 4-sigma cell bound.
  double chi2 = 0.0;
  for (std::size_t h : hits) {
    const double dev = static_cast<double>(h) - mean;
    chi2 += dev * dev / mean;
    CHECK(std::abs(dev) <= 4.0 * sigma);
  }
  CHECK(chi2 < 27.88);
}

TEST_CASE("content stream under the identity order is a causal block") {
  const Fixture f(1);
  Rng rng(2, Rng::stream_id(StreamPurpose::test, 42));
  const std::size_t n = 6;
  const Tensor h = random_tensor({n, 8}, rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto plan = plan_from_order(order);
  const auto pos = position_range(0, n);
  TwoStreamCall call;
  call.table = &f.table;
  call.pos_current = pos;
  call.pos_keys = pos;
  const auto out = two_stream_layer(h, f.g0(n), plan, f.cfg, f.layer1, call);
  const auto causal = attention::AttentionMask::causal(n, 0);
  const Tensor ref = attention::encoder_block(h, h, f.cfg, f.layer1, {{&f.table, &causal, pos, pos}, 0.0});
  CHECK(max_abs_diff(out.h.values(), ref.values()) <= 1e-12);
}

TEST_CASE("the query stream never sees its own token") {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const Fixture f(trial);
    Rng rng(trial, Rng::stream_id(StreamPurpose::test, 43));
    const std::size_t n = 2 + rng.below(6);
    Tensor e = random_tensor({n, 8}, rng);
    const auto plan = sample_permutation(n, rng);
    const auto pos = position_range(0, n);
    TwoStreamCall call;
    call.table = &f.table;
    call.pos_current = pos;
    call.pos_keys = pos;
    const auto l1 = two_stream_layer(e, f.g0(n), plan, f.cfg, f.layer1, call);
    const auto l2 = two_stream_layer(l1.h, l1.g, plan, f.cfg, f.layer2, call);
    const std::size_t i = rng.below(n);
    for (const Tensor* g : {&l1.g, &l2.g}) {
      e.zero_grad();
      sum(block(*g, i, 1, 0, 8)).backward();
      for (std::size_t c = 0; c < 8; ++c) REQUIRE(e.grad()[i * 8 + c] == 0.0);
      if (plan.rank[i] == 0)
        for (double v : e.grad()) REQUIRE(v == 0.0);
    }
    // The content stream does depend on its own token.
    e.zero_grad();
    sum(block(l1.h, i, 1, 0, 8)).backward();
    double self = 0.0;
    for (std::size_t c = 0; c < 8; ++c) self += std::abs(e.grad()[i * 8 + c]);
    CHECK(self > 0.0);
  }
}

TEST_CASE("perturbing a token leaves its own first-layer query state unchanged") {
  const Fixture f(7);
  Rng rng(7, Rng::stream_id(StreamPurpose::test, 44));
  const std::size_t n = 6;
  const Tensor e = random_tensor({n, 8}, rng, 1.0, false);
  const auto plan = sample_permutation(n, rng);
  const auto pos = position_range(0, n);
  TwoStreamCall call;
  call.table = &f.table;
  call.pos_current = pos;
  call.pos_keys = pos;
  const Tensor base = two_stream_layer(e, f.g0(n), plan, f.cfg, f.layer1, call).g;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(e.values().begin(), e.values().end());
    for (std::size_t c = 0; c < 8; ++c) v[i * 8 + c] += 3.0;
    const Tensor moved = two_stream_layer(Tensor::from({n, 8}, v), f.g0(n), plan, f.cfg, f.layer1, call).g;
    for (std::size_t c = 0; c < 8; ++c) CHECK(moved.at(i, c) == base.at(i, c));
  }
}

TEST_CASE("plm loss closed forms") {
  const Tensor g = Tensor::matrix({{0.3, -1.0}, {2.0, 0.5}, {1.0, 1.0}});
  const std::vector<int> ids{3, 1, 4};
  const std::vector<std::size_t> targets{0, 2};
  const Tensor loss = plm_loss(g, targets, Tensor::zeros({2, 5}), Tensor::zeros({5}), ids);
  CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  const std::vector<int> zeros{0, 0, 0};
  CHECK(plm_loss(g, targets, Tensor::zeros({2, 1}), Tensor::zeros({1}), zeros).item() == 0.0);
  CHECK_THROWS_AS(plm_loss(g, std::vector<std::size_t>{}, Tensor::zeros({2, 5}), Tensor::zeros({5}), ids),
                  ContractError);
}

TEST_CASE("two-stream gradients pass finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Fixture f(seed + 20);
    f.cfg = AttentionConfig{4, 2, 2, PeMode::relative, 0.0};
    Rng rng(seed, Rng::stream_id(StreamPurpose::test, 45));
    f.layer1 = EncoderLayerParams::init(4, 8, rng);
    f.table = RelPosTable{random_tensor({5, 2}, rng, 0.5), random_tensor({5, 2}, rng, 0.5), 2};
    const Tensor e = random_tensor({4, 4}, rng), g = random_tensor({4, 4}, rng);
    const auto plan = plan_from_order({1, 3, 0, 2});
    const auto pos = position_range(0, 4);
    TwoStreamCall call;
    call.table = &f.table;
    call.pos_current = pos;
    call.pos_keys = pos;
    const auto& a = f.layer1.attn;
    const double err = ntrr::test::grad_error(
        [&] {
          const auto out = two_stream_layer(e, g, plan, f.cfg, f.layer1, call);
          return concat_rows(std::vector<Tensor>{out.h, out.g});
        },
        {e, g, a.wq, a.wk, a.wv, a.wo, f.layer1.w1, f.layer1.w2, f.table.key, f.table.value}, seed);
    CHECK(err <= ntrr::test::kGradTolerance);
  }
}
