#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ntrr/error.hpp"
#include "ntrr/ops.hpp"
#include "ntrr/training.hpp"
#include "test_util.hpp"

using namespace ntrr;
using namespace ntrr::training;
using ntrr::test::max_abs_diff;
using ntrr::test::random_tensor;

namespace {

Tensor log_rows(std::vector<std::vector<double>> probs) {
  std::vector<double> v;
  for (const auto& row : probs)
    for (double p : row) v.push_back(std::log(p));
  return Tensor::from({probs.size(), probs[0].size()}, v, true);
}

struct Toy {
  data::Corpus corpus;
  data::Vocab vocab;
  model::ModelConfig mcfg;
  TrainConfig tcfg;

  explicit Toy(std::size_t sentences = 12, double dropout = 0.1) {
    corpus = data::synthetic_corpus(sentences, 3);
    vocab = data::Vocab::build(corpus, 1);
    mcfg.vocab_size = vocab.size();
    mcfg.model_dim = 16;
    mcfg.ffn_dim = 32;
    mcfg.xlnet_layers = 1;
    mcfg.transformer_layers = 1;
    mcfg.num_heads = 2;
    mcfg.clip_k = 3;
    mcfg.dropout = dropout;
    mcfg.labels = corpus.label_set();
    tcfg.batch_size = 4;
    tcfg.seed = 9;
    tcfg.lr_init = 0.005;
  }

  data::Batch batch(std::size_t size) const {
    return data::make_batches(corpus, vocab, mcfg.labels, size, nullptr).front();
  }
};

}  // namespace

TEST_CASE("worked two-class example") {
  const Tensor lp1 = log_rows({{0.6, 0.4}}), lp2 = log_rows({{0.5, 0.5}});
  const std::vector<int> target{0};
  const auto r = rdrop_loss(lp1, lp2, target, 1.0);
  // Reference values from a 30-digit evaluation.
  CHECK(r.ce.item() == doctest::Approx(1.2039728043259360).epsilon(1e-14));
  CHECK(r.kl_sym.item() == doctest::Approx(0.0405465108108164382).epsilon(1e-13));
  CHECK(r.total.item() == doctest::Approx(1.2445193151367524).epsilon(1e-14));
  const auto half = rdrop_loss(lp1, lp2, target, 1.0, {}, true);
  CHECK(half.kl_sym.item() == doctest::Approx(0.0405465108108164382 / 2).epsilon(1e-13));
}

TEST_CASE("loss identities") {
  Rng rng(1, Rng::stream_id(StreamPurpose::test, 60));
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = log_softmax(random_tensor({5, 4}, rng, 2.0)), b = log_softmax(random_tensor({5, 4}, rng, 2.0));
    std::vector<int> t(5);
    for (int& x : t) x = static_cast<int>(rng.below(4));
    const double alpha = 3.0 * rng.uniform();
    const auto r = rdrop_loss(a, b, t, alpha);
    CHECK(std::abs(r.total.item() - (r.ce.item() + alpha * r.kl_sym.item())) <= 1e-12);
    CHECK(r.kl_sym.item() >= 0.0);
    const auto swapped = rdrop_loss(b, a, t, alpha);
    CHECK(std::abs(swapped.kl_sym.item() - r.kl_sym.item()) <= 1e-14);
    CHECK(std::abs(swapped.ce.item() - r.ce.item()) <= 1e-14);
    CHECK(rdrop_loss(a, b, t, 0.0).total.item() == r.ce.item());
    CHECK(rdrop_loss(a, b, t, alpha + 0.5).total.item() >= r.total.item());
    const auto same = rdrop_loss(a, a, t, alpha);
    CHECK(same.kl_sym.item() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(same.total.item() - same.ce.item()) <= 1e-15);
  }
}

TEST_CASE("masked rows do not contribute") {
  Rng rng(2, Rng::stream_id(StreamPurpose::test, 61));
  const Tensor a = log_softmax(random_tensor({3, 4}, rng)), b = log_softmax(random_tensor({3, 4}, rng));
  const std::vector<int> t{1, 2, 3};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  const std::vector<std::size_t> keep{0, 2};
  const std::vector<int> kept_t{1, 3};
  const auto masked = rdrop_loss(a, b, t, 1.0, mask);
  const auto ref = rdrop_loss(gather_rows(a, keep), gather_rows(b, keep), kept_t, 1.0);
  CHECK(masked.total.item() == doctest::Approx(ref.total.item()).epsilon(1e-14));
  CHECK_THROWS(rdrop_loss(a, gather_rows(b, keep), t, 1.0));
}

TEST_CASE("loss gradients pass finite differences through both branches") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, Rng::stream_id(StreamPurpose::test, 62));
    const Tensor x1 = random_tensor({4, 3}, rng, 2.0), x2 = random_tensor({4, 3}, rng, 2.0);
    const std::vector<int> t{0, 2, 1, 1};
    std::vector<NamedTensor> named{{"x1", x1}, {"x2", x2}};
    const auto report =
        check_gradients([&] { return rdrop_loss(log_softmax(x1), log_softmax(x2), t, 1.5).total; }, named);
    CHECK(report.worst() <= ntrr::test::kGradTolerance);
  }
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(100, 0.002, 100) == doctest::Approx(0.002).epsilon(1e-15));
  CHECK(lr_schedule(1, 0.002, 100) == doctest::Approx(0.002 / 100).epsilon(1e-15));
  CHECK(lr_schedule(400, 0.002, 100) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(lr_schedule(7, 0.01, 0) == 0.01);
  CHECK_THROWS_AS(lr_schedule(0, 0.01, 10), ContractError);
  double prev = 0.0;
  for (std::size_t s = 1; s <= 50; ++s) {
    const double lr = lr_schedule(s, 1.0, 50);
    CHECK(lr > prev);
    prev = lr;
  }
  for (std::size_t s = 51; s <= 200; ++s) {
    const double lr = lr_schedule(s, 1.0, 50);
    CHECK(lr < prev);
    prev = lr;
  }
  TrainConfig c;
  CHECK(effective_warmup(c, 1000) == 100);
  CHECK(effective_warmup(c, 3) == 1);
  c.warmup_steps = 7;
  CHECK(effective_warmup(c, 1000) == 7);
}

TEST_CASE("adam basics") {
  TrainConfig cfg;
  std::vector<Tensor> p{Tensor::from({3}, {1.0, -2.0, 0.5}, true)};
  AdamState st = AdamState::for_params(p, cfg);
  adam_step(p, st, 0.1);
  CHECK(max_abs_diff(p[0].values(), std::vector<double>{1.0, -2.0, 0.5}) == 0.0);

  p[0].zero_grad();
  auto g = p[0].mutable_grad();
  g[0] = 3.0;
  g[1] = -0.01;
  g[2] = 1e-3;
  AdamState st2 = AdamState::for_params(p, cfg);
  adam_step(p, st2, 0.1);
  CHECK(p[0].at(0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[0].at(1) == doctest::Approx(-1.9).epsilon(1e-5));
  CHECK(p[0].at(2) == doctest::Approx(0.4).epsilon(1e-4));
}

TEST_CASE("adam minimises a parabola") {
  TrainConfig cfg;
  std::vector<Tensor> x{Tensor::from({1}, {5.0}, true)};
  AdamState st = AdamState::for_params(x, cfg);
  for (int s = 0; s < 200; ++s) {
    x[0].zero_grad();
    sum(mul(x[0], x[0])).backward();
    adam_step(x, st, 0.1);
  }
  CHECK(std::abs(x[0].at(0)) < 0.1);
}

TEST_CASE("global gradient clipping") {
  std::vector<Tensor> p{Tensor::zeros({1}, true), Tensor::zeros({1}, true)};
  p[0].mutable_grad()[0] = 3.0;
  p[1].mutable_grad()[0] = 4.0;
  CHECK(clip_grad_norm(p, 1.0) == doctest::Approx(5.0));
  CHECK(p[0].grad()[0] == doctest::Approx(0.6));
  CHECK(p[1].grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(p, 0.0) == doctest::Approx(1.0));
  CHECK(p[1].grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("duplicated batch and two forwards give the same loss and gradients") {
  Toy toy(8, 0.2);
  toy.mcfg.attn_dropout = 0.1;
  const auto batch = toy.batch(4);
  std::vector<std::vector<double>> grads[2];
  double totals[2];
  for (int path = 0; path < 2; ++path) {
    toy.tcfg.rdrop_duplicate = path == 0;
    auto params = model::ModelParams::init(toy.mcfg, 3);
    AdamState st = AdamState::for_params(params.tensors(), toy.tcfg);
    const auto loss = train_step(batch, params, st, toy.mcfg, toy.tcfg, {5, 0.0, 0, false});
    totals[path] = loss.total.item();
    CHECK(loss.kl_sym.item() > 0.0);
    loss.total.backward();
    for (const Tensor& t : params.tensors()) grads[path].emplace_back(t.grad().begin(), t.grad().end());
  }
  CHECK(std::abs(totals[0] - totals[1]) <= 1e-12);
  for (std::size_t i = 0; i < grads[0].size(); ++i) CHECK(max_abs_diff(grads[0][i], grads[1][i]) <= 1e-12);
}

TEST_CASE("without the consistency term a step is plain cross-entropy") {
  Toy toy(8, 0.2);
  toy.tcfg.rdrop_enabled = false;
  const auto batch = toy.batch(4);
  auto params = model::ModelParams::init(toy.mcfg, 4);
  AdamState st = AdamState::for_params(params.tensors(), toy.tcfg);
  const auto loss = train_step(batch, params, st, toy.mcfg, toy.tcfg, {2, 0.0, 0, false});
  CHECK(loss.kl_sym.item() == 0.0);
  const std::vector<int> ones(4, 1);
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const Tensor lp = forward_rows(batch, ones, idx, toy.mcfg, params, toy.tcfg.seed, 2, true, 0);
  std::vector<int> targets;
  for (std::size_t r = 0; r < 4; ++r) targets.insert(targets.end(), batch.tags(r).begin(), batch.tags(r).end());
  CHECK(loss.total.item() == cross_entropy(lp, targets).item());
}

TEST_CASE("loss decreases over the first twenty steps") {
  Toy toy(8, 0.0);
  toy.tcfg.lr_init = 0.003;
  const auto batch = toy.batch(8);
  auto params = model::ModelParams::init(toy.mcfg, 5);
  AdamState st = AdamState::for_params(params.tensors(), toy.tcfg);
  double prev = INFINITY;
  for (std::size_t s = 1; s <= 20; ++s) {
    const double total = train_step(batch, params, st, toy.mcfg, toy.tcfg, {s, toy.tcfg.lr_init}).total.item();
    CHECK(total < prev);
    prev = total;
  }
}

TEST_CASE("non-finite losses abort with diagnostics") {
  Toy toy(4, 0.0);
  const auto batch = toy.batch(4);
  auto params = model::ModelParams::init(toy.mcfg, 6);
  params.classifier_b.mutable_values()[0] = NAN;
  AdamState st = AdamState::for_params(params.tensors(), toy.tcfg);
  const bool checks = debug_checks();
  set_debug_checks(false);
  try {
    train_step(batch, params, st, toy.mcfg, toy.tcfg, {3, 0.01});
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
  set_debug_checks(checks);
}

TEST_CASE("training runs are deterministic and learn the toy corpus") {
  Toy toy(16, 0.1);
  toy.tcfg.epochs = 12;
  const auto [train_set, dev_set] = data::split_corpus(toy.corpus, 0.25, 1);
  std::string logs[2];
  std::vector<EpochRecord> records[2];
  for (int run = 0; run < 2; ++run) {
    auto params = model::ModelParams::init(toy.mcfg, toy.tcfg.seed);
    std::ostringstream log;
    const auto report = train(train_set, dev_set, toy.vocab, toy.mcfg, toy.tcfg, params, &log);
    logs[run] = log.str();
    records[run] = report.epochs;
    CHECK(report.epochs.size() == 12);
    CHECK(report.best_epoch >= 1);
    CHECK(report.best_f1 >= report.epochs.front().dev.f1);
    CHECK(report.epochs.back().mean_total < report.epochs.front().mean_total);
  }
  CHECK(logs[0] == logs[1]);
  for (std::size_t e = 0; e < records[0].size(); ++e) CHECK(records[0][e].dev.f1 == records[1][e].dev.f1);
  CHECK(logs[0].rfind(log_header(), 0) == 0);
}

TEST_CASE("evaluation rejects unknown entity types") {
  Toy toy(6, 0.0);
  const auto params = model::ModelParams::init(toy.mcfg, 7);
  data::Corpus other;
  other.sentences.push_back({{"a", "b"}, {"B-XYZ", "E-XYZ"}});
  CHECK_THROWS_AS(evaluate(other, toy.vocab, params, toy.mcfg), ContractError);
  const auto r1 = evaluate(toy.corpus, toy.vocab, params, toy.mcfg);
  const auto r2 = evaluate(toy.corpus, toy.vocab, params, toy.mcfg);
  CHECK(r1.predictions == r2.predictions);
  CHECK(r1.prf.overall.f1 == r2.prf.overall.f1);
}

TEST_CASE("permutation pretraining lowers its loss") {
  Toy toy(20, 0.0);
  toy.tcfg.pretrain_epochs = 8;
  toy.tcfg.lr_init = 0.01;
  auto params = model::ModelParams::init(toy.mcfg, 8);
  const auto report = pretrain(toy.corpus, toy.vocab, toy.mcfg, toy.tcfg, params, nullptr);
  REQUIRE(report.epoch_loss.size() == 8);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  CHECK(report.steps > 0);
}
