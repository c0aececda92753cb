#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rtls/net.hpp"
#include "support.hpp"

using namespace rtls;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

LstmLayer scalar_layer() {
  auto p = NetParams::zeros({1, 1, 2, 1, 1});
  auto l = p.lstm[0];
  l.w_xi(0, 0) = 0.5;  l.w_hi(0, 0) = -0.3; l.w_ci(0, 0) = 0.2;  l.b_i[0] = 0.1;
  l.w_xf(0, 0) = -0.4; l.w_hf(0, 0) = 0.6;  l.w_cf(0, 0) = -0.7; l.b_f[0] = 0.2;
  l.w_xc(0, 0) = 0.9;  l.w_hc(0, 0) = 0.25; l.b_c[0] = -0.15;
  l.w_xo(0, 0) = 0.3;  l.w_ho(0, 0) = -0.2; l.w_co(0, 0) = 1.1;  l.b_o[0] = -0.05;
  return l;
}

std::vector<LabeledTrajectory> constant_trajectories(int n, int steps, int dim, ZoneId label,
                                                     Rng& rng) {
  std::vector<LabeledTrajectory> out(n);
  for (auto& t : out)
    for (int i = 0; i < steps; ++i) {
      Vector x(dim);
      for (auto& v : x) v = rng.uniform();
      t.steps.push_back({i + 1.0, x, label});
    }
  return out;
}

}  // namespace

TEST_CASE("scalar peephole step matches hand evaluation") {
  const auto l = scalar_layer();
  const double x = 0.8, h0 = -0.25, c0 = 0.6;
  const double i = sig(0.5 * x - 0.3 * h0 + 0.2 * c0 + 0.1);
  const double f = sig(-0.4 * x + 0.6 * h0 - 0.7 * c0 + 0.2);
  const double c = f * c0 + i * std::tanh(0.9 * x + 0.25 * h0 - 0.15);
  const double o = sig(0.3 * x - 0.2 * h0 + 1.1 * c - 0.05);
  const double h = o * std::tanh(c);

  const Vector xv{x};
  const auto s = lstm_step(l, xv, LayerState{{h0}, {c0}});
  CHECK(std::abs(s.c[0] - c) <= 1e-12);
  CHECK(std::abs(s.h[0] - h) <= 1e-12);
  // Reading the old cell state in the output gate gives a different answer.
  const double o_old = sig(0.3 * x - 0.2 * h0 + 1.1 * c0 - 0.05);
  CHECK(std::abs(s.h[0] - o_old * std::tanh(c)) > 1e-6);
}

TEST_CASE("zero parameters give zero state and uniform output") {
  const NetShape shape{6, 5, 4, 3, 1};
  const auto p = NetParams::zeros(shape);
  const Vector x{1, 2, 3, 4, 5, 6};
  const auto s = lstm_step(p, x, RecurrentState::zeros(shape));
  for (double v : s.output()) CHECK(v == 0.0);
  for (double v : s.layers[0].c) CHECK(v == 0.0);
  for (double v : classifier_forward(p, s.output(), Mode::kInfer)) CHECK(v == 0.25);
}

TEST_CASE("paper-scale shapes") {
  const auto cfg = NetConfig::paper_scale();
  CHECK(cfg.dropout_rate == 0.5);
  const auto p = NetParams::initialize(cfg.shape, 1);
  const Vector x(142, 0.3);
  const auto s = lstm_step(p, x, RecurrentState::zeros(cfg.shape));
  CHECK(s.output().size() == 200);
  CHECK(s.layers[0].c.size() == 200);
  CHECK(classifier_forward(p, s.output(), Mode::kInfer).size() == 115);
}

TEST_CASE("initialization scale and determinism") {
  const NetShape shape{9, 16, 5, 7, 2};
  const auto a = NetParams::initialize(shape, 4);
  CHECK(a == NetParams::initialize(shape, 4));
  CHECK_FALSE(a == NetParams::initialize(shape, 5));
  for (double v : a.lstm[0].w_xi.values()) CHECK(std::abs(v) <= 1.0 / 3.0);
  for (double v : a.lstm[1].w_xi.values()) CHECK(std::abs(v) <= 0.25);
  for (double v : a.lstm[0].b_f) CHECK(v == 0.0);
  for (double v : a.out.w.values()) CHECK(std::abs(v) <= 1.0 / std::sqrt(7.0));
}

TEST_CASE("gates and outputs stay in range") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const NetShape shape{rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng.uniform_int(2, 6),
                         rng.uniform_int(1, 6), rng.uniform_int(1, 2)};
    const auto p = test::random_params(shape, trial, 3.0);
    auto state = RecurrentState::zeros(shape);
    for (int t = 0; t < 10; ++t) {
      Vector x(shape.input_dim);
      for (auto& v : x) v = rng.uniform(-5, 5);
      state = lstm_step(p, x, state);
      for (double h : state.output()) REQUIRE(std::abs(h) <= 1.0);
      const auto probs = classifier_forward(p, state.output(), Mode::kInfer);
      double sum = 0.0;
      for (double q : probs) {
        REQUIRE(q > 0.0);
        sum += q;
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("single step sequence equals one step plus classifier") {
  const NetShape shape{3, 4, 3, 5, 1};
  const auto p = test::random_params(shape, 2, 0.7);
  const std::vector<Vector> xs{{0.1, 0.5, 0.9}};
  const auto seq = forward_sequence(p, xs);
  const auto s = lstm_step(p, xs[0], RecurrentState::zeros(shape));
  CHECK(seq.at(0) == classifier_forward(p, s.output(), Mode::kInfer));
  CHECK(forward_last(p, xs) == seq[0]);

  Rng rng(3);
  const auto longer = test::random_inputs(7, 3, rng);
  const auto all = forward_sequence(p, longer);
  CHECK(all.size() == 7);
  CHECK(forward_last(p, longer) == all.back());
}

TEST_CASE("repeated input settles to a fixed point") {
  const NetShape shape{3, 4, 3, 5, 1};
  const auto p = test::random_params(shape, 8, 0.3);
  const Vector x{0.2, 0.4, 0.6};
  auto state = RecurrentState::zeros(shape);
  double last_delta = 1.0;
  for (int t = 0; t < 2000; ++t) {
    const auto next = lstm_step(p, x, state);
    last_delta = 0.0;
    for (int k = 0; k < shape.hidden_dim; ++k)
      last_delta = std::max(last_delta, std::abs(next.output()[k] - state.output()[k]));
    state = next;
  }
  CHECK(last_delta < 1e-9);
}

TEST_CASE("loss values") {
  const Vector certain{0.0, 1.0};
  CHECK(loss(certain, 1) == 0.0);
  const Vector uniform(115, 1.0 / 115);
  CHECK(loss(uniform, 3) == doctest::Approx(std::log(115.0)).epsilon(1e-12));
  const Vector half{0.5, 0.5};
  CHECK(loss(half, 0) == doctest::Approx(std::log(2.0)));
  CHECK(loss(certain, 0) == doctest::Approx(-std::log(kProbFloor)));
  CHECK_THROWS_AS(loss(half, 2), Error);
}

TEST_CASE("gradient matches finite differences") {
  const auto check = test::check_gradient({5, 4, 3, 4, 1}, 3, 31, 1e-5, 1e-4, 1e-8);
  INFO(check.first_failure);
  CHECK(check.failures == 0);
  const auto stacked = test::check_gradient({3, 3, 4, 2, 2}, 5, 32, 1e-5, 1e-4, 1e-8);
  INFO(stacked.first_failure);
  CHECK(stacked.failures == 0);
}

TEST_CASE("output gate bias gradient sums the per-step deltas") {
  // With the classifier ignoring everything but h at the last step, dL/db_o
  // collects one o-gate delta per step; check it against a two-sided estimate.
  const NetShape shape{2, 2, 2, 2, 1};
  auto p = test::random_params(shape, 5, 0.6);
  const std::vector<Vector> xs{{0.3, 0.7}, {0.9, 0.1}, {0.5, 0.5}};
  const std::vector<ZoneId> labels{0, 1, 1};
  const auto g = backward_from(p, xs, labels, RecurrentState::zeros(shape), 0.0, nullptr);
  for (int k = 0; k < 2; ++k) {
    auto up = p, down = p;
    up.lstm[0].b_o[k] += 1e-6;
    down.lstm[0].b_o[k] -= 1e-6;
    auto mean_loss = [&](const NetParams& q) {
      const auto probs = forward_sequence(q, xs);
      return (loss(probs[0], 0) + loss(probs[1], 1) + loss(probs[2], 1)) / 3.0;
    };
    const double numeric = (mean_loss(up) - mean_loss(down)) / 2e-6;
    CHECK(g.grad.lstm[0].b_o[k] == doctest::Approx(numeric).epsilon(1e-6));
  }
}

namespace {

std::vector<double> flatten(const NetParams& p) {
  std::vector<double> out;
  p.for_each_block([&](std::string_view, std::span<const double> v) {
    out.insert(out.end(), v.begin(), v.end());
  });
  return out;
}

}  // namespace

TEST_CASE("truncated backpropagation stops at segment boundaries") {
  const NetShape shape{2, 3, 2, 8, 1};
  const auto p = test::random_params(shape, 6, 0.8);
  const std::vector<Vector> xs{{0.3, 0.7}, {0.9, 0.1}, {0.5, 0.5}, {0.2, 0.2}};
  const std::vector<ZoneId> labels{0, 0, 1, 1};
  const auto zero = RecurrentState::zeros(shape);
  const auto full = backward_from(p, xs, labels, zero, 0.0, nullptr);
  double lstm_norm = 0.0;
  for (double v : full.grad.lstm[0].w_hi.values()) lstm_norm += std::abs(v);
  REQUIRE(lstm_norm > 1e-6);
  const auto cut = backward_from(p, xs, labels, zero, 0.0, nullptr, 2);
  CHECK(full.loss == cut.loss);
  CHECK_FALSE(full.grad == cut.grad);
  CHECK(backward_from(p, xs, labels, zero, 0.0, nullptr, 4).grad == full.grad);

  // With a limit of 1 each step's gradient is local: it equals the sum of
  // one-step gradients taken from the forward states.
  auto state = zero;
  std::vector<double> summed(flatten(p).size(), 0.0);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const std::vector<Vector> one{xs[t]};
    const std::vector<ZoneId> lab{labels[t]};
    const auto g = flatten(backward_from(p, one, lab, state, 0.0, nullptr).grad);
    for (std::size_t i = 0; i < g.size(); ++i) summed[i] += g[i] / 4.0;
    state = lstm_step(p, xs[t], state);
  }
  const auto local = flatten(backward_from(p, xs, labels, zero, 0.0, nullptr, 1).grad);
  for (std::size_t i = 0; i < local.size(); ++i)
    CHECK(local[i] == doctest::Approx(summed[i]).epsilon(1e-12));
}

TEST_CASE("sgd step") {
  const NetShape shape{1, 1, 2, 1, 1};
  auto p = NetParams::zeros(shape);
  auto g = NetParams::zeros(shape);
  p.out.b[0] = 1.0;
  g.out.b[0] = 2.0;
  auto same = p;
  sgd_step(same, NetParams::zeros(shape), 0.5);
  CHECK(same == p);
  sgd_step(same, g, 0.0);
  CHECK(same == p);
  sgd_step(p, g, 0.1);
  CHECK(p.out.b[0] == doctest::Approx(0.8).epsilon(1e-15));

  auto bad = g;
  bad.dense1.w(0, 0) = std::nan("");
  const auto before = p;
  CHECK_THROWS_WITH_AS(sgd_step(p, bad, 0.1), doctest::Contains("dense1"), Error);
  CHECK(p == before);
}

TEST_CASE("inference ignores the dropout generator") {
  const NetShape shape{3, 4, 3, 5, 1};
  const auto p = test::random_params(shape, 9, 0.7);
  const Vector h{0.1, -0.2, 0.3, 0.4};
  Rng r1(1), r2(2);
  const auto a = classifier_forward(p, h, Mode::kInfer, 0.5, &r1);
  const auto b = classifier_forward(p, h, Mode::kInfer, 0.5, &r2);
  CHECK(a == b);
  CHECK(a == classifier_forward(p, h, Mode::kInfer));
  CHECK_THROWS_AS(classifier_forward(p, h, Mode::kTrain, 0.5, nullptr), Error);
  Rng r3(3);
  const auto c = classifier_forward(p, h, Mode::kTrain, 0.0, &r3);
  CHECK(c == a);
}

TEST_CASE("training is reproducible and selects the validation argmin") {
  Rng rng(4);
  DatasetSplit split;
  for (ZoneId z = 0; z < 3; ++z) {
    auto more = constant_trajectories(4, 6, 4, z, rng);
    for (auto& t : more)
      for (auto& s : t.steps) s.x[z] += 2.0;
    split.train.insert(split.train.end(), more.begin(), more.end());
    auto val = constant_trajectories(1, 6, 4, z, rng);
    for (auto& t : val)
      for (auto& s : t.steps) s.x[z] += 2.0;
    split.validation.insert(split.validation.end(), val.begin(), val.end());
  }
  NetConfig cfg;
  cfg.shape = {4, 6, 3, 6, 1};
  cfg.epochs = 6;
  cfg.learning_rate = 0.1;
  cfg.dropout_rate = 0.2;
  cfg.seed = 12;
  int calls = 0;
  const auto a = train(cfg, split, [&](int epoch, double, double) { CHECK(epoch == ++calls); });
  const auto b = train(cfg, split);
  CHECK(calls == 6);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.validation_loss == b.validation_loss);
  CHECK(a.selected_params == b.selected_params);
  const auto best = std::min_element(a.validation_loss.begin(), a.validation_loss.end());
  CHECK(a.selected_epoch == best - a.validation_loss.begin() + 1);
  CHECK(a.train_loss.front() > a.train_loss.back());
  double vl = 0.0;
  for (const auto& t : split.validation) vl += sequence_loss(a.selected_params, t);
  CHECK(vl / split.validation.size() == doctest::Approx(*best).epsilon(1e-12));
}

TEST_CASE("one-zone data collapses to the constant class") {
  Rng rng(5);
  DatasetSplit split;
  split.train = constant_trajectories(20, 10, 3, 1, rng);
  split.validation = constant_trajectories(3, 10, 3, 1, rng);
  NetConfig cfg;
  cfg.shape = {3, 4, 3, 4, 1};
  cfg.epochs = 5;
  cfg.learning_rate = 1.0;
  cfg.dropout_rate = 0.0;
  const auto r = train(cfg, split);
  CHECK(r.validation_loss[r.selected_epoch - 1] < 1e-3);
}

TEST_CASE("training configuration errors") {
  NetConfig cfg;
  cfg.shape = {3, 4, 3, 4, 1};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.epochs = 1;
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.dropout_rate = 0.5;
  CHECK_THROWS_AS(train(cfg, DatasetSplit{}), Error);
}

TEST_CASE("model round trip") {
  const NetShape shape{5, 4, 3, 6, 2};
  const auto p = test::random_params(shape, 13, 1.0);
  test::TempDir dir("rtls-model");
  save_params(p, dir.file("m.bin"), {77, 0xabcdef});
  const auto loaded = load_params(dir.file("m.bin"));
  CHECK(loaded.params == p);
  CHECK(loaded.provenance.seed == 77);
  CHECK(loaded.provenance.config_digest == 0xabcdef);
  CHECK(serialize_params(loaded.params, loaded.provenance) == serialize_params(p, {77, 0xabcdef}));

  NetShape wrong = shape;
  wrong.class_dim = 4;
  CHECK_THROWS_WITH_AS(load_params(dir.file("m.bin"), &wrong),
                       doctest::Contains("model shape mismatch"), Error);

  const auto bytes = serialize_params(p);
  CHECK_THROWS_AS(deserialize_params(std::string_view(bytes).substr(0, bytes.size() - 9)), Error);
  CHECK_THROWS_AS(deserialize_params(std::string_view(bytes).substr(0, 30)), Error);
  auto flipped = bytes;
  flipped[100] ^= 0x01;
  CHECK_THROWS_WITH_AS(deserialize_params(flipped), doctest::Contains("checksum"), Error);
  CHECK_THROWS_AS(deserialize_params(bytes + "x"), Error);
  CHECK_THROWS_AS(deserialize_params("NOTMODEL" + bytes.substr(8)), Error);
  CHECK_THROWS_AS(load_params(dir.file("missing.bin")), Error);
}
