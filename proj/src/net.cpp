#include "rtls/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "rtls/kernels.hpp"
#include "rtls/parallel.hpp"

namespace rtls {

namespace {

kernels::MatView view(const Matrix& m) { return {m.values(), m.rows(), m.cols()}; }

/// y += W x
void mul_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
  kernels::gemv_acc(view(w), x, y);
}
/// y += W^T x
void mul_t_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
  kernels::gemv_t_acc(view(w), x, y);
}
/// G += u v^T
void outer_acc(Matrix& g, std::span<const double> u, std::span<const double> v) {
  kernels::ger_acc(g.values(), g.rows(), g.cols(), u, v);
}
void add(Vector& y, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

int layer_input_dim(const NetShape& s, int layer) { return layer == 0 ? s.input_dim : s.hidden_dim; }

LstmLayer make_layer(int in, int hidden) {
  LstmLayer l;
  for (Matrix* m : {&l.w_xi, &l.w_xf, &l.w_xc, &l.w_xo}) *m = Matrix(hidden, in);
  for (Matrix* m : {&l.w_hi, &l.w_hf, &l.w_hc, &l.w_ho, &l.w_ci, &l.w_cf, &l.w_co})
    *m = Matrix(hidden, hidden);
  for (Vector* b : {&l.b_i, &l.b_f, &l.b_c, &l.b_o}) b->assign(hidden, 0.0);
  return l;
}

template <class Layer, class Fn>
void visit_layer(Layer& l, int index, Fn&& fn) {
  const std::string p = fmt::format("lstm{}.", index);
  fn(p + "W_xi", l.w_xi.values());
  fn(p + "W_xf", l.w_xf.values());
  fn(p + "W_xc", l.w_xc.values());
  fn(p + "W_xo", l.w_xo.values());
  fn(p + "W_hi", l.w_hi.values());
  fn(p + "W_hf", l.w_hf.values());
  fn(p + "W_hc", l.w_hc.values());
  fn(p + "W_ho", l.w_ho.values());
  fn(p + "W_ci", l.w_ci.values());
  fn(p + "W_cf", l.w_cf.values());
  fn(p + "W_co", l.w_co.values());
  fn(p + "b_i", std::span(l.b_i));
  fn(p + "b_f", std::span(l.b_f));
  fn(p + "b_c", std::span(l.b_c));
  fn(p + "b_o", std::span(l.b_o));
}

template <class Params, class Fn>
void visit_params(Params& p, Fn&& fn) {
  for (std::size_t l = 0; l < p.lstm.size(); ++l) visit_layer(p.lstm[l], static_cast<int>(l), fn);
  fn("dense1.W", p.dense1.w.values());
  fn("dense1.b", std::span(p.dense1.b));
  fn("dense2.W", p.dense2.w.values());
  fn("dense2.b", std::span(p.dense2.b));
  fn("out.W", p.out.w.values());
  fn("out.b", std::span(p.out.b));
}

// ---------------------------------------------------------------------------
// Forward with caches for backpropagation.

struct StepCache {
  Vector x, h_prev, c_prev;
  Vector i, f, g, c, o, tc, h;
};

StepCache layer_forward(const LstmLayer& l, std::span<const double> x, const LayerState& prev) {
  const int hdim = static_cast<int>(l.b_i.size());
  StepCache s;
  s.x.assign(x.begin(), x.end());
  s.h_prev = prev.h;
  s.c_prev = prev.c;

  Vector ai = l.b_i, af = l.b_f, ag = l.b_c, ao = l.b_o;
  mul_acc(l.w_xi, x, ai);
  mul_acc(l.w_hi, prev.h, ai);
  mul_acc(l.w_ci, prev.c, ai);
  mul_acc(l.w_xf, x, af);
  mul_acc(l.w_hf, prev.h, af);
  mul_acc(l.w_cf, prev.c, af);
  mul_acc(l.w_xc, x, ag);
  mul_acc(l.w_hc, prev.h, ag);

  s.i.resize(hdim);
  s.f.resize(hdim);
  s.g.resize(hdim);
  s.c.resize(hdim);
  for (int k = 0; k < hdim; ++k) {
    s.i[k] = sigmoid(ai[k]);
    s.f[k] = sigmoid(af[k]);
    s.g[k] = std::tanh(ag[k]);
    s.c[k] = s.f[k] * prev.c[k] + s.i[k] * s.g[k];
  }

  mul_acc(l.w_xo, x, ao);
  mul_acc(l.w_ho, prev.h, ao);
  mul_acc(l.w_co, s.c, ao);
  s.o.resize(hdim);
  s.tc.resize(hdim);
  s.h.resize(hdim);
  for (int k = 0; k < hdim; ++k) {
    s.o[k] = sigmoid(ao[k]);
    s.tc[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tc[k];
  }
  return s;
}

struct ClassifierCache {
  Vector h;
  Vector z1, m1, d1;  // pre-activation, dropout scale, post-dropout output
  Vector z2, m2, d2;
  Vector probs;
};

Vector dropout_mask(int n, Mode mode, double rate, Rng* rng) {
  Vector m(n, 1.0);
  if (mode == Mode::kInfer || rate <= 0.0) return m;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (int k = 0; k < n; ++k) m[k] = rng->uniform() < rate ? 0.0 : keep_scale;
  return m;
}

void dense_relu_dropout(const DenseLayer& layer, std::span<const double> in, Mode mode,
                        double rate, Rng* rng, Vector& z, Vector& m, Vector& d) {
  z = layer.b;
  mul_acc(layer.w, in, z);
  m = dropout_mask(static_cast<int>(z.size()), mode, rate, rng);
  d.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) d[k] = std::max(z[k], 0.0) * m[k];
}

Vector softmax(Vector logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

ClassifierCache classifier_cached(const NetParams& p, std::span<const double> h, Mode mode,
                                  double rate, Rng* rng) {
  if (mode == Mode::kTrain && rate > 0.0 && rng == nullptr)
    throw Error("training-mode dropout requires a random generator");
  ClassifierCache c;
  c.h.assign(h.begin(), h.end());
  dense_relu_dropout(p.dense1, h, mode, rate, rng, c.z1, c.m1, c.d1);
  dense_relu_dropout(p.dense2, c.d1, mode, rate, rng, c.z2, c.m2, c.d2);
  Vector logits = p.out.b;
  mul_acc(p.out.w, c.d2, logits);
  c.probs = softmax(std::move(logits));
  return c;
}

void check_input(const NetParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.shape.input_dim)
    throw Error(fmt::format("input has {} entries, network expects {}", x.size(),
                            p.shape.input_dim));
}

// ---------------------------------------------------------------------------
// Binary helpers.

constexpr char kMagic[8] = {'R', 'T', 'L', 'S', 'L', 'S', 'T', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size())
      throw Error(fmt::format("model file truncated while reading {}", what));
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw Error(fmt::format("model file truncated while reading {}", what));
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------

void NetShape::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || class_dim < 1 || dense_dim < 1 || layers < 1)
    throw Error(fmt::format("network dimensions must be >= 1 (S={}, H={}, Z={}, D={}, layers={})",
                            input_dim, hidden_dim, class_dim, dense_dim, layers));
}

void NetConfig::validate() const {
  shape.validate();
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (lookback < 1) throw Error("lookback must be >= 1");
}

NetConfig NetConfig::paper_scale() {
  NetConfig c;
  c.shape = {142, 200, 115, 200, 1};
  c.dropout_rate = 0.5;
  c.lookback = 10;
  return c;
}

NetParams NetParams::zeros(const NetShape& shape) {
  shape.validate();
  NetParams p;
  p.shape = shape;
  for (int l = 0; l < shape.layers; ++l)
    p.lstm.push_back(make_layer(layer_input_dim(shape, l), shape.hidden_dim));
  p.dense1 = {Matrix(shape.dense_dim, shape.hidden_dim), Vector(shape.dense_dim, 0.0)};
  p.dense2 = {Matrix(shape.dense_dim, shape.dense_dim), Vector(shape.dense_dim, 0.0)};
  p.out = {Matrix(shape.class_dim, shape.dense_dim), Vector(shape.class_dim, 0.0)};
  return p;
}

NetParams NetParams::initialize(const NetShape& shape, std::uint64_t seed) {
  NetParams p = zeros(shape);
  Rng rng(seed);
  auto fill = [&rng](Matrix& m) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (double& v : m.values()) v = rng.uniform(-bound, bound);
  };
  for (auto& l : p.lstm)
    for (Matrix* m : {&l.w_xi, &l.w_xf, &l.w_xc, &l.w_xo, &l.w_hi, &l.w_hf, &l.w_hc, &l.w_ho,
                      &l.w_ci, &l.w_cf, &l.w_co})
      fill(*m);
  fill(p.dense1.w);
  fill(p.dense2.w);
  fill(p.out.w);
  return p;
}

void NetParams::for_each_block(const std::function<void(std::string_view, std::span<double>)>& fn) {
  visit_params(*this, [&](const std::string& name, std::span<double> v) { fn(name, v); });
}

void NetParams::for_each_block(
    const std::function<void(std::string_view, std::span<const double>)>& fn) const {
  visit_params(*this, [&](const std::string& name, std::span<const double> v) { fn(name, v); });
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](std::string_view, std::span<const double> v) { n += v.size(); });
  return n;
}

RecurrentState RecurrentState::zeros(const NetShape& shape) {
  RecurrentState s;
  s.layers.assign(shape.layers,
                  {Vector(shape.hidden_dim, 0.0), Vector(shape.hidden_dim, 0.0)});
  return s;
}

LayerState lstm_step(const LstmLayer& layer, std::span<const double> x, const LayerState& prev) {
  if (static_cast<int>(x.size()) != layer.w_xi.cols())
    throw Error(fmt::format("LSTM input has {} entries, layer expects {}", x.size(),
                            layer.w_xi.cols()));
  if (prev.h.size() != layer.b_i.size() || prev.c.size() != layer.b_i.size())
    throw Error("recurrent state width does not match the LSTM layer");
  auto s = layer_forward(layer, x, prev);
  return {std::move(s.h), std::move(s.c)};
}

RecurrentState lstm_step(const NetParams& p, std::span<const double> x,
                         const RecurrentState& prev) {
  check_input(p, x);
  if (prev.layers.size() != p.lstm.size()) throw Error("recurrent state has the wrong layer count");
  RecurrentState next;
  next.layers.reserve(p.lstm.size());
  std::span<const double> in = x;
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    next.layers.push_back(lstm_step(p.lstm[l], in, prev.layers[l]));
    in = next.layers.back().h;
  }
  return next;
}

Vector classifier_forward(const NetParams& p, std::span<const double> h, Mode mode,
                          double dropout_rate, Rng* rng) {
  if (static_cast<int>(h.size()) != p.shape.hidden_dim)
    throw Error(fmt::format("classifier input has {} entries, expected {}", h.size(),
                            p.shape.hidden_dim));
  return classifier_cached(p, h, mode, dropout_rate, rng).probs;
}

std::vector<Vector> forward_sequence(const NetParams& p, std::span<const Vector> inputs,
                                     Mode mode, double dropout_rate, Rng* rng) {
  std::vector<Vector> out;
  out.reserve(inputs.size());
  auto state = RecurrentState::zeros(p.shape);
  for (const auto& x : inputs) {
    state = lstm_step(p, x, state);
    out.push_back(classifier_forward(p, state.output(), mode, dropout_rate, rng));
  }
  return out;
}

Vector forward_last(const NetParams& p, std::span<const Vector> inputs) {
  if (inputs.empty()) throw Error("forward_last needs at least one input step");
  auto state = RecurrentState::zeros(p.shape);
  for (const auto& x : inputs) state = lstm_step(p, x, state);
  return classifier_forward(p, state.output(), Mode::kInfer);
}

double loss(std::span<const double> probs, ZoneId label) {
  if (label < 0 || label >= static_cast<ZoneId>(probs.size()))
    throw Error(fmt::format("label {} outside [0, {})", label, probs.size()));
  return -std::log(std::max(probs[label], kProbFloor));
}

double sequence_loss(const NetParams& p, const LabeledTrajectory& traj) {
  if (traj.steps.empty()) throw Error("empty trajectory");
  auto state = RecurrentState::zeros(p.shape);
  double total = 0.0;
  for (const auto& step : traj.steps) {
    state = lstm_step(p, step.x, state);
    total += loss(classifier_forward(p, state.output(), Mode::kInfer), step.label.value());
  }
  return total / static_cast<double>(traj.steps.size());
}

Gradient backward_from(const NetParams& p, std::span<const Vector> inputs,
                       std::span<const ZoneId> labels, const RecurrentState& initial,
                       double dropout_rate, Rng* rng, int bptt_limit) {
  const int steps = static_cast<int>(inputs.size());
  if (steps < 1) throw Error("backward needs a trajectory of length >= 1");
  if (labels.size() != inputs.size()) throw Error("inputs and labels differ in length");
  const int layers = p.shape.layers;
  const int hdim = p.shape.hidden_dim;

  // Forward, keeping every intermediate.
  std::vector<std::vector<StepCache>> caches(steps);
  std::vector<ClassifierCache> heads(steps);
  Gradient result{NetParams::zeros(p.shape), 0.0};
  RecurrentState state = initial;
  for (int t = 0; t < steps; ++t) {
    check_input(p, inputs[t]);
    std::span<const double> in = inputs[t];
    caches[t].reserve(layers);
    for (int l = 0; l < layers; ++l) {
      caches[t].push_back(layer_forward(p.lstm[l], in, state.layers[l]));
      state.layers[l] = {caches[t][l].h, caches[t][l].c};
      in = caches[t][l].h;
    }
    heads[t] = classifier_cached(p, state.output(), Mode::kTrain, dropout_rate, rng);
    result.loss += loss(heads[t].probs, labels[t]);
  }
  result.loss /= steps;

  NetParams& g = result.grad;
  const double scale = 1.0 / steps;
  std::vector<Vector> dh_carry(layers, Vector(hdim, 0.0));
  std::vector<Vector> dc_carry(layers, Vector(hdim, 0.0));

  for (int t = steps - 1; t >= 0; --t) {
    // Classifier.
    const auto& head = heads[t];
    Vector dlogits(head.probs.size(), 0.0);
    if (head.probs[labels[t]] >= kProbFloor) {
      for (std::size_t z = 0; z < dlogits.size(); ++z) dlogits[z] = head.probs[z] * scale;
      dlogits[labels[t]] -= scale;
    }
    outer_acc(g.out.w, dlogits, head.d2);
    add(g.out.b, dlogits);

    Vector dz2(head.z2.size(), 0.0);
    mul_t_acc(p.out.w, dlogits, dz2);
    for (std::size_t k = 0; k < dz2.size(); ++k) dz2[k] *= head.z2[k] > 0.0 ? head.m2[k] : 0.0;
    outer_acc(g.dense2.w, dz2, head.d1);
    add(g.dense2.b, dz2);

    Vector dz1(head.z1.size(), 0.0);
    mul_t_acc(p.dense2.w, dz2, dz1);
    for (std::size_t k = 0; k < dz1.size(); ++k) dz1[k] *= head.z1[k] > 0.0 ? head.m1[k] : 0.0;
    outer_acc(g.dense1.w, dz1, head.h);
    add(g.dense1.b, dz1);

    Vector dh_above(hdim, 0.0);
    mul_t_acc(p.dense1.w, dz1, dh_above);

    // LSTM layers, top to bottom.
    for (int l = layers - 1; l >= 0; --l) {
      const StepCache& s = caches[t][l];
      const LstmLayer& w = p.lstm[l];
      LstmLayer& gw = g.lstm[l];

      Vector dh = dh_above;
      add(dh, dh_carry[l]);

      Vector da_o(hdim), dc(hdim), da_i(hdim), da_f(hdim), da_g(hdim);
      for (int k = 0; k < hdim; ++k) {
        da_o[k] = dh[k] * s.tc[k] * s.o[k] * (1.0 - s.o[k]);
        dc[k] = dc_carry[l][k] + dh[k] * s.o[k] * (1.0 - s.tc[k] * s.tc[k]);
      }
      mul_t_acc(w.w_co, da_o, dc);  // o reads the new cell state
      for (int k = 0; k < hdim; ++k) {
        da_i[k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
        da_f[k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
        da_g[k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
      }

      outer_acc(gw.w_xi, da_i, s.x);
      outer_acc(gw.w_xf, da_f, s.x);
      outer_acc(gw.w_xc, da_g, s.x);
      outer_acc(gw.w_xo, da_o, s.x);
      outer_acc(gw.w_hi, da_i, s.h_prev);
      outer_acc(gw.w_hf, da_f, s.h_prev);
      outer_acc(gw.w_hc, da_g, s.h_prev);
      outer_acc(gw.w_ho, da_o, s.h_prev);
      outer_acc(gw.w_ci, da_i, s.c_prev);
      outer_acc(gw.w_cf, da_f, s.c_prev);
      outer_acc(gw.w_co, da_o, s.c);
      add(gw.b_i, da_i);
      add(gw.b_f, da_f);
      add(gw.b_c, da_g);
      add(gw.b_o, da_o);

      if (l > 0) {
        Vector dx(hdim, 0.0);
        mul_t_acc(w.w_xi, da_i, dx);
        mul_t_acc(w.w_xf, da_f, dx);
        mul_t_acc(w.w_xc, da_g, dx);
        mul_t_acc(w.w_xo, da_o, dx);
        dh_above = std::move(dx);
      }

      Vector dh_prev(hdim, 0.0);
      mul_t_acc(w.w_hi, da_i, dh_prev);
      mul_t_acc(w.w_hf, da_f, dh_prev);
      mul_t_acc(w.w_hc, da_g, dh_prev);
      mul_t_acc(w.w_ho, da_o, dh_prev);

      Vector dc_prev(hdim);
      for (int k = 0; k < hdim; ++k) dc_prev[k] = dc[k] * s.f[k];
      mul_t_acc(w.w_ci, da_i, dc_prev);
      mul_t_acc(w.w_cf, da_f, dc_prev);

      dh_carry[l] = std::move(dh_prev);
      dc_carry[l] = std::move(dc_prev);
    }

    if (bptt_limit > 0 && t % bptt_limit == 0) {
      for (auto& v : dh_carry) std::fill(v.begin(), v.end(), 0.0);
      for (auto& v : dc_carry) std::fill(v.begin(), v.end(), 0.0);
    }
  }
  return result;
}

Gradient backward(const NetParams& p, const LabeledTrajectory& traj, double dropout_rate,
                  Rng* rng, int bptt_limit) {
  std::vector<Vector> inputs;
  std::vector<ZoneId> labels;
  inputs.reserve(traj.steps.size());
  labels.reserve(traj.steps.size());
  for (const auto& s : traj.steps) {
    inputs.push_back(s.x);
    labels.push_back(s.label.value());
  }
  return backward_from(p, inputs, labels, RecurrentState::zeros(p.shape), dropout_rate, rng,
                       bptt_limit);
}

void sgd_step(NetParams& p, const NetParams& grad, double learning_rate) {
  if (!(learning_rate >= 0.0)) throw Error("learning rate must be >= 0");
  if (!(p.shape == grad.shape)) throw Error("gradient shape does not match parameters");
  grad.for_each_block([](std::string_view name, std::span<const double> v) {
    for (double x : v)
      if (!std::isfinite(x)) throw Error(fmt::format("non-finite gradient in block {}", name));
  });
  std::vector<std::span<const double>> blocks;
  grad.for_each_block([&](std::string_view, std::span<const double> v) { blocks.push_back(v); });
  std::size_t b = 0;
  p.for_each_block([&](std::string_view, std::span<double> v) {
    const auto gv = blocks[b++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * gv[i];
  });
}

TrainReport train(const NetConfig& config, const DatasetSplit& split, const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw Error("training set is empty");
  if (split.validation.empty()) throw Error("validation set is empty");

  NetParams params = NetParams::initialize(config.shape, derive_seed(config.seed, "init"));
  Rng shuffle_rng(config.seed, "shuffle");
  Rng dropout_rng(config.seed, "dropout");

  TrainReport report;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(split.train.size());
  std::vector<double> val_losses(split.validation.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double total = 0.0;
    for (std::size_t idx : order) {
      auto g = backward(params, split.train[idx], config.dropout_rate, &dropout_rng);
      if (!std::isfinite(g.loss))
        throw Error(fmt::format("training diverged at epoch {} (non-finite loss)", epoch));
      sgd_step(params, g.grad, config.learning_rate);
      total += g.loss;
    }
    const double train_loss = total / static_cast<double>(order.size());
    if (!std::isfinite(train_loss))
      throw Error(fmt::format("training diverged at epoch {} (non-finite loss)", epoch));

    const long nval = static_cast<long>(split.validation.size());
    parallel_for(nval, [&](long v) { val_losses[v] = sequence_loss(params, split.validation[v]); });
    const double val_loss =
        std::accumulate(val_losses.begin(), val_losses.end(), 0.0) / static_cast<double>(nval);

    report.train_loss.push_back(train_loss);
    report.validation_loss.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      report.selected_epoch = epoch;
      report.selected_params = params;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  if (report.selected_epoch == 0)
    throw Error("validation loss was never finite; no parameters selected");
  return report;
}

std::string serialize_params(const NetParams& p, const ModelProvenance& provenance) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  for (int d : {p.shape.input_dim, p.shape.hidden_dim, p.shape.class_dim, p.shape.dense_dim,
                p.shape.layers})
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put_le<std::uint64_t>(out, provenance.seed);
  put_le<std::uint64_t>(out, provenance.config_digest);
  put_le<std::uint64_t>(out, p.parameter_count());
  const std::size_t payload_start = out.size();
  p.for_each_block([&](std::string_view, std::span<const double> v) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      put_le<std::uint64_t>(out, bits);
    }
  });
  put_le<std::uint64_t>(out, fnv1a(std::string_view(out).substr(payload_start)));
  return out;
}

LoadedModel deserialize_params(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic)))
    throw Error("not a model file (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFormatVersion) throw Error(fmt::format("unsupported model version {}", version));
  NetShape shape;
  shape.input_dim = static_cast<int>(in.get<std::uint32_t>("input dim"));
  shape.hidden_dim = static_cast<int>(in.get<std::uint32_t>("hidden dim"));
  shape.class_dim = static_cast<int>(in.get<std::uint32_t>("class dim"));
  shape.dense_dim = static_cast<int>(in.get<std::uint32_t>("dense dim"));
  shape.layers = static_cast<int>(in.get<std::uint32_t>("layer count"));
  shape.validate();
  LoadedModel model;
  model.provenance.seed = in.get<std::uint64_t>("seed");
  model.provenance.config_digest = in.get<std::uint64_t>("config digest");
  const auto count = in.get<std::uint64_t>("value count");

  NetParams p = NetParams::zeros(shape);
  if (count != p.parameter_count())
    throw Error(fmt::format("model declares {} values but its shape needs {}", count,
                            p.parameter_count()));
  const auto payload = in.take(count * 8, "parameters");
  Reader values(payload);
  p.for_each_block([&](std::string_view, std::span<double> v) {
    for (double& x : v) {
      const auto bits = values.get<std::uint64_t>("parameters");
      std::memcpy(&x, &bits, sizeof x);
    }
  });
  const auto checksum = in.get<std::uint64_t>("checksum");
  if (checksum != fnv1a(payload)) throw Error("model file checksum mismatch (corrupt payload)");
  if (!in.done()) throw Error("model file has trailing bytes");
  std::as_const(p).for_each_block([](std::string_view name, std::span<const double> v) {
    for (double x : v)
      if (!std::isfinite(x)) throw Error(fmt::format("non-finite parameter in block {}", name));
  });
  model.params = std::move(p);
  return model;
}

void save_params(const NetParams& p, const std::string& path, const ModelProvenance& provenance) {
  const auto bytes = serialize_params(p, provenance);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

void check_shape(const NetShape& actual, const NetShape& expected) {
  if (actual == expected) return;
  const auto& s = actual;
  throw Error(fmt::format(
      "model shape mismatch: file has S={} H={} Z={} D={} layers={}, expected S={} H={} Z={} "
      "D={} layers={}",
      s.input_dim, s.hidden_dim, s.class_dim, s.dense_dim, s.layers, expected.input_dim,
      expected.hidden_dim, expected.class_dim, expected.dense_dim, expected.layers));
}

LoadedModel load_params(const std::string& path, const NetShape* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open model '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  auto model = deserialize_params(buf.str());
  if (expected != nullptr) check_shape(model.params.shape, *expected);
  return model;
}

}  // namespace rtls
