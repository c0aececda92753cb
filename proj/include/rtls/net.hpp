#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtls/common.hpp"
#include "rtls/dataset.hpp"
#include "rtls/matrix.hpp"
#include "rtls/rng.hpp"

namespace rtls {

struct NetShape {
  int input_dim = 0;   // sensors
  int hidden_dim = 0;  // LSTM width
  int class_dim = 0;   // zones
  int dense_dim = 0;   // width of both dense layers
  int layers = 1;      // stacked LSTM layers

  void validate() const;
  bool operator==(const NetShape&) const = default;
};

struct NetConfig {
  NetShape shape;
  double dropout_rate = 0.5;
  double learning_rate = 0.01;
  int epochs = 30;
  int lookback = 10;
  std::uint64_t seed = 0;

  void validate() const;

  /// 142 sensors, 200 hidden, 115 zones, 200 dense, dropout 0.5.
  static NetConfig paper_scale();
};

/// One peephole LSTM layer. The peephole matrices are full H x H.
struct LstmLayer {
  Matrix w_xi, w_xf, w_xc, w_xo;
  Matrix w_hi, w_hf, w_hc, w_ho;
  Matrix w_ci, w_cf, w_co;
  Vector b_i, b_f, b_c, b_o;

  bool operator==(const LstmLayer&) const = default;
};

struct DenseLayer {
  Matrix w;
  Vector b;

  bool operator==(const DenseLayer&) const = default;
};

/// All trainable weights. The same structure doubles as a gradient.
struct NetParams {
  NetShape shape;
  std::vector<LstmLayer> lstm;
  DenseLayer dense1;
  DenseLayer dense2;
  DenseLayer out;

  static NetParams zeros(const NetShape& shape);
  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per matrix, zero biases.
  static NetParams initialize(const NetShape& shape, std::uint64_t seed);

  /// Visits every parameter block in serialization order as (name, values).
  void for_each_block(const std::function<void(std::string_view, std::span<double>)>& fn);
  void for_each_block(
      const std::function<void(std::string_view, std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  bool operator==(const NetParams&) const = default;
};

struct LayerState {
  Vector h;
  Vector c;
};

struct RecurrentState {
  std::vector<LayerState> layers;

  static RecurrentState zeros(const NetShape& shape);
  const Vector& output() const { return layers.back().h; }
};

enum class Mode { kTrain, kInfer };

/// One step of a single peephole LSTM layer:
///   i = sig(Wxi x + Whi h' + Wci C' + bi)
///   f = sig(Wxf x + Whf h' + Wcf C' + bf)
///   C = f*C' + i*tanh(Wxc x + Whc h' + bc)
///   o = sig(Wxo x + Who h' + Wco C + bo)     (reads the new cell state)
///   h = o*tanh(C)
LayerState lstm_step(const LstmLayer& layer, std::span<const double> x, const LayerState& prev);

/// One step through every stacked layer.
RecurrentState lstm_step(const NetParams& p, std::span<const double> x,
                         const RecurrentState& prev);

/// dense -> ReLU -> dropout -> dense -> ReLU -> dropout -> linear -> softmax.
/// Dropout is inverted (scaled at train time) and inactive in kInfer mode,
/// where `rng` is never touched and may be null.
Vector classifier_forward(const NetParams& p, std::span<const double> h, Mode mode,
                          double dropout_rate = 0.0, Rng* rng = nullptr);

/// Runs from zero state; one probability vector per input step.
std::vector<Vector> forward_sequence(const NetParams& p, std::span<const Vector> inputs,
                                     Mode mode = Mode::kInfer, double dropout_rate = 0.0,
                                     Rng* rng = nullptr);

/// Inference probabilities after the last of `inputs`, from zero state.
Vector forward_last(const NetParams& p, std::span<const Vector> inputs);

/// Probabilities below this are clamped before taking the log.
inline constexpr double kProbFloor = 1e-12;

/// Categorical cross-entropy -log p[label].
double loss(std::span<const double> probs, ZoneId label);

/// Mean per-step loss of a trajectory in inference mode.
double sequence_loss(const NetParams& p, const LabeledTrajectory& traj);

struct Gradient {
  NetParams grad;
  double loss = 0.0;  // mean per-step loss of the forward pass
};

/// Backpropagation through time of the mean per-step cross-entropy, starting
/// from `initial`. Dropout masks drawn in the forward pass are reused. When
/// `bptt_limit` > 0 the sequence is cut into consecutive segments of that
/// many steps and no gradient flows across segment boundaries (the forward
/// state still does).
Gradient backward_from(const NetParams& p, std::span<const Vector> inputs,
                       std::span<const ZoneId> labels, const RecurrentState& initial,
                       double dropout_rate, Rng* rng, int bptt_limit = 0);

Gradient backward(const NetParams& p, const LabeledTrajectory& traj, double dropout_rate,
                  Rng* rng, int bptt_limit = 0);

/// w <- w - lr * grad. Throws, without modifying `p`, if any gradient entry
/// is non-finite.
void sgd_step(NetParams& p, const NetParams& grad, double learning_rate);

struct TrainReport {
  std::vector<double> train_loss;       // per epoch, mean over the epoch's updates
  std::vector<double> validation_loss;  // per epoch, dropout disabled
  int selected_epoch = 0;               // 1-based argmin of validation_loss
  NetParams selected_params;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double validation_loss)>;

/// Plain per-trajectory SGD with a seeded shuffle each epoch; returns the
/// parameters from the epoch with the lowest validation loss.
TrainReport train(const NetConfig& config, const DatasetSplit& split,
                  const EpochCallback& on_epoch = {});

struct ModelProvenance {
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
};

struct LoadedModel {
  NetParams params;
  ModelProvenance provenance;
};

/// Binary model file: "RTLSLSTM" magic, u32 version, u32 S/H/Z/D/layers,
/// u64 seed, u64 config digest, u64 value count, the parameter blocks in
/// for_each_block order as little-endian f64, then a u64 FNV-1a checksum of
/// the payload bytes.
std::string serialize_params(const NetParams& p, const ModelProvenance& provenance = {});
LoadedModel deserialize_params(std::string_view bytes);

/// Throws "model shape mismatch: ..." when the shapes differ.
void check_shape(const NetShape& actual, const NetShape& expected);

void save_params(const NetParams& p, const std::string& path,
                 const ModelProvenance& provenance = {});
/// Throws on I/O failure, corruption, or when `expected` is given and the
/// stored shape differs.
LoadedModel load_params(const std::string& path, const NetShape* expected = nullptr);

}  // namespace rtls
