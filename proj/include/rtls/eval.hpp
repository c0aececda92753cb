#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rtls/dataset.hpp"
#include "rtls/net.hpp"
#include "rtls/tracker.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

/// Half-width, in seconds, of the window within which a prediction or zone
/// change may match the ground truth.
inline constexpr double kLatencyWindow = 10.0;

struct TimedZone {
  double timestamp = 0.0;
  ZoneId zone = 0;
};

/// Fraction of predictions whose zone occurs anywhere in `truth` within
/// [t - window, t + window]. Both lists must be timestamp sorted.
double accuracy_star(std::span<const TimedZone> pred, std::span<const TimedZone> truth,
                     double window = kLatencyWindow);

struct ZoneChangeCount {
  int incorrect = 0;
  int total = 0;  // predicted changes
};

/// A predicted change a->b at time t is correct iff an unmatched truth change
/// a->b lies within [t - window, t + window]; matching is one-to-one and
/// greedy in time order (each predicted change takes the earliest eligible
/// truth change). Every other predicted change is incorrect.
ZoneChangeCount incorrect_zone_changes(std::span<const TimedZone> pred,
                                       std::span<const TimedZone> truth,
                                       double window = kLatencyWindow);

struct ErrorDistance {
  double mean = 0.0;      // over misclassified steps with a finite distance
  int misclassified = 0;  // steps with pred != truth
  int unreachable = 0;    // misclassified steps with no path between the zones
  double sum = 0.0;

  bool has_errors() const { return misclassified > 0; }
};

/// Mean hop distance between predicted and true zone over the misclassified
/// steps of two aligned sequences; 0 when nothing is misclassified.
ErrorDistance mean_error_distance(std::span<const TimedZone> pred,
                                  std::span<const TimedZone> truth, const ZoneGraph& g);

struct MetricReport {
  double accuracy_star = 0.0;
  int incorrect_zone_changes = 0;  // summed over trajectories
  int total_zone_changes = 0;      // predicted changes, summed
  int trajectories = 0;
  double mean_error_distance = 0.0;
  int misclassified = 0;
  int evaluated_steps = 0;
  Vector per_zone_accuracy;  // NaN for zones with no evaluated steps

  double incorrect_per_trajectory() const {
    return trajectories > 0 ? static_cast<double>(incorrect_zone_changes) / trajectories : 0.0;
  }
};

struct SweepPoint {
  double value = 0.0;
  MetricReport report;
};

struct SweepResult {
  std::string axis;  // "k", "lookback", or "density"
  std::vector<SweepPoint> points;

  /// Throws unless axis values strictly increase.
  void validate() const;
};

/// Frames of one tag with per-frame ground truth.
struct LabeledRecording {
  std::string tag;
  std::vector<RssiFrame> frames;
  std::vector<ZoneId> labels;
};

/// Ground truth at each decision: the label of the last frame inside the
/// decision's window.
std::vector<TimedZone> decision_truth(const LabeledRecording& recording,
                                      std::span<const ZoneDecision> decisions);

std::vector<TimedZone> as_timed(std::span<const ZoneDecision> decisions);

/// Runs the tracker over every walk and pools accuracy*, zone changes, and
/// error distance. Walks are processed in parallel.
MetricReport evaluate_walks(std::shared_ptr<const NetParams> params,
                            std::shared_ptr<const ZoneGraph> graph,
                            std::span<const LabeledRecording> walks, const TrackerOptions& options);

/// Single-zone accuracy with a memoryless replay: at every step index
/// >= first_step of every session the network runs from zero state over the
/// trailing `lookback` steps and its argmax is compared to the label.
/// first_step < 0 means lookback - 1.
MetricReport evaluate_zone_sessions(const NetParams& params, const ZoneGraph& g,
                                    std::span<const LabeledTrajectory> sessions, int lookback,
                                    int first_step = -1);

/// Accuracy against history length. All lengths are scored on the same steps
/// (index >= max(lengths) - 1) so the points are comparable.
SweepResult sweep_history_length(const NetParams& params, const ZoneGraph& g,
                                 std::span<const LabeledTrajectory> sessions,
                                 std::span<const int> lengths);

struct KSweepGrid {
  std::vector<double> ks;
  std::vector<int> lookbacks;
  std::vector<std::vector<MetricReport>> cells;  // [k index][lookback index]

  SweepResult column(std::size_t lookback_index) const;
};

KSweepGrid sweep_k(std::shared_ptr<const NetParams> params, std::shared_ptr<const ZoneGraph> graph,
                   std::span<const LabeledRecording> walks, std::span<const double> ks,
                   std::span<const int> lookbacks, const TrackerOptions& base);

/// Everything needed to retrain from scratch with a subset of sensors.
struct DensityExperiment {
  std::shared_ptr<const ZoneGraph> graph;
  int sensor_count = 0;
  ZoneRecordings recordings;  // train + validation tags, all sensors
  std::vector<LabeledTrajectory> test_sessions;
  NetConfig net;
  int half_len = 25;
  int per_pair = 3;
  int eval_lookback = 10;
};

/// Sensor indices kept at `density` (sensors per zone). The full count keeps
/// every sensor in order; smaller counts are a seeded uniform subset.
std::vector<int> sensors_for_density(int sensor_count, int zone_count, double density,
                                     std::uint64_t seed);

/// Trains one model per density and scores single-zone accuracy.
SweepResult sweep_sensor_density(const DensityExperiment& experiment,
                                 std::span<const double> densities, std::uint64_t seed);

/// axis value, accuracy_star, incorrect changes per trajectory, mean error
/// distance, then totals.
std::string sweep_csv(const SweepResult& sweep);
std::string sweep_table(const SweepResult& sweep);
std::string grid_csv(const KSweepGrid& grid);
std::string grid_table(const KSweepGrid& grid);

}  // namespace rtls
