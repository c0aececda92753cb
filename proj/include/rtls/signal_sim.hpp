#pragma once

#include <span>
#include <vector>

#include "rtls/common.hpp"
#include "rtls/rng.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

/// Tag broadcast interval in seconds.
inline constexpr double kBroadcastInterval = 0.1;

/// Readings outside this band are not physically plausible; weaker readings
/// are treated as not received.
inline constexpr double kRssiMin = -120.0;
inline constexpr double kRssiMax = 0.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
};

/// Sensor placement plus a representative point per zone. Zones are axis
/// aligned squares of side 2*zone_half_extent centered on their anchors.
struct SensorLayout {
  std::vector<Point> sensor_position;
  std::vector<ZoneId> sensor_zone;
  std::vector<Point> zone_anchor;
  double zone_half_extent = 3.0;
  double floor_height = 4.0;

  int sensor_count() const { return static_cast<int>(sensor_position.size()); }
  /// Sensors per zone.
  double density() const {
    return static_cast<double>(sensor_count()) / static_cast<double>(zone_anchor.size());
  }
  /// Throws unless the layout is consistent with `g`.
  void validate(const ZoneGraph& g) const;
  /// Layout restricted to the listed sensor indices, in the given order.
  SensorLayout subset(std::span<const int> keep) const;
};

/// Log-distance path loss with per-wall and per-floor attenuation, Gaussian
/// fluctuation, and distance dependent dropout.
struct PropagationParams {
  double p0 = -45.0;
  double path_loss_exponent = 2.5;
  double wall_attenuation = 4.0;
  double floor_attenuation = 15.0;
  double noise_sigma = 6.0;
  double missing_prob_base = 0.1;
  double missing_prob_per_meter = 0.02;

  void validate() const;
};

/// One timestamped reading vector across all sensors; kMissing where a
/// sensor heard nothing.
struct RssiFrame {
  double timestamp = 0.0;
  Vector values;
};

double point_distance(const Point& a, const Point& b, double floor_height);

/// Noiseless received strength (before dropout and noise).
double mean_rssi(const PropagationParams& params, double distance_m, int walls, int floor_delta);

/// `walls[i]` is the number of zone boundaries between the tag and sensor i
/// (kUnreachable silences the sensor).
RssiFrame emit_frame(const SensorLayout& layout, const PropagationParams& params,
                     const Point& tag, std::span<const int> walls, double timestamp, Rng& rng);

/// Convenience overload: walls taken as the hop distance from the tag's zone
/// to each sensor's home zone.
RssiFrame emit_frame(const ZoneGraph& g, const SensorLayout& layout,
                     const PropagationParams& params, ZoneId tag_zone, const Point& tag,
                     double timestamp, Rng& rng);

struct WalkSample {
  double timestamp = 0.0;
  ZoneId zone = 0;
  Point point;
};

using GroundTruthWalk = std::vector<WalkSample>;

/// Random walk over the zone graph sampled every kBroadcastInterval seconds.
/// Dwell time per zone is exponential with mean `dwell_mean`; the tag then
/// moves to a uniformly chosen neighbor (or stays if it has none).
GroundTruthWalk random_walk(const ZoneGraph& g, const SensorLayout& layout, ZoneId start,
                            double duration, double dwell_mean, Rng& rng, double t0 = 0.0);

struct ZoneSession {
  ZoneId label = 0;
  std::vector<RssiFrame> frames;
};

/// Tag wandering inside one zone for `duration` seconds:
/// round(duration / kBroadcastInterval) frames starting at `t0`.
ZoneSession record_zone_session(const ZoneGraph& g, const SensorLayout& layout,
                                const PropagationParams& params, ZoneId zone, double duration,
                                Rng& rng, double t0 = 0.0);

/// Frames observed along a walk, one per sample.
std::vector<RssiFrame> frames_for_walk(const ZoneGraph& g, const SensorLayout& layout,
                                       const PropagationParams& params,
                                       const GroundTruthWalk& walk, Rng& rng);

int sample_count(double duration);

}  // namespace rtls
