#include "rtls/signal_sim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rtls {

namespace {

constexpr double kJitterStep = 0.3;  // meters per broadcast interval, per axis

double reflect(double v, double lo, double hi) {
  if (hi <= lo) return lo;
  const double span = hi - lo;
  double u = std::fmod(v - lo, 2.0 * span);
  if (u < 0) u += 2.0 * span;
  return lo + (u <= span ? u : 2.0 * span - u);
}

/// Bounded random motion inside a zone's square.
class ZoneMotion {
 public:
  ZoneMotion(const SensorLayout& layout, ZoneId zone, Rng& rng)
      : anchor_(layout.zone_anchor.at(zone)), half_(layout.zone_half_extent) {
    point_ = {anchor_.x + rng.uniform(-half_, half_), anchor_.y + rng.uniform(-half_, half_),
              anchor_.floor};
  }

  const Point& point() const { return point_; }

  void step(Rng& rng) {
    point_.x = reflect(point_.x + rng.normal(0.0, kJitterStep), anchor_.x - half_, anchor_.x + half_);
    point_.y = reflect(point_.y + rng.normal(0.0, kJitterStep), anchor_.y - half_, anchor_.y + half_);
  }

 private:
  Point anchor_;
  double half_;
  Point point_;
};

std::vector<int> walls_from(const ZoneGraph& g, const SensorLayout& layout, ZoneId zone) {
  std::vector<int> walls(layout.sensor_count());
  const auto row = g.distance_row(zone);
  for (int i = 0; i < layout.sensor_count(); ++i) walls[i] = row[layout.sensor_zone[i]];
  return walls;
}

}  // namespace

void SensorLayout::validate(const ZoneGraph& g) const {
  if (sensor_count() < 1) throw Error("layout has no sensors");
  if (sensor_zone.size() != sensor_position.size())
    throw Error("layout sensor_zone and sensor_position lengths differ");
  if (static_cast<int>(zone_anchor.size()) != g.zone_count())
    throw Error(fmt::format("layout has {} zone anchors but the building has {} zones",
                            zone_anchor.size(), g.zone_count()));
  for (int i = 0; i < sensor_count(); ++i) {
    if (sensor_zone[i] < 0 || sensor_zone[i] >= g.zone_count())
      throw Error(fmt::format("sensor {} home zone {} out of range", i, sensor_zone[i]));
  }
  if (!(zone_half_extent >= 0.0) || !(floor_height > 0.0)) throw Error("invalid layout geometry");
}

SensorLayout SensorLayout::subset(std::span<const int> keep) const {
  SensorLayout out;
  out.zone_anchor = zone_anchor;
  out.zone_half_extent = zone_half_extent;
  out.floor_height = floor_height;
  for (int i : keep) {
    out.sensor_position.push_back(sensor_position.at(i));
    out.sensor_zone.push_back(sensor_zone.at(i));
  }
  return out;
}

void PropagationParams::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(noise_sigma >= 0.0)) throw Error("noise_sigma must be >= 0");
  if (!prob(missing_prob_base)) throw Error("missing_prob_base must lie in [0, 1]");
  if (!prob(missing_prob_per_meter)) throw Error("missing_prob_per_meter must lie in [0, 1]");
  if (!std::isfinite(p0) || !std::isfinite(path_loss_exponent) ||
      !std::isfinite(wall_attenuation) || !std::isfinite(floor_attenuation))
    throw Error("propagation parameters must be finite");
}

double point_distance(const Point& a, const Point& b, double floor_height) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = (a.floor - b.floor) * floor_height;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double mean_rssi(const PropagationParams& params, double distance_m, int walls, int floor_delta) {
  return params.p0 - 10.0 * params.path_loss_exponent * std::log10(std::max(distance_m, 1.0)) -
         params.wall_attenuation * walls - params.floor_attenuation * std::abs(floor_delta);
}

RssiFrame emit_frame(const SensorLayout& layout, const PropagationParams& params,
                     const Point& tag, std::span<const int> walls, double timestamp, Rng& rng) {
  const int s = layout.sensor_count();
  RssiFrame frame{timestamp, Vector(s, kMissing)};
  for (int i = 0; i < s; ++i) {
    const Point& sensor = layout.sensor_position[i];
    const double dist = point_distance(tag, sensor, layout.floor_height);
    // Both draws happen for every sensor so the stream stays aligned.
    const double noise = params.noise_sigma > 0.0 ? rng.normal(0.0, params.noise_sigma) : 0.0;
    const double u = rng.uniform();
    if (walls[i] == kUnreachable) continue;
    const double p_missing =
        std::min(1.0, params.missing_prob_base + params.missing_prob_per_meter * dist);
    if (u < p_missing) continue;
    const double v = mean_rssi(params, dist, walls[i], tag.floor - sensor.floor) + noise;
    if (v < kRssiMin) continue;
    frame.values[i] = std::min(v, kRssiMax);
  }
  return frame;
}

RssiFrame emit_frame(const ZoneGraph& g, const SensorLayout& layout,
                     const PropagationParams& params, ZoneId tag_zone, const Point& tag,
                     double timestamp, Rng& rng) {
  const auto walls = walls_from(g, layout, tag_zone);
  return emit_frame(layout, params, tag, walls, timestamp, rng);
}

int sample_count(double duration) {
  return static_cast<int>(std::lround(duration / kBroadcastInterval));
}

GroundTruthWalk random_walk(const ZoneGraph& g, const SensorLayout& layout, ZoneId start,
                            double duration, double dwell_mean, Rng& rng, double t0) {
  if (!(duration > 0.0)) throw Error("walk duration must be positive");
  if (!(dwell_mean > 0.0)) throw Error("dwell_mean must be positive");
  (void)g.name(start);

  const int n = sample_count(duration);
  GroundTruthWalk walk;
  walk.reserve(n);
  ZoneId zone = start;
  ZoneMotion motion(layout, zone, rng);
  double leave_at = t0 + rng.exponential(dwell_mean);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * kBroadcastInterval;
    if (i > 0) {
      const auto& next = g.neighbors(zone);
      if (t >= leave_at && !next.empty()) {
        zone = next[rng.uniform_int(0, static_cast<int>(next.size()) - 1)];
        motion = ZoneMotion(layout, zone, rng);
        leave_at = t + rng.exponential(dwell_mean);
      } else {
        motion.step(rng);
      }
    }
    walk.push_back({t, zone, motion.point()});
  }
  return walk;
}

ZoneSession record_zone_session(const ZoneGraph& g, const SensorLayout& layout,
                                const PropagationParams& params, ZoneId zone, double duration,
                                Rng& rng, double t0) {
  if (!(duration > 0.0)) throw Error("session duration must be positive");
  const auto walls = walls_from(g, layout, zone);
  const int n = std::max(1, sample_count(duration));
  ZoneSession session{zone, {}};
  session.frames.reserve(n);
  ZoneMotion motion(layout, zone, rng);
  for (int i = 0; i < n; ++i) {
    if (i > 0) motion.step(rng);
    session.frames.push_back(
        emit_frame(layout, params, motion.point(), walls, t0 + i * kBroadcastInterval, rng));
  }
  return session;
}

std::vector<RssiFrame> frames_for_walk(const ZoneGraph& g, const SensorLayout& layout,
                                       const PropagationParams& params,
                                       const GroundTruthWalk& walk, Rng& rng) {
  std::vector<RssiFrame> frames;
  frames.reserve(walk.size());
  ZoneId cached_zone = -1;
  std::vector<int> walls;
  for (const auto& sample : walk) {
    if (sample.zone != cached_zone) {
      walls = walls_from(g, layout, sample.zone);
      cached_zone = sample.zone;
    }
    frames.push_back(emit_frame(layout, params, sample.point, walls, sample.timestamp, rng));
  }
  return frames;
}

}  // namespace rtls
