#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rtls/common.hpp"
#include "rtls/signal_sim.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

/// Averaging interval and step spacing of network inputs, in seconds.
inline constexpr double kDefaultStepInterval = 1.0;

/// Linear map of dBm onto [0, 1]; missing readings are filled with floor_dbm.
struct Normalization {
  double floor_dbm = -100.0;
  double ceil_dbm = -30.0;

  void validate() const;
};

/// Assigns timestamps to averaging windows [origin + k*dt, origin + (k+1)*dt).
/// Window k is reported at its end time. Shared by the offline dataset
/// builder and the streaming tracker so both see identical windows.
struct WindowClock {
  double origin = 0.0;
  double dt = kDefaultStepInterval;

  std::int64_t index_of(double t) const {
    return static_cast<std::int64_t>(std::floor((t - origin) / dt + kTimeEps));
  }
  double end_of(std::int64_t k) const { return origin + static_cast<double>(k + 1) * dt; }
};

struct AveragedStep {
  double timestamp = 0.0;
  Vector x;
  std::optional<ZoneId> label;
};

using StepSequence = std::vector<AveragedStep>;

/// Where an augmented trajectory's two halves came from.
struct SpliceProvenance {
  int tag = 0;
  ZoneId first_zone = 0;
  int first_start = 0;
  ZoneId second_zone = 0;
  int second_start = 0;
};

/// Fully labeled sequence of averaged steps.
struct LabeledTrajectory {
  StepSequence steps;
  std::optional<SpliceProvenance> provenance;

  int size() const { return static_cast<int>(steps.size()); }
  ZoneId label(int i) const { return steps.at(i).label.value(); }
};

/// recordings[zone][tag]: averaged single-zone recording of one tag.
using ZoneRecordings = std::vector<std::vector<StepSequence>>;

struct DatasetSplit {
  std::vector<LabeledTrajectory> train;
  std::vector<LabeledTrajectory> validation;
  std::vector<LabeledTrajectory> test;
};

struct TagSplit {
  std::vector<int> train;
  std::vector<int> validation;
};

/// Per-sensor mean of the non-missing readings across `frames`; sensors with
/// no reading stay missing. An empty list yields an all-missing vector.
Vector temporal_average(std::span<const RssiFrame> frames, int sensor_count);

/// Mean over the frames whose timestamp lies in the trailing window
/// [window_end - window, window_end).
Vector temporal_average(std::span<const RssiFrame> frames, int sensor_count, double window_end,
                        double window);

Vector impute_and_normalize(std::span<const double> averaged, const Normalization& norm);

/// Averages a sorted frame recording into steps spaced `dt` apart, with the
/// first window starting at the first frame. Windows without frames produce
/// all-missing (hence all-zero) inputs.
StepSequence to_steps(std::span<const RssiFrame> frames, int sensor_count, double dt,
                      const Normalization& norm, std::optional<ZoneId> label = std::nullopt);

/// Splices a contiguous `half_len`-step slice from one zone's recording onto a
/// contiguous slice from an adjacent zone's recording. For every tag, every
/// connected pair, and each of `per_pair` repetitions one trajectory is made;
/// even repetitions go first->second of the pair, odd ones second->first.
/// Output order is tag-major, then pair, then repetition.
std::vector<LabeledTrajectory> augment_cross_zone(const ZoneRecordings& recordings,
                                                  const ZoneGraph& g, int half_len, int per_pair,
                                                  std::uint64_t seed,
                                                  double dt = kDefaultStepInterval);

/// Seeded random choice of one validation tag; the rest train.
TagSplit split_tags(int tag_count, std::uint64_t seed);

/// Recordings restricted to the listed tags, in the given order.
ZoneRecordings select_tags(const ZoneRecordings& recordings, std::span<const int> tags);

/// Builds augmented train/validation trajectories from `recordings`, using
/// `test` unchanged as the held-out set.
DatasetSplit make_split(const ZoneRecordings& recordings, std::vector<LabeledTrajectory> test,
                        const ZoneGraph& g, int half_len, int per_pair, std::uint64_t seed);

/// Keeps only the listed input columns of every step.
void select_inputs(std::vector<LabeledTrajectory>& trajectories, std::span<const int> keep);
void select_inputs(ZoneRecordings& recordings, std::span<const int> keep);

}  // namespace rtls
