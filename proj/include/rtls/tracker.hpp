#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtls/dataset.hpp"
#include "rtls/net.hpp"
#include "rtls/posterior.hpp"
#include "rtls/signal_sim.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

struct TrackerOptions {
  double k = 40.0;
  int lookback = 10;
  double step_interval = kDefaultStepInterval;
  Normalization norm;
  /// Frames older than the newest seen frame by more than this are dropped.
  double reorder_tolerance = 0.05;

  ConstraintParams constraint() const { return {k, step_interval}; }
  void validate() const;
};

struct ZoneDecision {
  double timestamp = 0.0;
  ZoneId zone = 0;
  Vector raw_probs;
  Vector constrained_probs;
};

/// Streaming zone tracker for one tag. Frames are bucketed into step_interval
/// windows starting at the first frame; when a window closes its average
/// becomes one network input, the LSTM is replayed from zero state over the
/// last `lookback` inputs, and the classifier output is constrained by the
/// previous decision. The first decision is unconstrained.
///
/// Not thread-safe; any number of trackers may share one parameter snapshot.
class Tracker {
 public:
  Tracker(std::shared_ptr<const NetParams> params, std::shared_ptr<const ZoneGraph> graph,
          TrackerOptions options);

  /// Emits one decision for every window that `frame` closes (several if the
  /// stream skipped whole windows, which are treated as all-missing).
  std::vector<ZoneDecision> ingest(const RssiFrame& frame);

  /// Closes the pending window if it holds any frames.
  std::optional<ZoneDecision> flush();

  int dropped_frames() const { return dropped_; }
  std::int64_t history_len() const { return emitted_; }
  std::optional<ZoneId> prev_zone() const { return prev_zone_; }
  const RecurrentState& recurrent() const { return recurrent_; }
  const TrackerOptions& options() const { return options_; }

 private:
  ZoneDecision decide(double timestamp);

  std::shared_ptr<const NetParams> params_;
  std::shared_ptr<const ZoneGraph> graph_;
  TrackerOptions options_;

  std::optional<WindowClock> clock_;
  std::int64_t window_index_ = 0;
  std::vector<RssiFrame> window_;
  double newest_ = 0.0;
  std::deque<Vector> history_;
  RecurrentState recurrent_;
  std::optional<ZoneId> prev_zone_;
  std::int64_t emitted_ = 0;
  int dropped_ = 0;
};

/// Feeds a sorted recording through a fresh tracker and flushes at the end.
std::vector<ZoneDecision> run_offline(std::shared_ptr<const NetParams> params,
                                      std::shared_ptr<const ZoneGraph> graph,
                                      const TrackerOptions& options,
                                      std::span<const RssiFrame> frames);

/// One tracker per tag id.
class TrackerPool {
 public:
  TrackerPool(std::shared_ptr<const NetParams> params, std::shared_ptr<const ZoneGraph> graph,
              TrackerOptions options);

  std::vector<ZoneDecision> ingest(const std::string& tag, const RssiFrame& frame);
  /// Flushes every tracker, in tag order.
  std::vector<std::pair<std::string, ZoneDecision>> flush_all();
  int dropped_frames() const;

 private:
  std::shared_ptr<const NetParams> params_;
  std::shared_ptr<const ZoneGraph> graph_;
  TrackerOptions options_;
  std::map<std::string, Tracker> trackers_;
};

}  // namespace rtls
