#include "rtls/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rtls/parallel.hpp"
#include "rtls/rng.hpp"

namespace rtls {

namespace {

struct ZoneChange {
  double timestamp;
  ZoneId from;
  ZoneId to;
};

std::vector<ZoneChange> changes_of(std::span<const TimedZone> seq) {
  std::vector<ZoneChange> out;
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq[i].zone != seq[i - 1].zone) out.push_back({seq[i].timestamp, seq[i - 1].zone, seq[i].zone});
  return out;
}

void require_nonempty(std::span<const TimedZone> pred, std::span<const TimedZone> truth) {
  if (pred.empty()) throw Error("metric undefined: prediction list is empty");
  if (truth.empty()) throw Error("metric undefined: ground-truth list is empty");
}

int count_star_correct(std::span<const TimedZone> pred, std::span<const TimedZone> truth,
                       double window) {
  int correct = 0;
  for (const auto& p : pred) {
    auto it = std::lower_bound(truth.begin(), truth.end(), p.timestamp - window - kTimeEps,
                               [](const TimedZone& t, double v) { return t.timestamp < v; });
    for (; it != truth.end() && it->timestamp <= p.timestamp + window + kTimeEps; ++it) {
      if (it->zone == p.zone) {
        ++correct;
        break;
      }
    }
  }
  return correct;
}

void check_axis(std::span<const double> values, const char* axis) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1]))
      throw Error(fmt::format("{} sweep values must be strictly increasing", axis));
}

}  // namespace

double accuracy_star(std::span<const TimedZone> pred, std::span<const TimedZone> truth,
                     double window) {
  require_nonempty(pred, truth);
  return static_cast<double>(count_star_correct(pred, truth, window)) /
         static_cast<double>(pred.size());
}

ZoneChangeCount incorrect_zone_changes(std::span<const TimedZone> pred,
                                       std::span<const TimedZone> truth, double window) {
  require_nonempty(pred, truth);
  const auto predicted = changes_of(pred);
  const auto actual = changes_of(truth);
  std::vector<bool> used(actual.size(), false);
  ZoneChangeCount count;
  count.total = static_cast<int>(predicted.size());
  for (const auto& c : predicted) {
    auto it = std::lower_bound(actual.begin(), actual.end(), c.timestamp - window - kTimeEps,
                               [](const ZoneChange& a, double v) { return a.timestamp < v; });
    bool matched = false;
    for (; it != actual.end() && it->timestamp <= c.timestamp + window + kTimeEps; ++it) {
      const auto idx = static_cast<std::size_t>(it - actual.begin());
      if (!used[idx] && it->from == c.from && it->to == c.to) {
        used[idx] = true;
        matched = true;
        break;
      }
    }
    if (!matched) ++count.incorrect;
  }
  return count;
}

ErrorDistance mean_error_distance(std::span<const TimedZone> pred,
                                  std::span<const TimedZone> truth, const ZoneGraph& g) {
  require_nonempty(pred, truth);
  if (pred.size() != truth.size())
    throw Error(fmt::format("error distance needs aligned sequences ({} vs {} steps)", pred.size(),
                            truth.size()));
  ErrorDistance e;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].zone == truth[i].zone) continue;
    ++e.misclassified;
    const int d = g.distance(pred[i].zone, truth[i].zone);
    if (d == kUnreachable)
      ++e.unreachable;
    else
      e.sum += d;
  }
  const int finite = e.misclassified - e.unreachable;
  e.mean = finite > 0 ? e.sum / finite : 0.0;
  return e;
}

void SweepResult::validate() const {
  std::vector<double> values;
  for (const auto& p : points) values.push_back(p.value);
  check_axis(values, axis.c_str());
}

std::vector<TimedZone> decision_truth(const LabeledRecording& recording,
                                      std::span<const ZoneDecision> decisions) {
  if (recording.frames.size() != recording.labels.size())
    throw Error(fmt::format("recording '{}' has {} frames but {} labels", recording.tag,
                            recording.frames.size(), recording.labels.size()));
  if (recording.frames.empty()) return {};
  std::vector<TimedZone> truth;
  truth.reserve(decisions.size());
  for (const auto& d : decisions) {
    auto it = std::lower_bound(recording.frames.begin(), recording.frames.end(),
                               d.timestamp - kTimeEps,
                               [](const RssiFrame& f, double v) { return f.timestamp < v; });
    const auto idx = it == recording.frames.begin()
                         ? std::size_t{0}
                         : static_cast<std::size_t>(it - recording.frames.begin()) - 1;
    truth.push_back({d.timestamp, recording.labels[idx]});
  }
  return truth;
}

std::vector<TimedZone> as_timed(std::span<const ZoneDecision> decisions) {
  std::vector<TimedZone> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) out.push_back({d.timestamp, d.zone});
  return out;
}

MetricReport evaluate_walks(std::shared_ptr<const NetParams> params,
                            std::shared_ptr<const ZoneGraph> graph,
                            std::span<const LabeledRecording> walks,
                            const TrackerOptions& options) {
  struct WalkScore {
    int steps = 0, correct = 0, incorrect = 0, changes = 0, misclassified = 0, finite = 0;
    double distance_sum = 0.0;
    std::vector<int> zone_total, zone_correct;
  };
  const int zones = graph->zone_count();
  std::vector<WalkScore> scores(walks.size());
  parallel_for(static_cast<long>(walks.size()), [&](long w) {
    const auto decisions = run_offline(params, graph, options, walks[w].frames);
    if (decisions.empty()) return;
    const auto pred = as_timed(decisions);
    const auto truth = decision_truth(walks[w], decisions);
    WalkScore& s = scores[w];
    s.steps = static_cast<int>(pred.size());
    s.correct = count_star_correct(pred, truth, kLatencyWindow);
    const auto zc = incorrect_zone_changes(pred, truth);
    s.incorrect = zc.incorrect;
    s.changes = zc.total;
    const auto ed = mean_error_distance(pred, truth, *graph);
    s.misclassified = ed.misclassified;
    s.finite = ed.misclassified - ed.unreachable;
    s.distance_sum = ed.sum;
    s.zone_total.assign(zones, 0);
    s.zone_correct.assign(zones, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      ++s.zone_total[truth[i].zone];
      if (pred[i].zone == truth[i].zone) ++s.zone_correct[truth[i].zone];
    }
  });

  MetricReport r;
  int correct = 0, finite = 0;
  double distance = 0.0;
  std::vector<int> zone_total(zones, 0), zone_correct(zones, 0);
  for (const auto& s : scores) {
    r.evaluated_steps += s.steps;
    correct += s.correct;
    r.incorrect_zone_changes += s.incorrect;
    r.total_zone_changes += s.changes;
    r.misclassified += s.misclassified;
    finite += s.finite;
    distance += s.distance_sum;
    for (int z = 0; z < zones && !s.zone_total.empty(); ++z) {
      zone_total[z] += s.zone_total[z];
      zone_correct[z] += s.zone_correct[z];
    }
  }
  r.trajectories = static_cast<int>(walks.size());
  r.accuracy_star = r.evaluated_steps > 0 ? static_cast<double>(correct) / r.evaluated_steps : 0.0;
  r.mean_error_distance = finite > 0 ? distance / finite : 0.0;
  r.per_zone_accuracy.resize(zones);
  for (int z = 0; z < zones; ++z)
    r.per_zone_accuracy[z] =
        zone_total[z] > 0 ? static_cast<double>(zone_correct[z]) / zone_total[z] : kMissing;
  return r;
}

MetricReport evaluate_zone_sessions(const NetParams& params, const ZoneGraph& g,
                                    std::span<const LabeledTrajectory> sessions, int lookback,
                                    int first_step) {
  if (lookback < 1) throw Error("lookback must be >= 1");
  if (params.shape.class_dim != g.zone_count())
    throw Error(fmt::format("model predicts {} zones but the building has {}",
                            params.shape.class_dim, g.zone_count()));
  if (first_step < 0) first_step = lookback - 1;

  struct Task {
    int session;
    int index;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < static_cast<int>(sessions.size()); ++s)
    for (int i = first_step; i < sessions[s].size(); ++i) tasks.push_back({s, i});
  if (tasks.empty()) throw Error("no session is long enough to evaluate");

  std::vector<ZoneId> predicted(tasks.size());
  parallel_for(static_cast<long>(tasks.size()), [&](long t) {
    const auto& steps = sessions[tasks[t].session].steps;
    const int end = tasks[t].index + 1;
    const int begin = std::max(0, end - lookback);
    std::vector<Vector> window;
    window.reserve(end - begin);
    for (int i = begin; i < end; ++i) window.push_back(steps[i].x);
    predicted[t] = argmax(forward_last(params, window));
  });

  MetricReport r;
  const int zones = g.zone_count();
  std::vector<int> zone_total(zones, 0), zone_correct(zones, 0);
  int correct = 0, finite = 0;
  double distance = 0.0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const ZoneId truth = sessions[tasks[t].session].label(tasks[t].index);
    ++zone_total[truth];
    if (predicted[t] == truth) {
      ++correct;
      ++zone_correct[truth];
    } else {
      ++r.misclassified;
      const int d = g.distance(predicted[t], truth);
      if (d != kUnreachable) {
        distance += d;
        ++finite;
      }
    }
  }
  r.evaluated_steps = static_cast<int>(tasks.size());
  r.trajectories = static_cast<int>(sessions.size());
  r.accuracy_star = static_cast<double>(correct) / r.evaluated_steps;
  r.mean_error_distance = finite > 0 ? distance / finite : 0.0;
  r.per_zone_accuracy.resize(zones);
  for (int z = 0; z < zones; ++z)
    r.per_zone_accuracy[z] =
        zone_total[z] > 0 ? static_cast<double>(zone_correct[z]) / zone_total[z] : kMissing;
  return r;
}

SweepResult sweep_history_length(const NetParams& params, const ZoneGraph& g,
                                 std::span<const LabeledTrajectory> sessions,
                                 std::span<const int> lengths) {
  if (lengths.empty()) throw Error("history sweep needs at least one length");
  std::vector<double> axis(lengths.begin(), lengths.end());
  check_axis(axis, "lookback");
  const int first = *std::max_element(lengths.begin(), lengths.end()) - 1;
  SweepResult sweep{"lookback", {}};
  for (int len : lengths)
    sweep.points.push_back(
        {static_cast<double>(len), evaluate_zone_sessions(params, g, sessions, len, first)});
  return sweep;
}

SweepResult KSweepGrid::column(std::size_t lookback_index) const {
  SweepResult sweep{"k", {}};
  for (std::size_t i = 0; i < ks.size(); ++i)
    sweep.points.push_back({ks[i], cells.at(i).at(lookback_index)});
  return sweep;
}

KSweepGrid sweep_k(std::shared_ptr<const NetParams> params, std::shared_ptr<const ZoneGraph> graph,
                   std::span<const LabeledRecording> walks, std::span<const double> ks,
                   std::span<const int> lookbacks, const TrackerOptions& base) {
  check_axis(ks, "k");
  std::vector<double> lb(lookbacks.begin(), lookbacks.end());
  check_axis(lb, "lookback");
  KSweepGrid grid;
  grid.ks.assign(ks.begin(), ks.end());
  grid.lookbacks.assign(lookbacks.begin(), lookbacks.end());
  for (double k : ks) {
    auto& row = grid.cells.emplace_back();
    for (int l : lookbacks) {
      TrackerOptions opt = base;
      opt.k = k;
      opt.lookback = l;
      row.push_back(evaluate_walks(params, graph, walks, opt));
    }
  }
  return grid;
}

std::vector<int> sensors_for_density(int sensor_count, int zone_count, double density,
                                     std::uint64_t seed) {
  const long count = std::lround(density * zone_count);
  if (count < 1)
    throw Error(fmt::format("density {} leaves fewer than one sensor for {} zones", density,
                            zone_count));
  if (count > sensor_count)
    throw Error(fmt::format("density {} needs {} sensors but the layout has {}", density, count,
                            sensor_count));
  std::vector<int> keep(sensor_count);
  std::iota(keep.begin(), keep.end(), 0);
  if (count == sensor_count) return keep;
  Rng rng(seed, "ablation", static_cast<std::uint64_t>(count));
  std::shuffle(keep.begin(), keep.end(), rng.engine());
  keep.resize(count);
  std::sort(keep.begin(), keep.end());
  return keep;
}

SweepResult sweep_sensor_density(const DensityExperiment& experiment,
                                 std::span<const double> densities, std::uint64_t seed) {
  check_axis(densities, "density");
  const auto& g = *experiment.graph;
  std::vector<std::vector<int>> keeps;
  for (double d : densities)
    keeps.push_back(sensors_for_density(experiment.sensor_count, g.zone_count(), d, seed));

  SweepResult sweep{"density", std::vector<SweepPoint>(densities.size())};
  parallel_for(static_cast<long>(densities.size()), [&](long i) {
    auto recordings = experiment.recordings;
    auto test = experiment.test_sessions;
    select_inputs(recordings, keeps[i]);
    select_inputs(test, keeps[i]);
    NetConfig net = experiment.net;
    net.shape.input_dim = static_cast<int>(keeps[i].size());
    const auto split = make_split(recordings, test, g, experiment.half_len, experiment.per_pair,
                                  net.seed);
    const auto report = train(net, split);
    sweep.points[i] = {densities[i], evaluate_zone_sessions(report.selected_params, g, split.test,
                                                            experiment.eval_lookback)};
  });
  return sweep;
}

namespace {
std::string report_row(double value, const MetricReport& r) {
  return fmt::format("{},{},{},{},{},{},{}\n", value, r.accuracy_star,
                     r.incorrect_per_trajectory(), r.mean_error_distance, r.incorrect_zone_changes,
                     r.total_zone_changes, r.trajectories);
}
}  // namespace

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = fmt::format(
      "{},accuracy_star,incorrect_changes,mean_error_distance,incorrect_total,changes_total,"
      "trajectories\n",
      sweep.axis);
  for (const auto& p : sweep.points) out += report_row(p.value, p.report);
  return out;
}

std::string sweep_table(const SweepResult& sweep) {
  std::string out = fmt::format("{:>10} {:>10} {:>12} {:>10}\n", sweep.axis, "accuracy*",
                                "incorrect/tr", "err dist");
  for (const auto& p : sweep.points)
    out += fmt::format("{:>10} {:>9.2f}% {:>12.2f} {:>10.3f}\n", p.value,
                       100.0 * p.report.accuracy_star, p.report.incorrect_per_trajectory(),
                       p.report.mean_error_distance);
  return out;
}

std::string grid_csv(const KSweepGrid& grid) {
  std::string out =
      "k,lookback,accuracy_star,incorrect_changes,mean_error_distance,incorrect_total,"
      "changes_total,trajectories\n";
  for (std::size_t i = 0; i < grid.ks.size(); ++i)
    for (std::size_t j = 0; j < grid.lookbacks.size(); ++j)
      out += fmt::format("{},", grid.ks[i]) + report_row(grid.lookbacks[j], grid.cells[i][j]);
  return out;
}

std::string grid_table(const KSweepGrid& grid) {
  std::string out = fmt::format("{:>8}", "k");
  for (int l : grid.lookbacks) out += fmt::format(" | L={:<4} acc*   incorrect", l);
  out += "\n";
  for (std::size_t i = 0; i < grid.ks.size(); ++i) {
    out += fmt::format("{:>8}", grid.ks[i]);
    for (std::size_t j = 0; j < grid.lookbacks.size(); ++j)
      out += fmt::format(" | {:>10.2f}% {:>9.2f}", 100.0 * grid.cells[i][j].accuracy_star,
                         grid.cells[i][j].incorrect_per_trajectory());
    out += "\n";
  }
  return out;
}

}  // namespace rtls
