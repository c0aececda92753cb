#include "rtls/dataset.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "rtls/rng.hpp"

namespace rtls {

void Normalization::validate() const {
  if (!(floor_dbm < ceil_dbm)) throw Error("normalization floor must be below its ceiling");
}

Vector temporal_average(std::span<const RssiFrame> frames, int sensor_count) {
  Vector sum(sensor_count, 0.0);
  std::vector<int> count(sensor_count, 0);
  for (const auto& f : frames) {
    if (static_cast<int>(f.values.size()) != sensor_count)
      throw Error(fmt::format("frame has {} values, expected {}", f.values.size(), sensor_count));
    for (int i = 0; i < sensor_count; ++i) {
      if (is_missing(f.values[i])) continue;
      sum[i] += f.values[i];
      ++count[i];
    }
  }
  Vector out(sensor_count, kMissing);
  for (int i = 0; i < sensor_count; ++i)
    if (count[i] > 0) out[i] = sum[i] / count[i];
  return out;
}

Vector temporal_average(std::span<const RssiFrame> frames, int sensor_count, double window_end,
                        double window) {
  std::vector<RssiFrame> inside;
  for (const auto& f : frames)
    if (f.timestamp >= window_end - window - kTimeEps && f.timestamp < window_end - kTimeEps)
      inside.push_back(f);
  return temporal_average(inside, sensor_count);
}

Vector impute_and_normalize(std::span<const double> averaged, const Normalization& norm) {
  const double range = norm.ceil_dbm - norm.floor_dbm;
  Vector x(averaged.size());
  for (std::size_t i = 0; i < averaged.size(); ++i) {
    const double v = is_missing(averaged[i]) ? norm.floor_dbm : averaged[i];
    x[i] = std::clamp((v - norm.floor_dbm) / range, 0.0, 1.0);
  }
  return x;
}

StepSequence to_steps(std::span<const RssiFrame> frames, int sensor_count, double dt,
                      const Normalization& norm, std::optional<ZoneId> label) {
  StepSequence steps;
  if (frames.empty()) return steps;
  const WindowClock clock{frames.front().timestamp, dt};
  std::size_t begin = 0;
  std::int64_t window = 0;
  while (begin < frames.size()) {
    std::size_t end = begin;
    while (end < frames.size() && clock.index_of(frames[end].timestamp) <= window) ++end;
    const auto avg = temporal_average(frames.subspan(begin, end - begin), sensor_count);
    steps.push_back({clock.end_of(window), impute_and_normalize(avg, norm), label});
    begin = end;
    ++window;
  }
  return steps;
}

std::vector<LabeledTrajectory> augment_cross_zone(const ZoneRecordings& recordings,
                                                  const ZoneGraph& g, int half_len, int per_pair,
                                                  std::uint64_t seed, double dt) {
  if (half_len < 1) throw Error("augmentation half length must be >= 1");
  if (per_pair < 1) throw Error("augmentation per_pair must be >= 1");
  if (static_cast<int>(recordings.size()) != g.zone_count())
    throw Error(fmt::format("recordings cover {} zones, building has {}", recordings.size(),
                            g.zone_count()));
  const int tags = recordings.empty() ? 0 : static_cast<int>(recordings.front().size());
  for (ZoneId z = 0; z < g.zone_count(); ++z) {
    if (static_cast<int>(recordings[z].size()) != tags)
      throw Error(fmt::format("zone {} ('{}') has recordings for {} tags, expected {}", z,
                              g.name(z), recordings[z].size(), tags));
    for (int t = 0; t < tags; ++t)
      if (static_cast<int>(recordings[z][t].size()) < half_len)
        throw Error(fmt::format("zone {} ('{}') tag {} recording has {} steps, fewer than {}", z,
                                g.name(z), t, recordings[z][t].size(), half_len));
  }

  const auto& pairs = g.connected_pairs();
  const long per_tag = static_cast<long>(pairs.size()) * per_pair;
  const long total = per_tag * tags;
  std::vector<LabeledTrajectory> out(total);

#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const int tag = static_cast<int>(idx / per_tag);
    const long rem = idx % per_tag;
    const auto [a, b] = pairs[rem / per_pair];
    const int rep = static_cast<int>(rem % per_pair);
    const ZoneId first = rep % 2 == 0 ? a : b;
    const ZoneId second = rep % 2 == 0 ? b : a;

    Rng rng(seed, "augment", static_cast<std::uint64_t>(idx));
    const auto& src1 = recordings[first][tag];
    const auto& src2 = recordings[second][tag];
    const int start1 = rng.uniform_int(0, static_cast<int>(src1.size()) - half_len);
    const int start2 = rng.uniform_int(0, static_cast<int>(src2.size()) - half_len);

    LabeledTrajectory traj;
    traj.steps.reserve(2 * half_len);
    for (int i = 0; i < 2 * half_len; ++i) {
      const bool head = i < half_len;
      const auto& src = head ? src1[start1 + i] : src2[start2 + i - half_len];
      traj.steps.push_back({(i + 1) * dt, src.x, head ? first : second});
    }
    traj.provenance = SpliceProvenance{tag, first, start1, second, start2};
    out[idx] = std::move(traj);
  }
  return out;
}

TagSplit split_tags(int tag_count, std::uint64_t seed) {
  if (tag_count < 2) throw Error(fmt::format("need at least 2 tags to split, got {}", tag_count));
  std::vector<int> order(tag_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng.engine());
  TagSplit split;
  split.validation = {order.back()};
  split.train.assign(order.begin(), order.end() - 1);
  std::sort(split.train.begin(), split.train.end());
  return split;
}

ZoneRecordings select_tags(const ZoneRecordings& recordings, std::span<const int> tags) {
  ZoneRecordings out(recordings.size());
  for (std::size_t z = 0; z < recordings.size(); ++z)
    for (int t : tags) out[z].push_back(recordings[z].at(t));
  return out;
}

DatasetSplit make_split(const ZoneRecordings& recordings, std::vector<LabeledTrajectory> test,
                        const ZoneGraph& g, int half_len, int per_pair, std::uint64_t seed) {
  const int tags = recordings.empty() ? 0 : static_cast<int>(recordings.front().size());
  const auto tag_split = split_tags(tags, seed);
  DatasetSplit split;
  split.train = augment_cross_zone(select_tags(recordings, tag_split.train), g, half_len,
                                   per_pair, derive_seed(seed, "augment-train"));
  split.validation = augment_cross_zone(select_tags(recordings, tag_split.validation), g,
                                        half_len, per_pair, derive_seed(seed, "augment-val"));
  split.test = std::move(test);
  return split;
}

namespace {
Vector pick(const Vector& x, std::span<const int> keep) {
  Vector out;
  out.reserve(keep.size());
  for (int i : keep) out.push_back(x.at(i));
  return out;
}
}  // namespace

void select_inputs(std::vector<LabeledTrajectory>& trajectories, std::span<const int> keep) {
  for (auto& t : trajectories)
    for (auto& s : t.steps) s.x = pick(s.x, keep);
}

void select_inputs(ZoneRecordings& recordings, std::span<const int> keep) {
  for (auto& zone : recordings)
    for (auto& seq : zone)
      for (auto& s : seq) s.x = pick(s.x, keep);
}

}  // namespace rtls
