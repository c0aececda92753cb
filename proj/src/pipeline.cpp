#include "rtls/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include <json.hpp>

#include "rtls/frame_io.hpp"
#include "rtls/parallel.hpp"
#include "rtls/rng.hpp"

namespace rtls {

using nlohmann::json;

void DataSpec::validate() const {
  propagation.validate();
  if (train_tags < 2) throw Error("need at least 2 training tags (one is held for validation)");
  if (test_tags < 1) throw Error("need at least 1 test tag");
  if (!(session_seconds > 0.0)) throw Error("session length must be positive");
  if (walks < 0) throw Error("walk count must be >= 0");
  if (walks > 0 && !(walk_seconds > 0.0)) throw Error("walk length must be positive");
  if (!(dwell_mean > 0.0)) throw Error("dwell mean must be positive");
}

Corpus generate_corpus(const ZoneGraph& g, const SensorLayout& layout, const DataSpec& spec,
                       std::uint64_t seed) {
  spec.validate();
  layout.validate(g);
  const int zones = g.zone_count();
  const int tags = spec.train_tags + spec.test_tags;

  Corpus corpus;
  corpus.train_tags = spec.train_tags;
  corpus.sessions.assign(tags, std::vector<ZoneSession>(zones));
  parallel_for(static_cast<long>(tags) * zones, [&](long idx) {
    const int tag = static_cast<int>(idx / zones);
    const ZoneId zone = static_cast<ZoneId>(idx % zones);
    Rng rng(seed, "session", static_cast<std::uint64_t>(idx));
    corpus.sessions[tag][zone] = record_zone_session(g, layout, spec.propagation, zone,
                                                     spec.session_seconds, rng,
                                                     zone * spec.session_seconds);
  });

  corpus.walks.resize(spec.walks);
  parallel_for(spec.walks, [&](long w) {
    Rng rng(seed, "walk", static_cast<std::uint64_t>(w));
    const ZoneId start = rng.uniform_int(0, zones - 1);
    const auto walk = random_walk(g, layout, start, spec.walk_seconds, spec.dwell_mean, rng);
    LabeledRecording rec;
    rec.tag = fmt::format("walk{}", w);
    rec.frames = frames_for_walk(g, layout, spec.propagation, walk, rng);
    for (const auto& s : walk) rec.labels.push_back(s.zone);
    corpus.walks[w] = std::move(rec);
  });

  std::vector<int> order(spec.walks);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(seed, "walk-split");
  std::shuffle(order.begin(), order.end(), split_rng.engine());
  const auto half = static_cast<std::ptrdiff_t>(spec.walks / 2);
  corpus.validation_walks.assign(order.begin(), order.begin() + half);
  corpus.test_walks.assign(order.begin() + half, order.end());
  std::sort(corpus.validation_walks.begin(), corpus.validation_walks.end());
  std::sort(corpus.test_walks.begin(), corpus.test_walks.end());
  return corpus;
}

namespace {
std::string tag_name(int tag) { return fmt::format("tag{}", tag); }
}  // namespace

void write_corpus(const Corpus& corpus, const std::string& dir, int sensor_count,
                  const Provenance& provenance) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/sessions.csv", std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}/sessions.csv'", dir));
    write_frame_header(out, sensor_count, true, provenance);
    for (int t = 0; t < corpus.tag_count(); ++t)
      for (const auto& session : corpus.sessions[t])
        for (const auto& f : session.frames) write_frame(out, tag_name(t), f, session.label);
  }
  {
    std::ofstream out(dir + "/walks.csv", std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}/walks.csv'", dir));
    write_frame_header(out, sensor_count, true, provenance);
    for (const auto& w : corpus.walks)
      for (std::size_t i = 0; i < w.frames.size(); ++i) write_frame(out, w.tag, w.frames[i], w.labels[i]);
  }
  json tags = json::array();
  for (int t = 0; t < corpus.tag_count(); ++t) tags.push_back(tag_name(t));
  json val = json::array(), test = json::array();
  for (int w : corpus.validation_walks) val.push_back(corpus.walks.at(w).tag);
  for (int w : corpus.test_walks) test.push_back(corpus.walks.at(w).tag);
  json manifest = {{"format", "rtls-corpus"},
                   {"version", 1},
                   {"provenance", {{"seed", provenance.seed}, {"digest", digest_hex(provenance.digest)}}},
                   {"sensors", sensor_count},
                   {"tags", tags},
                   {"train_tags", corpus.train_tags},
                   {"validation_walks", val},
                   {"test_walks", test}};
  write_file(dir + "/manifest.json", manifest.dump(1) + "\n");
}

Corpus read_corpus(const std::string& dir, int sensor_count, int zone_count) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw Error(fmt::format("invalid corpus manifest: {}", e.what()));
  }
  Corpus corpus;
  std::map<std::string, int> tag_index;
  std::vector<std::string> tag_names;
  std::vector<std::string> val_names, test_names;
  try {
    if (manifest.at("sensors").get<int>() != sensor_count)
      throw Error(fmt::format("corpus has {} sensors, layout has {}",
                              manifest.at("sensors").get<int>(), sensor_count));
    tag_names = manifest.at("tags").get<std::vector<std::string>>();
    corpus.train_tags = manifest.at("train_tags").get<int>();
    val_names = manifest.at("validation_walks").get<std::vector<std::string>>();
    test_names = manifest.at("test_walks").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(fmt::format("invalid corpus manifest: {}", e.what()));
  }
  for (std::size_t i = 0; i < tag_names.size(); ++i) tag_index[tag_names[i]] = static_cast<int>(i);
  corpus.sessions.assign(tag_names.size(), std::vector<ZoneSession>(zone_count));
  std::vector<std::vector<bool>> seen(tag_names.size(), std::vector<bool>(zone_count, false));

  for (const auto& r : read_frames(dir + "/sessions.csv", sensor_count)) {
    const auto it = tag_index.find(r.tag);
    if (it == tag_index.end()) throw Error(fmt::format("sessions.csv: unknown tag '{}'", r.tag));
    if (!r.label || *r.label < 0 || *r.label >= zone_count)
      throw Error(fmt::format("sessions.csv: frame of '{}' lacks a valid zone label", r.tag));
    auto& session = corpus.sessions[it->second][*r.label];
    session.label = *r.label;
    session.frames.push_back(r.frame);
    seen[it->second][*r.label] = true;
  }
  for (std::size_t t = 0; t < tag_names.size(); ++t)
    for (int z = 0; z < zone_count; ++z)
      if (!seen[t][z])
        throw Error(fmt::format("sessions.csv: tag '{}' has no session for zone {}", tag_names[t], z));

  std::map<std::string, int> walk_index;
  for (const auto& r : read_frames(dir + "/walks.csv", sensor_count)) {
    auto [it, inserted] = walk_index.emplace(r.tag, static_cast<int>(corpus.walks.size()));
    if (inserted) corpus.walks.push_back({r.tag, {}, {}});
    if (!r.label) throw Error(fmt::format("walks.csv: frame of '{}' lacks a zone label", r.tag));
    corpus.walks[it->second].frames.push_back(r.frame);
    corpus.walks[it->second].labels.push_back(*r.label);
  }
  auto resolve = [&](const std::vector<std::string>& names, std::vector<int>& out) {
    for (const auto& n : names) {
      const auto it = walk_index.find(n);
      if (it == walk_index.end()) throw Error(fmt::format("manifest names unknown walk '{}'", n));
      out.push_back(it->second);
    }
  };
  resolve(val_names, corpus.validation_walks);
  resolve(test_names, corpus.test_walks);
  return corpus;
}

ZoneRecordings training_recordings(const Corpus& corpus, int sensor_count,
                                   const Normalization& norm, double dt) {
  const int zones = corpus.sessions.empty() ? 0 : static_cast<int>(corpus.sessions[0].size());
  ZoneRecordings out(zones, std::vector<StepSequence>(corpus.train_tags));
  parallel_for(static_cast<long>(zones) * corpus.train_tags, [&](long idx) {
    const int z = static_cast<int>(idx / corpus.train_tags);
    const int t = static_cast<int>(idx % corpus.train_tags);
    const auto& s = corpus.sessions[t][z];
    out[z][t] = to_steps(s.frames, sensor_count, dt, norm, s.label);
  });
  return out;
}

std::vector<LabeledTrajectory> test_sessions(const Corpus& corpus, int sensor_count,
                                             const Normalization& norm, double dt) {
  std::vector<LabeledTrajectory> out;
  for (int t = corpus.train_tags; t < corpus.tag_count(); ++t)
    for (const auto& s : corpus.sessions[t])
      out.push_back({to_steps(s.frames, sensor_count, dt, norm, s.label), std::nullopt});
  return out;
}

std::vector<LabeledRecording> pick_walks(const Corpus& corpus, std::span<const int> indices) {
  std::vector<LabeledRecording> out;
  for (int i : indices) out.push_back(corpus.walks.at(i));
  return out;
}

}  // namespace rtls
