#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtls/building.hpp"
#include "rtls/dataset.hpp"
#include "rtls/eval.hpp"
#include "rtls/signal_sim.hpp"

namespace rtls {

/// How much synthetic data to record. Each tag records one session per zone;
/// the first `train_tags` tags feed training and validation, the remaining
/// `test_tags` are held out. Walks are split in half, validation first.
struct DataSpec {
  int train_tags = 6;
  int test_tags = 1;
  double session_seconds = 120.0;
  int walks = 10;
  double walk_seconds = 1200.0;
  double dwell_mean = 75.0;
  PropagationParams propagation;

  void validate() const;
};

struct Corpus {
  int train_tags = 0;
  std::vector<std::vector<ZoneSession>> sessions;  // [tag][zone]
  std::vector<LabeledRecording> walks;
  std::vector<int> validation_walks;
  std::vector<int> test_walks;

  int tag_count() const { return static_cast<int>(sessions.size()); }
};

/// Sessions and walks are generated in parallel, each from its own seeded
/// stream, so the result does not depend on the thread count.
Corpus generate_corpus(const ZoneGraph& g, const SensorLayout& layout, const DataSpec& spec,
                       std::uint64_t seed);

/// Writes sessions.csv, walks.csv, and manifest.json into `dir`.
void write_corpus(const Corpus& corpus, const std::string& dir, int sensor_count,
                  const Provenance& provenance);
Corpus read_corpus(const std::string& dir, int sensor_count, int zone_count);

/// Averaged single-zone recordings of the training tags, [zone][tag].
ZoneRecordings training_recordings(const Corpus& corpus, int sensor_count,
                                   const Normalization& norm, double dt = kDefaultStepInterval);

/// One labeled trajectory per zone session of every held-out tag.
std::vector<LabeledTrajectory> test_sessions(const Corpus& corpus, int sensor_count,
                                             const Normalization& norm,
                                             double dt = kDefaultStepInterval);

std::vector<LabeledRecording> pick_walks(const Corpus& corpus, std::span<const int> indices);

}  // namespace rtls
