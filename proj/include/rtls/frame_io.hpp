#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rtls/building.hpp"
#include "rtls/signal_sim.hpp"

namespace rtls {

/// One line of a frame stream: timestamp, tag id, S readings (empty field =
/// missing), and an optional trailing ground-truth zone.
struct StreamRecord {
  std::string tag;
  RssiFrame frame;
  std::optional<ZoneId> label;
};

/// Writes the '#' provenance comment and the column header.
void write_frame_header(std::ostream& out, int sensor_count, bool labeled,
                        const Provenance& provenance);
void write_frame(std::ostream& out, const std::string& tag, const RssiFrame& frame,
                 std::optional<ZoneId> label = std::nullopt);

/// Incremental reader; '#' lines and the header row are skipped.
class FrameReader {
 public:
  FrameReader(std::istream& in, int sensor_count);

  /// False at end of input. Throws rtls::Error naming the line on bad input.
  bool next(StreamRecord& record);

 private:
  std::istream& in_;
  int sensors_;
  long line_ = 0;
};

std::vector<StreamRecord> read_frames(const std::string& path, int sensor_count);

}  // namespace rtls
