#include "rtls/frame_io.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>

namespace rtls {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view s, long line) {
  // std::from_chars for double is unavailable on older toolchains.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw Error(fmt::format("line {}: '{}' is not a number", line, tmp));
  return v;
}

int parse_int(std::string_view s, long line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(fmt::format("line {}: '{}' is not an integer zone id", line, std::string(s)));
  return v;
}

}  // namespace

void write_frame_header(std::ostream& out, int sensor_count, bool labeled,
                        const Provenance& provenance) {
  out << fmt::format("# rtls-frames v1 seed={} digest={}\n", provenance.seed,
                     digest_hex(provenance.digest));
  out << "timestamp,tag";
  for (int i = 0; i < sensor_count; ++i) out << ",s" << i;
  if (labeled) out << ",zone";
  out << '\n';
}

void write_frame(std::ostream& out, const std::string& tag, const RssiFrame& frame,
                 std::optional<ZoneId> label) {
  std::string line = fmt::format("{},{}", frame.timestamp, tag);
  for (double v : frame.values) {
    line += ',';
    if (!is_missing(v)) line += fmt::format("{}", v);
  }
  if (label) line += fmt::format(",{}", *label);
  line += '\n';
  out << line;
}

FrameReader::FrameReader(std::istream& in, int sensor_count) : in_(in), sensors_(sensor_count) {}

bool FrameReader::next(StreamRecord& record) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("timestamp,", 0) == 0) continue;
    const auto fields = split_fields(line);
    const auto n = static_cast<int>(fields.size());
    if (n != sensors_ + 2 && n != sensors_ + 3)
      throw Error(fmt::format("line {}: expected {} or {} fields for {} sensors, found {}", line_,
                              sensors_ + 2, sensors_ + 3, sensors_, n));
    record.frame.timestamp = parse_double(fields[0], line_);
    record.tag = std::string(fields[1]);
    if (record.tag.empty()) throw Error(fmt::format("line {}: empty tag id", line_));
    record.frame.values.assign(sensors_, kMissing);
    for (int i = 0; i < sensors_; ++i)
      if (!fields[i + 2].empty()) record.frame.values[i] = parse_double(fields[i + 2], line_);
    record.label.reset();
    if (n == sensors_ + 3) record.label = parse_int(fields[n - 1], line_);
    return true;
  }
  return false;
}

std::vector<StreamRecord> read_frames(const std::string& path, int sensor_count) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  FrameReader reader(in, sensor_count);
  std::vector<StreamRecord> out;
  StreamRecord r;
  while (reader.next(r)) out.push_back(r);
  return out;
}

}  // namespace rtls
