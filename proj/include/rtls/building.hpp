#pragma once

#include <cstdint>
#include <string>

#include "rtls/signal_sim.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

/// Parameters of the synthetic building generator. Zones sit on a per-floor
/// grid of square cells; a random spanning tree over grid neighbors (and
/// vertically aligned cells on consecutive floors) guarantees connectivity,
/// then further same-floor neighbors, and only after those stair links, are
/// added until `edges` pairs are connected.
struct BuildingSpec {
  int zones = 20;
  int sensors = 25;
  int floors = 1;
  int edges = -1;  // < 0: min(candidate pairs, round(zones * 215 / 115))
  double cell_size = 8.0;
  std::uint64_t seed = 0;

  void validate() const;

  /// 20 zones, 25 sensors, one floor.
  static BuildingSpec desk();
  /// 115 zones, 142 sensors, 3 floors, 215 connected pairs.
  static BuildingSpec paper();
};

struct Building {
  ZoneGraph graph;
  SensorLayout layout;
};

Building generate_building(const BuildingSpec& spec);

/// Provenance stamped into every artifact file.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t digest = 0;
};

std::string digest_hex(std::uint64_t digest);

std::string building_to_json(const ZoneGraph& g, const Provenance& provenance = {});
ZoneGraph building_from_json(const std::string& text);
std::string layout_to_json(const SensorLayout& layout, const Provenance& provenance = {});
SensorLayout layout_from_json(const std::string& text);

ZoneGraph load_building(const std::string& path);
SensorLayout load_layout(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace rtls
