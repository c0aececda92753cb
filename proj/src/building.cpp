#include "rtls/building.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include <json.hpp>

#include "rtls/rng.hpp"

namespace rtls {

using nlohmann::json;

void BuildingSpec::validate() const {
  if (zones < 1) throw Error("building needs at least one zone");
  if (sensors < 1) throw Error("building needs at least one sensor");
  if (floors < 1 || floors > zones) throw Error("floor count must lie in [1, zones]");
  if (!(cell_size > 0.0)) throw Error("cell size must be positive");
}

BuildingSpec BuildingSpec::desk() { return {20, 25, 1, -1, 8.0, 0}; }

BuildingSpec BuildingSpec::paper() { return {115, 142, 3, 215, 8.0, 0}; }

namespace {

struct Cell {
  int floor, row, col;
};

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

Building generate_building(const BuildingSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, "building");

  // Zones per floor and their grid cells.
  std::vector<ZoneDef> defs;
  std::vector<Cell> cells;
  std::vector<int> cols_of_floor(spec.floors);
  for (int f = 0; f < spec.floors; ++f) {
    const int n = spec.zones / spec.floors + (f < spec.zones % spec.floors ? 1 : 0);
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    cols_of_floor[f] = cols;
    for (int i = 0; i < n; ++i) {
      cells.push_back({f, i / cols, i % cols});
      defs.push_back({fmt::format("F{}-Z{:02}", f + 1, i), f});
    }
  }
  auto zone_at = [&](int floor, int row, int col) -> int {
    for (int z = 0; z < static_cast<int>(cells.size()); ++z)
      if (cells[z].floor == floor && cells[z].row == row && cells[z].col == col) return z;
    return -1;
  };

  std::vector<ZonePair> same_floor, stairs;
  for (int z = 0; z < static_cast<int>(cells.size()); ++z) {
    const auto& c = cells[z];
    if (int r = zone_at(c.floor, c.row, c.col + 1); r >= 0) same_floor.emplace_back(z, r);
    if (int d = zone_at(c.floor, c.row + 1, c.col); d >= 0) same_floor.emplace_back(z, d);
    if (int u = zone_at(c.floor + 1, c.row, c.col); u >= 0) stairs.emplace_back(z, u);
  }
  const int candidates = static_cast<int>(same_floor.size() + stairs.size());
  const int target = spec.edges >= 0
                         ? spec.edges
                         : std::min(candidates, static_cast<int>(std::lround(spec.zones * 215.0 / 115.0)));
  if (target < spec.zones - 1 || target > candidates)
    throw Error(fmt::format("cannot build a connected building with {} zones and {} adjacent "
                            "pairs (feasible range [{}, {}])",
                            spec.zones, target, spec.zones - 1, candidates));

  std::shuffle(same_floor.begin(), same_floor.end(), rng.engine());
  std::shuffle(stairs.begin(), stairs.end(), rng.engine());
  std::vector<ZonePair> all = same_floor;
  all.insert(all.end(), stairs.begin(), stairs.end());
  std::vector<ZonePair> tree_order = all;
  std::shuffle(tree_order.begin(), tree_order.end(), rng.engine());

  DisjointSets sets(spec.zones);
  std::vector<ZonePair> chosen;
  for (const auto& e : tree_order)
    if (sets.unite(e.first, e.second)) chosen.push_back(e);
  for (const auto& e : all) {
    if (static_cast<int>(chosen.size()) >= target) break;
    if (std::find(chosen.begin(), chosen.end(), e) == chosen.end()) chosen.push_back(e);
  }

  Building b{ZoneGraph::build(defs, chosen), {}};

  SensorLayout& layout = b.layout;
  layout.zone_half_extent = 0.4 * spec.cell_size;
  layout.floor_height = 4.0;
  for (const auto& c : cells)
    layout.zone_anchor.push_back({(c.col + 0.5) * spec.cell_size, (c.row + 0.5) * spec.cell_size,
                                  c.floor});
  std::vector<ZoneId> homes(spec.zones);
  std::iota(homes.begin(), homes.end(), 0);
  std::shuffle(homes.begin(), homes.end(), rng.engine());
  const double half = 0.5 * spec.cell_size;
  for (int s = 0; s < spec.sensors; ++s) {
    const ZoneId z = s < spec.zones ? homes[s] : rng.uniform_int(0, spec.zones - 1);
    const Point& a = layout.zone_anchor[z];
    layout.sensor_zone.push_back(z);
    layout.sensor_position.push_back(
        {a.x + rng.uniform(-half, half), a.y + rng.uniform(-half, half), a.floor});
  }
  return b;
}

std::string digest_hex(std::uint64_t digest) { return fmt::format("{:016x}", digest); }

namespace {

json provenance_json(const Provenance& p) {
  return {{"seed", p.seed}, {"digest", digest_hex(p.digest)}};
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(fmt::format("invalid {} JSON: {}", what, e.what()));
  }
}

}  // namespace

std::string building_to_json(const ZoneGraph& g, const Provenance& provenance) {
  json zones = json::array();
  for (const auto& z : g.zones()) zones.push_back({{"name", z.name}, {"floor", z.floor}});
  json adjacency = json::array();
  for (auto [a, b] : g.connected_pairs()) adjacency.push_back({a, b});
  json doc = {{"format", "rtls-building"},
              {"version", 1},
              {"provenance", provenance_json(provenance)},
              {"zones", zones},
              {"adjacency", adjacency}};
  return doc.dump(1) + "\n";
}

ZoneGraph building_from_json(const std::string& text) {
  const json doc = parse(text, "building");
  try {
    std::vector<ZoneDef> zones;
    for (const auto& z : doc.at("zones"))
      zones.push_back({z.at("name").get<std::string>(), z.value("floor", 0)});
    std::vector<ZonePair> pairs;
    for (const auto& e : doc.at("adjacency")) {
      if (!e.is_array() || e.size() != 2) throw Error("adjacency entries must be [i, j] pairs");
      pairs.emplace_back(e[0].get<ZoneId>(), e[1].get<ZoneId>());
    }
    return ZoneGraph::build(std::move(zones), pairs);
  } catch (const json::exception& e) {
    throw Error(fmt::format("invalid building JSON: {}", e.what()));
  }
}

std::string layout_to_json(const SensorLayout& layout, const Provenance& provenance) {
  json anchors = json::array();
  for (const auto& a : layout.zone_anchor)
    anchors.push_back({{"x", a.x}, {"y", a.y}, {"floor", a.floor}});
  json sensors = json::array();
  for (int i = 0; i < layout.sensor_count(); ++i) {
    const auto& p = layout.sensor_position[i];
    sensors.push_back({{"x", p.x}, {"y", p.y}, {"floor", p.floor}, {"zone", layout.sensor_zone[i]}});
  }
  json doc = {{"format", "rtls-layout"},
              {"version", 1},
              {"provenance", provenance_json(provenance)},
              {"zone_half_extent", layout.zone_half_extent},
              {"floor_height", layout.floor_height},
              {"zone_anchors", anchors},
              {"sensors", sensors}};
  return doc.dump(1) + "\n";
}

SensorLayout layout_from_json(const std::string& text) {
  const json doc = parse(text, "layout");
  try {
    SensorLayout layout;
    layout.zone_half_extent = doc.at("zone_half_extent").get<double>();
    layout.floor_height = doc.at("floor_height").get<double>();
    for (const auto& a : doc.at("zone_anchors"))
      layout.zone_anchor.push_back({a.at("x").get<double>(), a.at("y").get<double>(),
                                    a.at("floor").get<int>()});
    for (const auto& s : doc.at("sensors")) {
      layout.sensor_position.push_back({s.at("x").get<double>(), s.at("y").get<double>(),
                                        s.at("floor").get<int>()});
      layout.sensor_zone.push_back(s.at("zone").get<ZoneId>());
    }
    return layout;
  } catch (const json::exception& e) {
    throw Error(fmt::format("invalid layout JSON: {}", e.what()));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path));
  out << contents;
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

ZoneGraph load_building(const std::string& path) { return building_from_json(read_file(path)); }

SensorLayout load_layout(const std::string& path) { return layout_from_json(read_file(path)); }

}  // namespace rtls
