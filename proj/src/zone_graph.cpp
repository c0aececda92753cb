#include "rtls/zone_graph.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "rtls/kernels.hpp"

namespace rtls {

ZoneGraph ZoneGraph::build(std::vector<ZoneDef> zones, std::span<const ZonePair> adjacency) {
  const int z = static_cast<int>(zones.size());
  std::unordered_set<std::string> names;
  for (const auto& def : zones) {
    if (!names.insert(def.name).second) throw Error(fmt::format("duplicate zone name '{}'", def.name));
  }

  std::set<ZonePair> unique;
  for (auto [a, b] : adjacency) {
    if (a < 0 || a >= z || b < 0 || b >= z)
      throw Error(fmt::format("adjacency ({}, {}) references a zone outside [0, {})", a, b, z));
    if (a == b) throw Error(fmt::format("zone {} is adjacent to itself", a));
    unique.insert(std::minmax(a, b));
  }

  ZoneGraph g;
  g.zones_ = std::move(zones);
  g.pairs_.assign(unique.begin(), unique.end());
  g.neighbors_.resize(z);
  for (auto [a, b] : g.pairs_) {
    g.neighbors_[a].push_back(b);
    g.neighbors_[b].push_back(a);
  }
  for (auto& n : g.neighbors_) std::sort(n.begin(), n.end());
  g.distance_ = kernels::parallel::all_pairs_hops(g.neighbors_, kUnreachable);
  return g;
}

int ZoneGraph::floor_count() const {
  std::set<int> floors;
  for (const auto& z : zones_) floors.insert(z.floor);
  return static_cast<int>(floors.size());
}

bool ZoneGraph::connected() const {
  return std::none_of(distance_.begin(), distance_.end(), [](int d) { return d == kUnreachable; });
}

ZoneId ZoneGraph::find(const std::string& name) const {
  for (ZoneId i = 0; i < zone_count(); ++i)
    if (zones_[i].name == name) return i;
  return -1;
}

ZoneId ZoneGraph::check(ZoneId z) const {
  if (z < 0 || z >= zone_count())
    throw Error(fmt::format("zone id {} outside [0, {})", z, zone_count()));
  return z;
}

}  // namespace rtls
