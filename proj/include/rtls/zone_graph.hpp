#pragma once

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtls/common.hpp"

namespace rtls {

struct ZoneDef {
  std::string name;
  int floor = 0;
};

using ZonePair = std::pair<ZoneId, ZoneId>;

/// Hop distance between zones in different connected components.
inline constexpr int kUnreachable = std::numeric_limits<int>::max();

/// Building zones, their adjacency, and the all-pairs hop-distance table
/// (minimum number of zone-boundary crossings). Immutable once built.
///
/// Floors are labels only; stairs and elevators are ordinary edges.
class ZoneGraph {
 public:
  /// Throws rtls::Error on out-of-range ids, self-adjacency, or duplicate
  /// zone names. Repeated pairs (in either orientation) collapse to one edge.
  static ZoneGraph build(std::vector<ZoneDef> zones, std::span<const ZonePair> adjacency);

  int zone_count() const { return static_cast<int>(zones_.size()); }
  const std::vector<ZoneDef>& zones() const { return zones_; }
  const std::string& name(ZoneId z) const { return zones_.at(check(z)).name; }
  int floor(ZoneId z) const { return zones_.at(check(z)).floor; }
  const std::vector<int>& neighbors(ZoneId z) const { return neighbors_.at(check(z)); }
  int floor_count() const;

  /// Hop count; kUnreachable when no path exists.
  int distance(ZoneId m, ZoneId n) const {
    return distance_[static_cast<std::size_t>(check(m)) * zone_count() + check(n)];
  }
  std::span<const int> distance_row(ZoneId m) const {
    return {distance_.data() + static_cast<std::size_t>(check(m)) * zone_count(),
            static_cast<std::size_t>(zone_count())};
  }
  bool adjacent(ZoneId m, ZoneId n) const { return m != n && distance(m, n) == 1; }
  bool connected() const;

  /// Adjacent pairs with first < second, lexicographically ordered.
  const std::vector<ZonePair>& connected_pairs() const { return pairs_; }

  /// Index of the zone with this name, or -1.
  ZoneId find(const std::string& name) const;

 private:
  ZoneId check(ZoneId z) const;

  std::vector<ZoneDef> zones_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<ZonePair> pairs_;
  std::vector<int> distance_;
};

inline ZoneGraph build_graph(std::vector<ZoneDef> zones, std::span<const ZonePair> adjacency) {
  return ZoneGraph::build(std::move(zones), adjacency);
}

inline int zone_distance(const ZoneGraph& g, ZoneId m, ZoneId n) { return g.distance(m, n); }

inline const std::vector<ZonePair>& connected_pairs(const ZoneGraph& g) {
  return g.connected_pairs();
}

}  // namespace rtls
