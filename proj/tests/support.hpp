#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rtls/eval.hpp"
#include "rtls/net.hpp"
#include "rtls/rng.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls::test {

std::vector<ZoneDef> numbered_zones(int n, int floor = 0);
ZoneGraph path_graph(int n);
ZoneGraph triangle_graph();
/// Erdos-Renyi graph; may be disconnected.
ZoneGraph random_graph(int zones, double edge_prob, Rng& rng);
/// Random spanning tree plus Erdos-Renyi extras; always connected.
ZoneGraph random_connected_graph(int zones, double extra_prob, Rng& rng);

/// Hop distance by a fresh BFS over the edge list; -1 when unreachable.
int bfs_oracle(int zones, const std::vector<ZonePair>& edges, int from, int to);

NetParams random_params(const NetShape& shape, std::uint64_t seed, double scale);
std::vector<Vector> random_inputs(int steps, int dim, Rng& rng);

/// Relative error with an absolute fallback for tiny analytic values.
struct GradientCheck {
  double worst_relative = 0.0;
  double worst_absolute = 0.0;
  std::size_t entries = 0;
  std::size_t failures = 0;
  std::string first_failure;
};

GradientCheck check_gradient(const NetShape& shape, int steps, std::uint64_t seed, double h,
                             double rel_tol, double abs_floor);

/// Direct quantifier implementations used as oracles for the metrics.
double brute_accuracy_star(const std::vector<TimedZone>& pred, const std::vector<TimedZone>& truth,
                           double window);
int brute_incorrect_changes(const std::vector<TimedZone>& pred,
                            const std::vector<TimedZone>& truth, double window);

std::vector<TimedZone> random_timeline(int steps, int zones, double switch_prob, Rng& rng);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace rtls::test
