#include "support.hpp"

#include <cmath>
#include <deque>
#include <set>

#include <unistd.h>

#include <fmt/format.h>

namespace rtls::test {

std::vector<ZoneDef> numbered_zones(int n, int floor) {
  std::vector<ZoneDef> zones;
  for (int i = 0; i < n; ++i) zones.push_back({fmt::format("z{}", i), floor});
  return zones;
}

ZoneGraph path_graph(int n) {
  std::vector<ZonePair> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return ZoneGraph::build(numbered_zones(n), edges);
}

ZoneGraph triangle_graph() {
  const std::vector<ZonePair> edges{{0, 1}, {1, 2}, {0, 2}};
  return ZoneGraph::build(numbered_zones(3), edges);
}

ZoneGraph random_graph(int zones, double edge_prob, Rng& rng) {
  std::vector<ZonePair> edges;
  for (int i = 0; i < zones; ++i)
    for (int j = i + 1; j < zones; ++j)
      if (rng.uniform() < edge_prob) edges.emplace_back(i, j);
  return ZoneGraph::build(numbered_zones(zones), edges);
}

ZoneGraph random_connected_graph(int zones, double extra_prob, Rng& rng) {
  std::vector<ZonePair> edges;
  for (int i = 1; i < zones; ++i) edges.emplace_back(rng.uniform_int(0, i - 1), i);
  for (int i = 0; i < zones; ++i)
    for (int j = i + 1; j < zones; ++j)
      if (rng.uniform() < extra_prob) edges.emplace_back(i, j);
  return ZoneGraph::build(numbered_zones(zones), edges);
}

int bfs_oracle(int zones, const std::vector<ZonePair>& edges, int from, int to) {
  std::vector<int> dist(zones, -1);
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const auto& [a, b] : edges) {
      int v = -1;
      if (a == u) v = b;
      if (b == u) v = a;
      if (v >= 0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist[to];
}

NetParams random_params(const NetShape& shape, std::uint64_t seed, double scale) {
  auto p = NetParams::zeros(shape);
  Rng rng(seed);
  p.for_each_block([&](std::string_view, std::span<double> v) {
    for (auto& x : v) x = rng.uniform(-scale, scale);
  });
  return p;
}

std::vector<Vector> random_inputs(int steps, int dim, Rng& rng) {
  std::vector<Vector> xs(steps, Vector(dim));
  for (auto& x : xs)
    for (auto& v : x) v = rng.uniform();
  return xs;
}

GradientCheck check_gradient(const NetShape& shape, int steps, std::uint64_t seed, double h,
                             double rel_tol, double abs_floor) {
  Rng rng(seed, "gradcheck-data");
  auto params = random_params(shape, seed, 0.8);
  const auto inputs = random_inputs(steps, shape.input_dim, rng);
  std::vector<ZoneId> labels;
  for (int t = 0; t < steps; ++t) labels.push_back(rng.uniform_int(0, shape.class_dim - 1));
  const auto initial = RecurrentState::zeros(shape);

  auto objective = [&](const NetParams& p) {
    const auto probs = forward_sequence(p, inputs);
    double total = 0.0;
    for (int t = 0; t < steps; ++t) total += loss(probs[t], labels[t]);
    return total / steps;
  };

  const auto analytic = backward_from(params, inputs, labels, initial, 0.0, nullptr).grad;
  std::vector<std::pair<std::string, std::vector<double>>> grads;
  analytic.for_each_block([&](std::string_view name, std::span<const double> v) {
    grads.emplace_back(std::string(name), std::vector<double>(v.begin(), v.end()));
  });

  GradientCheck out;
  std::vector<std::span<double>> spans;
  params.for_each_block([&](std::string_view, std::span<double> v) { spans.push_back(v); });
  for (std::size_t block = 0; block < spans.size(); ++block) {
    for (std::size_t i = 0; i < spans[block].size(); ++i) {
      const double saved = spans[block][i];
      spans[block][i] = saved + h;
      const double up = objective(params);
      spans[block][i] = saved - h;
      const double down = objective(params);
      spans[block][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[block].second[i];
      ++out.entries;
      bool ok;
      if (std::abs(a) < abs_floor) {
        const double err = std::abs(a - numeric);
        out.worst_absolute = std::max(out.worst_absolute, err);
        ok = err < rel_tol;
      } else {
        const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
        out.worst_relative = std::max(out.worst_relative, rel);
        ok = rel <= rel_tol;
      }
      if (!ok) {
        if (out.failures == 0)
          out.first_failure =
              fmt::format("{}[{}]: analytic {} numeric {}", grads[block].first, i, a, numeric);
        ++out.failures;
      }
    }
  }
  return out;
}

double brute_accuracy_star(const std::vector<TimedZone>& pred, const std::vector<TimedZone>& truth,
                           double window) {
  if (pred.empty()) return 0.0;
  int hits = 0;
  for (const auto& p : pred) {
    bool any = false;
    for (const auto& t : truth)
      if (t.zone == p.zone && t.timestamp >= p.timestamp - window - 1e-9 &&
          t.timestamp <= p.timestamp + window + 1e-9)
        any = true;
    hits += any ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

struct Change {
  double t;
  ZoneId from;
  ZoneId to;
};

std::vector<Change> changes_of(const std::vector<TimedZone>& seq) {
  std::vector<Change> out;
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq[i].zone != seq[i - 1].zone) out.push_back({seq[i].timestamp, seq[i - 1].zone, seq[i].zone});
  return out;
}

}  // namespace

int brute_incorrect_changes(const std::vector<TimedZone>& pred,
                            const std::vector<TimedZone>& truth, double window) {
  const auto pc = changes_of(pred);
  const auto tc = changes_of(truth);
  std::set<std::size_t> used;
  int incorrect = 0;
  for (const auto& c : pc) {
    std::size_t pick = tc.size();
    for (std::size_t j = 0; j < tc.size(); ++j) {
      if (used.count(j) != 0) continue;
      if (tc[j].from != c.from || tc[j].to != c.to) continue;
      if (std::abs(tc[j].t - c.t) > window + 1e-9) continue;
      if (pick == tc.size() || tc[j].t < tc[pick].t) pick = j;
    }
    if (pick == tc.size())
      ++incorrect;
    else
      used.insert(pick);
  }
  return incorrect;
}

std::vector<TimedZone> random_timeline(int steps, int zones, double switch_prob, Rng& rng) {
  std::vector<TimedZone> out;
  ZoneId z = rng.uniform_int(0, zones - 1);
  for (int i = 0; i < steps; ++i) {
    if (i > 0 && rng.uniform() < switch_prob) z = rng.uniform_int(0, zones - 1);
    out.push_back({static_cast<double>(i + 1), z});
  }
  return out;
}

TempDir::TempDir(const std::string& stem) {
  static int counter = 0;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / fmt::format("{}-{}-{}", stem, ::getpid(), counter++);
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace rtls::test
