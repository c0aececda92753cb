#include "rtls/posterior.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rtls {

void ConstraintParams::validate() const {
  if (!(k >= 1.0)) throw Error(fmt::format("constraint k must be >= 1, got {}", k));
  if (!(delta_t > 0.0)) throw Error(fmt::format("constraint delta_t must be > 0, got {}", delta_t));
}

ZoneId argmax(std::span<const double> values) {
  if (values.empty()) throw Error("argmax of an empty vector");
  return static_cast<ZoneId>(std::max_element(values.begin(), values.end()) - values.begin());
}

Vector conditional_weights(const ZoneGraph& g, ZoneId prev, const ConstraintParams& params) {
  params.validate();
  const auto row = g.distance_row(prev);
  Vector w(row.size());
  for (std::size_t n = 0; n < row.size(); ++n)
    w[n] = row[n] == kUnreachable ? 0.0 : std::pow(params.k, -row[n] / params.delta_t);
  return w;
}

PosteriorDecision apply_constraint(std::span<const double> probs, ZoneId prev,
                                   const ZoneGraph& g, const ConstraintParams& params) {
  if (static_cast<int>(probs.size()) != g.zone_count())
    throw Error(fmt::format("probability vector has {} entries, building has {} zones",
                            probs.size(), g.zone_count()));
  const auto w = conditional_weights(g, prev, params);
  PosteriorDecision d;
  d.constrained.resize(probs.size());
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    d.constrained[n] = probs[n] * w[n];
    total += d.constrained[n];
  }
  if (!(total > 0.0)) {
    d.constrained.assign(probs.begin(), probs.end());
    d.chosen = argmax(probs);
    d.fell_back = true;
    return d;
  }
  // Decide on the unnormalized products so division rounding cannot reorder ties.
  d.chosen = argmax(d.constrained);
  for (double& v : d.constrained) v /= total;
  return d;
}

}  // namespace rtls
