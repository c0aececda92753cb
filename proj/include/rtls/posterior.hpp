#pragma once

#include <span>

#include "rtls/common.hpp"
#include "rtls/zone_graph.hpp"

namespace rtls {

/// k >= 1 is the mobility parameter (1 disables the constraint; larger values
/// make far moves less likely); delta_t is the time since the previous
/// decision in seconds.
struct ConstraintParams {
  double k = 40.0;
  double delta_t = 1.0;

  void validate() const;
};

struct PosteriorDecision {
  Vector constrained;
  ZoneId chosen = 0;
  /// Every finite-distance zone had zero raw probability; `chosen` is then the
  /// unconstrained argmax and callers should restart from it.
  bool fell_back = false;
};

/// Index of the largest entry; the lowest index wins ties.
ZoneId argmax(std::span<const double> values);

/// Unnormalized transition weights k^(-d(prev, n) / delta_t); zones with no
/// path from `prev` get 0.
Vector conditional_weights(const ZoneGraph& g, ZoneId prev, const ConstraintParams& params);

/// Re-weights classifier probabilities by the transition weights from the
/// previously decided zone and renormalizes.
PosteriorDecision apply_constraint(std::span<const double> probs, ZoneId prev,
                                   const ZoneGraph& g, const ConstraintParams& params);

}  // namespace rtls
