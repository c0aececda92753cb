#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtls {

/// Dense zone index in [0, Z).
using ZoneId = std::int32_t;

using Vector = std::vector<double>;

/// All recoverable failures in the library surface as this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing RSSI readings are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Tolerance used whenever two timestamps are compared for window membership.
inline constexpr double kTimeEps = 1e-9;

}  // namespace rtls
