#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace grasslab {

/// A Monte Carlo scalar with its standard error and provenance.
///
/// `lo`/`hi` are optional deterministic-or-CI bracket endpoints; estimators
/// that only produce a bracket set value to the geometric midpoint. They are
/// NaN when no bracket applies.
struct EstimateWithCI {
  double value = 0.0;
  double se = 0.0;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::string method;
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();

  bool has_bracket() const { return std::isfinite(lo) && std::isfinite(hi); }
  double ci_lo(double z = 2.0) const { return value - z * se; }
  double ci_hi(double z = 2.0) const { return value + z * se; }
};

}  // namespace grasslab
