#include "mogp/softplus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mogp/error.hpp"

namespace mogp {

double softplus(double u) {
  if (u > 30.0) return u + kSoftplusFloor;
  if (u < -30.0) return std::exp(u) + kSoftplusFloor;
  return std::log1p(std::exp(u)) + kSoftplusFloor;
}

double softplus_inv(double v) {
  if (!(v > 0.0)) throw InvalidInput("softplus_inv: value must be positive, got " + std::to_string(v));
  // values at or below the floor map to the far left tail
  const double s = std::max(v - kSoftplusFloor, std::numeric_limits<double>::min());
  if (s > 30.0) return s + std::log(-std::expm1(-s));
  return std::log(std::expm1(s));
}

double softplus_grad(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace mogp
