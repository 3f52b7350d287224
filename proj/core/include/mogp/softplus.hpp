#pragma once

namespace mogp {

// Smallest value softplus can return; keeps constrained parameters strictly positive.
inline constexpr double kSoftplusFloor = 1e-8;

// ln(1 + e^u) + kSoftplusFloor, stable for large |u|.
double softplus(double u);

// Inverse of softplus. Throws InvalidInput for v <= 0.
double softplus_inv(double v);

// d softplus / du, i.e. the logistic sigmoid.
double softplus_grad(double u);

}  // namespace mogp
