#include "mogp/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "mogp/error.hpp"

namespace mogp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double spectral_norm(int input_dim) { return std::pow(kTwoPi, 0.5 * input_dim); }

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SM: return "SM";
    case KernelFamily::MOSM: return "MOSM";
    case KernelFamily::CSM: return "CSM";
    case KernelFamily::SMLMC: return "SM-LMC";
    case KernelFamily::CONV: return "CONV";
    case KernelFamily::Noise: return "NOISE";
  }
  return "?";
}

KernelFamily parse_family(std::string_view name) {
  const std::string u = upper(name);
  if (u == "SM") return KernelFamily::SM;
  if (u == "MOSM") return KernelFamily::MOSM;
  if (u == "CSM") return KernelFamily::CSM;
  if (u == "SM-LMC" || u == "SMLMC" || u == "SM_LMC") return KernelFamily::SMLMC;
  if (u == "CONV") return KernelFamily::CONV;
  if (u == "NOISE") return KernelFamily::Noise;
  throw InvalidInput("unknown kernel family '" + std::string(name) + "'");
}

bool is_spectral(KernelFamily family) {
  return family == KernelFamily::SM || family == KernelFamily::MOSM || family == KernelFamily::CSM ||
         family == KernelFamily::SMLMC;
}

// ---- evaluation -------------------------------------------------------------

double sm_eval(const SMParams& p, Lag tau) {
  double k = 0.0;
  for (Eigen::Index q = 0; q < p.weight.size(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < tau.size(); ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    k += p.weight(q) * std::exp(-0.5 * quad) * std::cos(arg);
  }
  return k;
}

double mosm_cross(const MOSMParams& p, int i, int j, Lag tau) {
  const Eigen::Index Q = p.weight.rows();
  const Eigen::Index M = p.weight.cols();
  const double norm = spectral_norm(static_cast<int>(tau.size()));
  double k = 0.0;
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double wij = p.weight(q, i) * p.weight(q, j);
    if (wij == 0.0) continue;
    const Eigen::Index ri = q * M + i;
    const Eigen::Index rj = q * M + j;
    double log_amp = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < tau.size(); ++d) {
      const double a = p.variance(ri, d);
      const double b = p.variance(rj, d);
      const double s = a + b;
      const double var_ij = 2.0 * (a * b) / s;
      const double mean_ij = (a * p.mean(rj, d) + b * p.mean(ri, d)) / s;
      const double dm = p.mean(ri, d) - p.mean(rj, d);
      const double u = tau[d] + (p.delay(ri, d) - p.delay(rj, d));
      log_amp += 0.5 * std::log(var_ij) - 0.25 * dm * dm / s - 0.5 * var_ij * u * u;
      arg += u * mean_ij;
    }
    arg += p.phase(q, i) - p.phase(q, j);
    k += wij * norm * std::exp(log_amp) * std::cos(arg);
  }
  return k;
}

double csm_cross(const CSMParams& p, int i, int j, Lag tau) {
  double k = 0.0;
  for (Eigen::Index q = 0; q < p.amplitude.rows(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < tau.size(); ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    arg += p.phase(q, i) - p.phase(q, j);
    k += p.amplitude(q, i) * p.amplitude(q, j) * std::exp(-0.5 * quad) * std::cos(arg);
  }
  return k;
}

double smlmc_cross(const SMLMCParams& p, int i, int j, Lag tau) {
  double k = 0.0;
  for (Eigen::Index q = 0; q < p.mixing.rows(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < tau.size(); ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    k += p.mixing(q, i) * p.mixing(q, j) * std::exp(-0.5 * quad) * std::cos(arg);
  }
  return k;
}

double conv_cross(const ConvParams& p, int i, int j, Lag tau) {
  const Eigen::Index M = p.weight.cols();
  double k = 0.0;
  for (Eigen::Index q = 0; q < p.weight.rows(); ++q) {
    const double wij = p.weight(q, i) * p.weight(q, j);
    if (wij == 0.0) continue;
    double log_f = 0.0;
    for (std::size_t d = 0; d < tau.size(); ++d) {
      const double a = p.variance(q * M + i, d);
      const double b = p.variance(q * M + j, d);
      const double s = a + b;
      log_f += (0.25 * std::log(a) + 0.25 * std::log(b)) - 0.5 * std::log(0.5 * s) - tau[d] * tau[d] / s;
    }
    k += wij * std::exp(log_f);
  }
  return k;
}

double noise_cross(const NoiseParams& p, int i, int j, Lag tau) {
  if (i != j) return 0.0;
  if (!std::all_of(tau.begin(), tau.end(), [](double t) { return t == 0.0; })) return 0.0;
  return p.variance(i);
}

// ---- gradients --------------------------------------------------------------

void sm_gradient(const SMParams& p, Lag tau, double scale, std::span<double> grad) {
  const std::size_t P = tau.size();
  const std::size_t block = 1 + 2 * P;
  for (Eigen::Index q = 0; q < p.weight.size(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < P; ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    const double e = std::exp(-0.5 * quad);
    const double c = std::cos(arg);
    const double sn = std::sin(arg);
    const std::size_t base = q * block;
    grad[base] += scale * e * c;
    const double we = p.weight(q) * e;
    for (std::size_t d = 0; d < P; ++d) {
      grad[base + 1 + d] += scale * (-we * sn * tau[d]);
      grad[base + 1 + P + d] += scale * (-0.5 * we * c * tau[d] * tau[d]);
    }
  }
}

void mosm_gradient(const MOSMParams& p, int i, int j, Lag tau, double scale, std::span<double> grad) {
  const Eigen::Index Q = p.weight.rows();
  const Eigen::Index M = p.weight.cols();
  const std::size_t P = tau.size();
  const std::size_t block = 2 + 3 * P;
  const double norm = spectral_norm(static_cast<int>(P));
  for (Eigen::Index q = 0; q < Q; ++q) {
    const Eigen::Index ri = q * M + i;
    const Eigen::Index rj = q * M + j;
    double log_amp = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < P; ++d) {
      const double a = p.variance(ri, d);
      const double b = p.variance(rj, d);
      const double s = a + b;
      const double var_ij = 2.0 * (a * b) / s;
      const double mean_ij = (a * p.mean(rj, d) + b * p.mean(ri, d)) / s;
      const double dm = p.mean(ri, d) - p.mean(rj, d);
      const double u = tau[d] + (p.delay(ri, d) - p.delay(rj, d));
      log_amp += 0.5 * std::log(var_ij) - 0.25 * dm * dm / s - 0.5 * var_ij * u * u;
      arg += u * mean_ij;
    }
    arg += p.phase(q, i) - p.phase(q, j);
    const double r = norm * std::exp(log_amp);
    const double c = std::cos(arg);
    const double sn = std::sin(arg);
    const double amp = p.weight(q, i) * p.weight(q, j) * r;

    const std::size_t bi = static_cast<std::size_t>(ri) * block;
    const std::size_t bj = static_cast<std::size_t>(rj) * block;
    grad[bi] += scale * p.weight(q, j) * r * c;
    grad[bj] += scale * p.weight(q, i) * r * c;
    grad[bi + 1 + 3 * P] += scale * (-amp * sn);
    grad[bj + 1 + 3 * P] += scale * (amp * sn);
    if (amp == 0.0) continue;

    for (std::size_t d = 0; d < P; ++d) {
      const double a = p.variance(ri, d);
      const double b = p.variance(rj, d);
      const double s = a + b;
      const double s2 = s * s;
      const double var_ij = 2.0 * (a * b) / s;
      const double mean_ij = (a * p.mean(rj, d) + b * p.mean(ri, d)) / s;
      const double dm = p.mean(ri, d) - p.mean(rj, d);
      const double u = tau[d] + (p.delay(ri, d) - p.delay(rj, d));

      const double d_delay = amp * (-var_ij * u * c - sn * mean_ij);
      grad[bi + 1 + 2 * P + d] += scale * d_delay;
      grad[bj + 1 + 2 * P + d] -= scale * d_delay;

      grad[bi + 1 + d] += scale * (amp * c * (-0.5 * dm / s) - amp * sn * u * b / s);
      grad[bj + 1 + d] += scale * (amp * c * (0.5 * dm / s) - amp * sn * u * a / s);

      const double common = 0.25 * dm * dm / s2;
      grad[bi + 1 + P + d] +=
          scale * (amp * c * (0.5 * (1.0 / a - 1.0 / s) + common - u * u * b * b / s2) + amp * sn * u * b * dm / s2);
      grad[bj + 1 + P + d] +=
          scale * (amp * c * (0.5 * (1.0 / b - 1.0 / s) + common - u * u * a * a / s2) - amp * sn * u * a * dm / s2);
    }
  }
}

void csm_gradient(const CSMParams& p, int i, int j, Lag tau, double scale, std::span<double> grad) {
  const std::size_t P = tau.size();
  const std::size_t M = static_cast<std::size_t>(p.amplitude.cols());
  const std::size_t block = 2 * P + 2 * M;
  for (Eigen::Index q = 0; q < p.amplitude.rows(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < P; ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    arg += p.phase(q, i) - p.phase(q, j);
    const double e = std::exp(-0.5 * quad);
    const double c = std::cos(arg);
    const double sn = std::sin(arg);
    const double aa = p.amplitude(q, i) * p.amplitude(q, j);
    const std::size_t base = q * block;
    for (std::size_t d = 0; d < P; ++d) {
      grad[base + d] += scale * (-aa * e * sn * tau[d]);
      grad[base + P + d] += scale * (-0.5 * aa * e * c * tau[d] * tau[d]);
    }
    const std::size_t ai = base + 2 * P + 2 * static_cast<std::size_t>(i);
    const std::size_t aj = base + 2 * P + 2 * static_cast<std::size_t>(j);
    grad[ai] += scale * p.amplitude(q, j) * e * c;
    grad[aj] += scale * p.amplitude(q, i) * e * c;
    grad[ai + 1] += scale * (-aa * e * sn);
    grad[aj + 1] += scale * (aa * e * sn);
  }
}

void smlmc_gradient(const SMLMCParams& p, int i, int j, Lag tau, double scale, std::span<double> grad) {
  const std::size_t P = tau.size();
  const std::size_t M = static_cast<std::size_t>(p.mixing.cols());
  const std::size_t block = 2 * P + M;
  for (Eigen::Index q = 0; q < p.mixing.rows(); ++q) {
    double quad = 0.0;
    double arg = 0.0;
    for (std::size_t d = 0; d < P; ++d) {
      quad += p.variance(q, d) * tau[d] * tau[d];
      arg += p.mean(q, d) * tau[d];
    }
    const double e = std::exp(-0.5 * quad);
    const double c = std::cos(arg);
    const double sn = std::sin(arg);
    const double aa = p.mixing(q, i) * p.mixing(q, j);
    const std::size_t base = q * block;
    for (std::size_t d = 0; d < P; ++d) {
      grad[base + d] += scale * (-aa * e * sn * tau[d]);
      grad[base + P + d] += scale * (-0.5 * aa * e * c * tau[d] * tau[d]);
    }
    grad[base + 2 * P + i] += scale * p.mixing(q, j) * e * c;
    grad[base + 2 * P + j] += scale * p.mixing(q, i) * e * c;
  }
}

void conv_gradient(const ConvParams& p, int i, int j, Lag tau, double scale, std::span<double> grad) {
  const Eigen::Index M = p.weight.cols();
  const std::size_t P = tau.size();
  const std::size_t block = 1 + P;
  for (Eigen::Index q = 0; q < p.weight.rows(); ++q) {
    const Eigen::Index ri = q * M + i;
    const Eigen::Index rj = q * M + j;
    double log_f = 0.0;
    for (std::size_t d = 0; d < P; ++d) {
      const double a = p.variance(ri, d);
      const double b = p.variance(rj, d);
      const double s = a + b;
      log_f += (0.25 * std::log(a) + 0.25 * std::log(b)) - 0.5 * std::log(0.5 * s) - tau[d] * tau[d] / s;
    }
    const double f = std::exp(log_f);
    const std::size_t bi = static_cast<std::size_t>(ri) * block;
    const std::size_t bj = static_cast<std::size_t>(rj) * block;
    grad[bi] += scale * p.weight(q, j) * f;
    grad[bj] += scale * p.weight(q, i) * f;
    const double term = p.weight(q, i) * p.weight(q, j) * f;
    if (term == 0.0) continue;
    for (std::size_t d = 0; d < P; ++d) {
      const double a = p.variance(ri, d);
      const double b = p.variance(rj, d);
      const double s = a + b;
      const double t2 = tau[d] * tau[d] / (s * s);
      grad[bi + 1 + d] += scale * term * (0.25 / a - 0.5 / s + t2);
      grad[bj + 1 + d] += scale * term * (0.25 / b - 0.5 / s + t2);
    }
  }
}

void noise_gradient(const NoiseParams&, int i, int j, Lag tau, double scale, std::span<double> grad) {
  if (i != j) return;
  if (!std::all_of(tau.begin(), tau.end(), [](double t) { return t == 0.0; })) return;
  grad[i] += scale;
}

double evaluate(const KernelSpec& kernel, int i, int j, Lag tau) {
  return std::visit([&](const auto& p) { return cross(p, i, j, tau); }, kernel.params());
}

void accumulate_gradient(const KernelSpec& kernel, int i, int j, Lag tau, double scale, std::span<double> grad) {
  std::visit([&](const auto& p) { cross_gradient(p, i, j, tau, scale, grad); }, kernel.params());
}

}  // namespace mogp
