#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mogp {

enum class KernelFamily { SM, MOSM, CSM, SMLMC, CONV, Noise };

std::string_view to_string(KernelFamily family);
// Accepts "SM", "MOSM", "CSM", "SM-LMC" (or "SMLMC"), "CONV", "NOISE"; case-insensitive.
KernelFamily parse_family(std::string_view name);
// Families whose parameters describe Gaussian spectral components.
bool is_spectral(KernelFamily family);

// Lag between two inputs, x_r - x_s, length P.
using Lag = std::span<const double>;

// Spectral means are angular frequencies (radians per input unit) throughout.
// Diagonal covariances are stored as one row of P entries.

// Single-channel spectral mixture.
struct SMParams {
  Eigen::VectorXd weight;    // Q
  Eigen::MatrixXd mean;      // Q x P
  Eigen::MatrixXd variance;  // Q x P, spectral variance
};

// Multi-output spectral mixture; per-channel rows are indexed q * M + i.
struct MOSMParams {
  Eigen::MatrixXd weight;    // Q x M
  Eigen::MatrixXd mean;      // QM x P
  Eigen::MatrixXd variance;  // QM x P
  Eigen::MatrixXd delay;     // QM x P, input units
  Eigen::MatrixXd phase;     // Q x M, radians
};

// Cross-spectral mixture: shared spectral Gaussians, per-channel amplitude and phase.
struct CSMParams {
  Eigen::MatrixXd mean;       // Q x P
  Eigen::MatrixXd variance;   // Q x P
  Eigen::MatrixXd amplitude;  // Q x M
  Eigen::MatrixXd phase;      // Q x M
};

// Linear model of coregionalization over SM basis kernels, one latent per component.
struct SMLMCParams {
  Eigen::MatrixXd mean;      // Q x P
  Eigen::MatrixXd variance;  // Q x P
  Eigen::MatrixXd mixing;    // Q x M
};

// Convolution of latent white noise with per-channel Gaussian smoothers.
struct ConvParams {
  Eigen::MatrixXd weight;    // Q x M
  Eigen::MatrixXd variance;  // QM x P, smoothing variance (input units^2)
};

// Per-channel white noise at exactly zero lag. Used for testing Gram assembly.
struct NoiseParams {
  Eigen::VectorXd variance;  // M
};

class KernelSpec {
 public:
  using Params = std::variant<SMParams, MOSMParams, CSMParams, SMLMCParams, ConvParams, NoiseParams>;

  // Parameters with neutral defaults: unit weights/variances, zero means, delays and phases.
  static KernelSpec make(KernelFamily family, int channels, int components, int input_dim);

  // Dimensions are read off the parameter shapes; throws InvalidInput when inconsistent
  // or when a positivity/non-negativity invariant is violated.
  explicit KernelSpec(Params params);

  KernelFamily family() const noexcept;
  int channels() const noexcept { return channels_; }
  int components() const noexcept { return components_; }
  int input_dim() const noexcept { return input_dim_; }

  const Params& params() const noexcept { return params_; }

  template <typename T>
  const T& get() const {
    return std::get<T>(params_);
  }

  // Re-checks invariants after in-place edits through mutable_params().
  void validate() const;
  Params& mutable_params() noexcept { return params_; }

 private:
  Params params_;
  int channels_ = 0;
  int components_ = 0;
  int input_dim_ = 0;
};

// Cross-covariance k_ij(tau) for each family.
double sm_eval(const SMParams& p, Lag tau);
double mosm_cross(const MOSMParams& p, int i, int j, Lag tau);
double csm_cross(const CSMParams& p, int i, int j, Lag tau);
double smlmc_cross(const SMLMCParams& p, int i, int j, Lag tau);
double conv_cross(const ConvParams& p, int i, int j, Lag tau);
double noise_cross(const NoiseParams& p, int i, int j, Lag tau);

// Adds scale * dk_ij(tau)/dtheta into grad, indexed in pack order over constrained values.
void sm_gradient(const SMParams& p, Lag tau, double scale, std::span<double> grad);
void mosm_gradient(const MOSMParams& p, int i, int j, Lag tau, double scale, std::span<double> grad);
void csm_gradient(const CSMParams& p, int i, int j, Lag tau, double scale, std::span<double> grad);
void smlmc_gradient(const SMLMCParams& p, int i, int j, Lag tau, double scale, std::span<double> grad);
void conv_gradient(const ConvParams& p, int i, int j, Lag tau, double scale, std::span<double> grad);
void noise_gradient(const NoiseParams& p, int i, int j, Lag tau, double scale, std::span<double> grad);

double evaluate(const KernelSpec& kernel, int i, int j, Lag tau);
void accumulate_gradient(const KernelSpec& kernel, int i, int j, Lag tau, double scale, std::span<double> grad);

// Overload set used by generic loops that dispatch on the parameter type once.
inline double cross(const SMParams& p, int, int, Lag tau) { return sm_eval(p, tau); }
inline double cross(const MOSMParams& p, int i, int j, Lag tau) { return mosm_cross(p, i, j, tau); }
inline double cross(const CSMParams& p, int i, int j, Lag tau) { return csm_cross(p, i, j, tau); }
inline double cross(const SMLMCParams& p, int i, int j, Lag tau) { return smlmc_cross(p, i, j, tau); }
inline double cross(const ConvParams& p, int i, int j, Lag tau) { return conv_cross(p, i, j, tau); }
inline double cross(const NoiseParams& p, int i, int j, Lag tau) { return noise_cross(p, i, j, tau); }

inline void cross_gradient(const SMParams& p, int, int, Lag tau, double s, std::span<double> g) {
  sm_gradient(p, tau, s, g);
}
inline void cross_gradient(const MOSMParams& p, int i, int j, Lag tau, double s, std::span<double> g) {
  mosm_gradient(p, i, j, tau, s, g);
}
inline void cross_gradient(const CSMParams& p, int i, int j, Lag tau, double s, std::span<double> g) {
  csm_gradient(p, i, j, tau, s, g);
}
inline void cross_gradient(const SMLMCParams& p, int i, int j, Lag tau, double s, std::span<double> g) {
  smlmc_gradient(p, i, j, tau, s, g);
}
inline void cross_gradient(const ConvParams& p, int i, int j, Lag tau, double s, std::span<double> g) {
  conv_gradient(p, i, j, tau, s, g);
}
inline void cross_gradient(const NoiseParams& p, int i, int j, Lag tau, double s, std::span<double> g) {
  noise_gradient(p, i, j, tau, s, g);
}

// ---- parameter vectors ------------------------------------------------------
//
// Pack order is component-major, then channel, then field in declaration order:
//   SM     per q:          w, mu[P], var[P]
//   MOSM   per (q, i):     w, mu[P], var[P], delay[P], phase
//   CSM    per q:          mu[P], var[P], then per i: amplitude, phase
//   SM-LMC per q:          mu[P], var[P], mixing[M]
//   CONV   per (q, i):     w, var[P]
//   NOISE  per i:          variance
// Weights, amplitudes and variances are positive and travel through softplus in the
// unconstrained vector; means, delays, phases and mixing weights are unconstrained.

std::size_t kernel_param_count(const KernelSpec& kernel);
// Kernel parameters plus one noise variance per channel.
std::size_t model_param_count(const KernelSpec& kernel);

Eigen::VectorXd constrained_values(const KernelSpec& kernel);
std::vector<bool> positive_mask(const KernelSpec& kernel);
std::vector<std::string> parameter_names(const KernelSpec& kernel);

Eigen::VectorXd pack_params(const KernelSpec& kernel);
KernelSpec unpack_params(const KernelSpec& like, const Eigen::VectorXd& unconstrained);
// Same layout, but the vector holds constrained values directly.
KernelSpec with_constrained_values(const KernelSpec& like, const Eigen::VectorXd& values);

}  // namespace mogp
