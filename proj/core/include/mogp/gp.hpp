#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mogp/kernels.hpp"

namespace mogp {

// N rows of (channel index, x in R^P). The flat N x (1+P) layout is available through to_matrix().
class AugmentedInput {
 public:
  AugmentedInput() = default;
  AugmentedInput(std::vector<int> channels, Eigen::MatrixXd x);

  // From an N x (1+P) matrix whose first column holds integral channel indices.
  static AugmentedInput from_matrix(const Eigen::MatrixXd& rows);
  Eigen::MatrixXd to_matrix() const;

  std::size_t size() const noexcept { return channels_.size(); }
  int input_dim() const noexcept { return static_cast<int>(x_.cols()); }
  int channel(std::size_t r) const { return channels_[r]; }
  const std::vector<int>& channels() const noexcept { return channels_; }
  const Eigen::MatrixXd& x() const noexcept { return x_; }

  // Per-channel row counts for channels 0..num_channels-1.
  std::vector<std::size_t> channel_counts(int num_channels) const;

 private:
  std::vector<int> channels_;
  Eigen::MatrixXd x_;  // N x P, row-major semantics: row r is the input of row r
};

// Worker threads used for Gram assembly; 1 disables threading. Reads MOGP_NUM_THREADS
// on first use when not set explicitly.
void set_num_threads(int threads);
int num_threads();

// K(r, s) = k_{c(r), c(s)}(x_r - x_s).
Eigen::MatrixXd build_gram(const KernelSpec& kernel, const AugmentedInput& a, const AugmentedInput& b);
Eigen::MatrixXd build_gram(const KernelSpec& kernel, const AugmentedInput& a);

struct CholeskyResult {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

// Tries K, then K + j I with j = 1e-10 * mean(diag K), growing x10 up to 1e-2 * mean(diag K).
CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& k);

struct TracePoint {
  int iteration = 0;
  double nlml = 0.0;
};

class ModelState {
 public:
  ModelState(KernelSpec kernel, Eigen::VectorXd noise, AugmentedInput inputs, Eigen::VectorXd targets);

  const KernelSpec& kernel() const noexcept { return kernel_; }
  const Eigen::VectorXd& noise() const noexcept { return noise_; }
  const AugmentedInput& inputs() const noexcept { return inputs_; }
  const Eigen::VectorXd& targets() const noexcept { return targets_; }

  void set_kernel(KernelSpec kernel);
  void set_noise(Eigen::VectorXd noise);

  // [pack_params(kernel), softplus_inv(noise)]
  Eigen::VectorXd unconstrained() const;
  void set_unconstrained(const Eigen::VectorXd& u);
  std::size_t parameter_count() const { return model_param_count(kernel_); }

  std::vector<TracePoint>& trace() noexcept { return trace_; }
  const std::vector<TracePoint>& trace() const noexcept { return trace_; }

  struct Factorization {
    Eigen::MatrixXd lower;
    Eigen::VectorXd alpha;  // K^-1 y
    double jitter = 0.0;
    double log_det = 0.0;
  };
  // Cholesky of K_kernel + diag(noise), computed on demand and cached until the next parameter write.
  const Factorization& factorization();
  const std::optional<Factorization>& cached_factorization() const noexcept { return cache_; }
  Factorization compute_factorization() const;

 private:
  void check_channels() const;

  KernelSpec kernel_;
  Eigen::VectorXd noise_;
  AugmentedInput inputs_;
  Eigen::VectorXd targets_;
  std::optional<Factorization> cache_;
  std::vector<TracePoint> trace_;
};

double nlml(ModelState& model);
// d NLML / d unconstrained parameter, ordered like ModelState::unconstrained().
Eigen::VectorXd nlml_grad(ModelState& model);

struct PredictionResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline constexpr double kBandMultiplier = 1.96;

// Uses the cached factorization when present, otherwise factorizes locally without touching the model.
PredictionResult predict(const ModelState& model, const AugmentedInput& query, bool include_noise);

// y = L z with z ~ N(0, I) from a generator seeded with `seed`.
Eigen::VectorXd sample_prior(const KernelSpec& kernel, const AugmentedInput& inputs, const Eigen::VectorXd& noise,
                             std::uint64_t seed);

}  // namespace mogp
