#include "mogp/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "mogp/error.hpp"
#include "mogp/softplus.hpp"

namespace mogp {

// ---- AugmentedInput ---------------------------------------------------------

AugmentedInput::AugmentedInput(std::vector<int> channels, Eigen::MatrixXd x)
    : channels_(std::move(channels)), x_(std::move(x)) {
  if (static_cast<Eigen::Index>(channels_.size()) != x_.rows())
    throw InvalidInput("augmented input: " + std::to_string(channels_.size()) + " channel indices for " +
                       std::to_string(x_.rows()) + " rows");
  for (int c : channels_)
    if (c < 0) throw InvalidInput("augmented input: negative channel index " + std::to_string(c));
  if (!x_.allFinite()) throw InvalidInput("augmented input: non-finite input value");
}

AugmentedInput AugmentedInput::from_matrix(const Eigen::MatrixXd& rows) {
  if (rows.cols() < 2) throw InvalidInput("augmented input matrix needs at least 2 columns (channel, x...)");
  std::vector<int> channels(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double c = rows(r, 0);
    if (c != std::floor(c) || c < 0.0)
      throw InvalidInput("augmented input: first column must hold non-negative integers (row " + std::to_string(r) +
                         ")");
    channels[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }
  return AugmentedInput(std::move(channels), rows.rightCols(rows.cols() - 1));
}

Eigen::MatrixXd AugmentedInput::to_matrix() const {
  Eigen::MatrixXd out(x_.rows(), x_.cols() + 1);
  for (Eigen::Index r = 0; r < x_.rows(); ++r) out(r, 0) = channels_[static_cast<std::size_t>(r)];
  out.rightCols(x_.cols()) = x_;
  return out;
}

std::vector<std::size_t> AugmentedInput::channel_counts(int num_channels) const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_channels, 0)), 0);
  for (int c : channels_)
    if (c < num_channels) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

// ---- threading --------------------------------------------------------------

namespace {

std::atomic<int> g_threads{0};

int threads_from_env() {
  if (const char* env = std::getenv("MOGP_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

template <typename F>
void parallel_rows(Eigen::Index rows, F&& body) {
  const int threads = static_cast<int>(std::min<Eigen::Index>(num_threads(), std::max<Eigen::Index>(rows, 1)));
  if (threads <= 1) {
    for (Eigen::Index r = 0; r < rows; ++r) body(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (Eigen::Index r = t; r < rows; r += threads) body(r);
    });
}

void check_kernel_inputs(const KernelSpec& kernel, const AugmentedInput& in) {
  if (kernel.family() != KernelFamily::Noise && in.size() > 0 && in.input_dim() != kernel.input_dim())
    throw InvalidInput("input dimension " + std::to_string(in.input_dim()) + " does not match kernel P=" +
                       std::to_string(kernel.input_dim()));
  for (std::size_t r = 0; r < in.size(); ++r)
    if (in.channel(r) >= kernel.channels())
      throw InvalidInput("channel index " + std::to_string(in.channel(r)) + " out of range for M=" +
                         std::to_string(kernel.channels()) + " (row " + std::to_string(r) + ")");
}

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

}  // namespace

void set_num_threads(int threads) { g_threads = std::max(threads, 1); }

int num_threads() {
  int n = g_threads.load();
  if (n == 0) {
    n = threads_from_env();
    g_threads = n;
  }
  return n;
}

// ---- Gram -------------------------------------------------------------------

Eigen::MatrixXd build_gram(const KernelSpec& kernel, const AugmentedInput& a, const AugmentedInput& b) {
  check_kernel_inputs(kernel, a);
  check_kernel_inputs(kernel, b);
  const auto n = static_cast<Eigen::Index>(a.size());
  const auto m = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd k(n, m);
  if (n == 0 || m == 0) return k;
  if (a.input_dim() != b.input_dim()) throw InvalidInput("build_gram: inputs differ in dimension");
  const Eigen::Index P = a.input_dim();
  std::visit(
      [&](const auto& p) {
        parallel_rows(n, [&](Eigen::Index r) {
          std::vector<double> tau(static_cast<std::size_t>(P));
          const int ci = a.channel(static_cast<std::size_t>(r));
          for (Eigen::Index s = 0; s < m; ++s) {
            for (Eigen::Index d = 0; d < P; ++d) tau[static_cast<std::size_t>(d)] = a.x()(r, d) - b.x()(s, d);
            k(r, s) = cross(p, ci, b.channel(static_cast<std::size_t>(s)), tau);
          }
        });
      },
      kernel.params());
  return k;
}

Eigen::MatrixXd build_gram(const KernelSpec& kernel, const AugmentedInput& a) {
  check_kernel_inputs(kernel, a);
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd k(n, n);
  const Eigen::Index P = a.input_dim();
  std::visit(
      [&](const auto& p) {
        parallel_rows(n, [&](Eigen::Index r) {
          std::vector<double> tau(static_cast<std::size_t>(P));
          const int ci = a.channel(static_cast<std::size_t>(r));
          for (Eigen::Index s = r; s < n; ++s) {
            for (Eigen::Index d = 0; d < P; ++d) tau[static_cast<std::size_t>(d)] = a.x()(r, d) - a.x()(s, d);
            k(r, s) = cross(p, ci, a.channel(static_cast<std::size_t>(s)), tau);
          }
        });
      },
      kernel.params());
  k.triangularView<Eigen::StrictlyLower>() = k.transpose().triangularView<Eigen::StrictlyLower>();
  return k;
}

// ---- Cholesky ---------------------------------------------------------------

CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw InvalidInput("cholesky: matrix is not square");
  if (!k.allFinite()) throw InvalidInput("cholesky: matrix has non-finite entries");
  const double scale = k.cwiseAbs().maxCoeff();
  if (k.rows() > 0 && (k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw InvalidInput("cholesky: matrix is not symmetric");
  if (k.rows() == 0) return {Eigen::MatrixXd(0, 0), 0.0};

  double mean_diag = k.diagonal().mean();
  if (!(mean_diag > 0.0)) mean_diag = 1.0;
  const double first = 1e-10 * mean_diag;
  const double last = 1e-2 * mean_diag;

  double jitter = 0.0;
  Eigen::MatrixXd work = k;
  for (;;) {
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), jitter};
    }
    const double next = jitter == 0.0 ? first : jitter * 10.0;
    if (next > last * (1.0 + 1e-12)) break;
    work.diagonal() += Eigen::VectorXd::Constant(k.rows(), next - jitter);
    jitter = next;
  }
  std::ostringstream msg;
  msg << "matrix is not positive definite even with jitter " << jitter;
  throw NotPositiveDefinite(msg.str(), jitter);
}

// ---- ModelState -------------------------------------------------------------

ModelState::ModelState(KernelSpec kernel, Eigen::VectorXd noise, AugmentedInput inputs, Eigen::VectorXd targets)
    : kernel_(std::move(kernel)), noise_(std::move(noise)), inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (static_cast<std::size_t>(targets_.size()) != inputs_.size())
    throw InvalidInput("model: " + std::to_string(targets_.size()) + " targets for " +
                       std::to_string(inputs_.size()) + " inputs");
  if (!targets_.allFinite()) throw InvalidInput("model: non-finite target value");
  set_noise(noise_);
  check_channels();
}

void ModelState::check_channels() const { check_kernel_inputs(kernel_, inputs_); }

void ModelState::set_kernel(KernelSpec kernel) {
  if (kernel.channels() != kernel_.channels())
    throw InvalidInput("model: kernel channel count cannot change");
  kernel_ = std::move(kernel);
  cache_.reset();
  check_channels();
}

void ModelState::set_noise(Eigen::VectorXd noise) {
  if (noise.size() != kernel_.channels())
    throw InvalidInput("model: expected " + std::to_string(kernel_.channels()) + " noise variances, got " +
                       std::to_string(noise.size()));
  if (!noise.allFinite() || (noise.array() < 0.0).any())
    throw InvalidInput("model: noise variances must be finite and non-negative");
  noise_ = std::move(noise);
  cache_.reset();
}

Eigen::VectorXd ModelState::unconstrained() const {
  const Eigen::VectorXd k = pack_params(kernel_);
  Eigen::VectorXd out(k.size() + noise_.size());
  out.head(k.size()) = k;
  for (Eigen::Index m = 0; m < noise_.size(); ++m) out(k.size() + m) = softplus_inv(noise_(m));
  return out;
}

void ModelState::set_unconstrained(const Eigen::VectorXd& u) {
  const auto nk = static_cast<Eigen::Index>(kernel_param_count(kernel_));
  if (u.size() != nk + noise_.size())
    throw InvalidInput("model: parameter vector has length " + std::to_string(u.size()) + ", expected " +
                       std::to_string(nk + noise_.size()));
  if (!u.allFinite()) throw InvalidInput("model: non-finite parameter value");
  KernelSpec kernel = unpack_params(kernel_, u.head(nk));
  Eigen::VectorXd noise(noise_.size());
  for (Eigen::Index m = 0; m < noise.size(); ++m) noise(m) = softplus(u(nk + m));
  kernel_ = std::move(kernel);
  noise_ = std::move(noise);
  cache_.reset();
}

ModelState::Factorization ModelState::compute_factorization() const {
  if (inputs_.size() == 0) throw InvalidInput("model has no training data");
  Eigen::MatrixXd k = build_gram(kernel_, inputs_);
  for (std::size_t r = 0; r < inputs_.size(); ++r)
    k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += noise_(inputs_.channel(r));
  CholeskyResult chol = cholesky_with_jitter(k);
  Factorization f;
  f.alpha = chol.lower.triangularView<Eigen::Lower>().solve(targets_);
  chol.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(f.alpha);
  f.log_det = 2.0 * chol.lower.diagonal().array().log().sum();
  f.jitter = chol.jitter;
  f.lower = std::move(chol.lower);
  return f;
}

const ModelState::Factorization& ModelState::factorization() {
  if (!cache_) cache_ = compute_factorization();
  return *cache_;
}

// ---- likelihood -------------------------------------------------------------

double nlml(ModelState& model) {
  const auto& f = model.factorization();
  const auto n = static_cast<double>(model.targets().size());
  return 0.5 * model.targets().dot(f.alpha) + 0.5 * f.log_det + 0.5 * n * kLog2Pi;
}

Eigen::VectorXd nlml_grad(ModelState& model) {
  const auto& f = model.factorization();
  const auto n = f.lower.rows();
  const KernelSpec& kernel = model.kernel();
  const AugmentedInput& in = model.inputs();

  // W = K^-1 - alpha alpha^T
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
  f.lower.triangularView<Eigen::Lower>().solveInPlace(w);
  w = (w.transpose() * w).eval();
  w.noalias() -= f.alpha * f.alpha.transpose();

  const auto nk = static_cast<Eigen::Index>(kernel_param_count(kernel));
  const Eigen::Index M = kernel.channels();
  std::vector<double> grad(static_cast<std::size_t>(nk), 0.0);
  const Eigen::Index P = in.input_dim();
  std::visit(
      [&](const auto& p) {
        std::vector<double> tau(static_cast<std::size_t>(P));
        for (Eigen::Index r = 0; r < n; ++r) {
          const int ci = in.channel(static_cast<std::size_t>(r));
          for (Eigen::Index s = r; s < n; ++s) {
            const double weight = (s == r ? 0.5 : 1.0) * w(r, s);
            for (Eigen::Index d = 0; d < P; ++d) tau[static_cast<std::size_t>(d)] = in.x()(r, d) - in.x()(s, d);
            cross_gradient(p, ci, in.channel(static_cast<std::size_t>(s)), tau, weight, grad);
          }
        }
      },
      kernel.params());

  Eigen::VectorXd out(nk + M);
  const Eigen::VectorXd values = constrained_values(kernel);
  const std::vector<bool> positive = positive_mask(kernel);
  auto chain = [](double v) { return v > 0.0 ? softplus_grad(softplus_inv(v)) : 0.0; };
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double g = grad[static_cast<std::size_t>(k)];
    out(k) = positive[static_cast<std::size_t>(k)] ? g * chain(values(k)) : g;
  }
  Eigen::VectorXd noise_grad = Eigen::VectorXd::Zero(M);
  for (Eigen::Index r = 0; r < n; ++r) noise_grad(in.channel(static_cast<std::size_t>(r))) += 0.5 * w(r, r);
  for (Eigen::Index m = 0; m < M; ++m) out(nk + m) = noise_grad(m) * chain(model.noise()(m));
  return out;
}

// ---- prediction -------------------------------------------------------------

PredictionResult predict(const ModelState& model, const AugmentedInput& query, bool include_noise) {
  std::optional<ModelState::Factorization> local;
  const ModelState::Factorization* f = nullptr;
  if (model.cached_factorization()) {
    f = &*model.cached_factorization();
  } else {
    local = model.compute_factorization();
    f = &*local;
  }
  const KernelSpec& kernel = model.kernel();
  const Eigen::MatrixXd k_star = build_gram(kernel, model.inputs(), query);

  PredictionResult out;
  out.mean = k_star.transpose() * f->alpha;
  const Eigen::MatrixXd v = f->lower.triangularView<Eigen::Lower>().solve(k_star);
  const auto q = static_cast<Eigen::Index>(query.size());
  out.variance.resize(q);
  const std::vector<double> zero(static_cast<std::size_t>(query.input_dim()), 0.0);
  for (Eigen::Index r = 0; r < q; ++r) {
    const int c = query.channel(static_cast<std::size_t>(r));
    double var = evaluate(kernel, c, c, zero) - v.col(r).squaredNorm();
    if (include_noise) var += model.noise()(c);
    out.variance(r) = std::max(var, 0.0);
  }
  const Eigen::ArrayXd half_width = kBandMultiplier * out.variance.array().sqrt();
  out.lower = out.mean.array() - half_width;
  out.upper = out.mean.array() + half_width;
  return out;
}

Eigen::VectorXd sample_prior(const KernelSpec& kernel, const AugmentedInput& inputs, const Eigen::VectorXd& noise,
                             std::uint64_t seed) {
  if (noise.size() != kernel.channels())
    throw InvalidInput("sample_prior: expected " + std::to_string(kernel.channels()) + " noise variances");
  Eigen::MatrixXd k = build_gram(kernel, inputs);
  for (std::size_t r = 0; r < inputs.size(); ++r)
    k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += noise(inputs.channel(r));
  const CholeskyResult chol = cholesky_with_jitter(k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(k.rows());
  for (Eigen::Index r = 0; r < z.size(); ++r) z(r) = normal(rng);
  return chol.lower.triangularView<Eigen::Lower>() * z;
}

}  // namespace mogp
