#include <cmath>
#include <string>

#include "mogp/error.hpp"
#include "mogp/kernels.hpp"
#include "mogp/softplus.hpp"

namespace mogp {
namespace {

// Calls f(value, positive, name) for every trainable scalar in pack order.
template <typename F>
void visit_fields(SMParams& p, F&& f) {
  const Eigen::Index P = p.mean.cols();
  for (Eigen::Index q = 0; q < p.weight.size(); ++q) {
    const std::string c = "q" + std::to_string(q);
    f(p.weight(q), true, c + ".weight");
    for (Eigen::Index d = 0; d < P; ++d) f(p.mean(q, d), false, c + ".mean[" + std::to_string(d) + "]");
    for (Eigen::Index d = 0; d < P; ++d) f(p.variance(q, d), true, c + ".variance[" + std::to_string(d) + "]");
  }
}

template <typename F>
void visit_fields(MOSMParams& p, F&& f) {
  const Eigen::Index Q = p.weight.rows();
  const Eigen::Index M = p.weight.cols();
  const Eigen::Index P = p.mean.cols();
  for (Eigen::Index q = 0; q < Q; ++q) {
    for (Eigen::Index i = 0; i < M; ++i) {
      const std::string c = "q" + std::to_string(q) + ".ch" + std::to_string(i);
      const Eigen::Index r = q * M + i;
      f(p.weight(q, i), true, c + ".weight");
      for (Eigen::Index d = 0; d < P; ++d) f(p.mean(r, d), false, c + ".mean[" + std::to_string(d) + "]");
      for (Eigen::Index d = 0; d < P; ++d) f(p.variance(r, d), true, c + ".variance[" + std::to_string(d) + "]");
      for (Eigen::Index d = 0; d < P; ++d) f(p.delay(r, d), false, c + ".delay[" + std::to_string(d) + "]");
      f(p.phase(q, i), false, c + ".phase");
    }
  }
}

template <typename F>
void visit_fields(CSMParams& p, F&& f) {
  const Eigen::Index P = p.mean.cols();
  for (Eigen::Index q = 0; q < p.amplitude.rows(); ++q) {
    const std::string c = "q" + std::to_string(q);
    for (Eigen::Index d = 0; d < P; ++d) f(p.mean(q, d), false, c + ".mean[" + std::to_string(d) + "]");
    for (Eigen::Index d = 0; d < P; ++d) f(p.variance(q, d), true, c + ".variance[" + std::to_string(d) + "]");
    for (Eigen::Index i = 0; i < p.amplitude.cols(); ++i) {
      const std::string ch = c + ".ch" + std::to_string(i);
      f(p.amplitude(q, i), true, ch + ".amplitude");
      f(p.phase(q, i), false, ch + ".phase");
    }
  }
}

template <typename F>
void visit_fields(SMLMCParams& p, F&& f) {
  const Eigen::Index P = p.mean.cols();
  for (Eigen::Index q = 0; q < p.mixing.rows(); ++q) {
    const std::string c = "q" + std::to_string(q);
    for (Eigen::Index d = 0; d < P; ++d) f(p.mean(q, d), false, c + ".mean[" + std::to_string(d) + "]");
    for (Eigen::Index d = 0; d < P; ++d) f(p.variance(q, d), true, c + ".variance[" + std::to_string(d) + "]");
    for (Eigen::Index i = 0; i < p.mixing.cols(); ++i) f(p.mixing(q, i), false, c + ".ch" + std::to_string(i) + ".mixing");
  }
}

template <typename F>
void visit_fields(ConvParams& p, F&& f) {
  const Eigen::Index M = p.weight.cols();
  const Eigen::Index P = p.variance.cols();
  for (Eigen::Index q = 0; q < p.weight.rows(); ++q) {
    for (Eigen::Index i = 0; i < M; ++i) {
      const std::string c = "q" + std::to_string(q) + ".ch" + std::to_string(i);
      f(p.weight(q, i), true, c + ".weight");
      for (Eigen::Index d = 0; d < P; ++d) f(p.variance(q * M + i, d), true, c + ".variance[" + std::to_string(d) + "]");
    }
  }
}

template <typename F>
void visit_fields(NoiseParams& p, F&& f) {
  for (Eigen::Index i = 0; i < p.variance.size(); ++i) f(p.variance(i), true, "ch" + std::to_string(i) + ".variance");
}

template <typename F>
void visit_all(const KernelSpec& spec, F&& f) {
  KernelSpec::Params copy = spec.params();
  std::visit([&](auto& p) { visit_fields(p, f); }, copy);
}

bool shape_is(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  return m.rows() == rows && m.cols() == cols;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput("kernel parameters: " + what);
}

void require_positive(const Eigen::MatrixXd& m, const char* name) {
  require(m.allFinite(), std::string(name) + " must be finite");
  require((m.array() > 0.0).all(), std::string(name) + " must be positive");
}

void require_nonnegative(const Eigen::MatrixXd& m, const char* name) {
  require(m.allFinite(), std::string(name) + " must be finite");
  require((m.array() >= 0.0).all(), std::string(name) + " must be non-negative");
}

struct Dims {
  int channels;
  int components;
  int input_dim;
};

Dims check(const SMParams& p) {
  const auto Q = p.weight.size();
  const auto P = p.mean.cols();
  require(Q >= 1 && P >= 1, "SM needs at least one component and one input dimension");
  require(shape_is(p.mean, Q, P) && shape_is(p.variance, Q, P), "SM shape mismatch");
  require_nonnegative(p.weight, "SM weight");
  require(p.mean.allFinite(), "SM mean must be finite");
  require_positive(p.variance, "SM variance");
  return {1, static_cast<int>(Q), static_cast<int>(P)};
}

Dims check(const MOSMParams& p) {
  const auto Q = p.weight.rows();
  const auto M = p.weight.cols();
  const auto P = p.mean.cols();
  require(Q >= 1 && M >= 1 && P >= 1, "MOSM needs Q, M, P >= 1");
  require(shape_is(p.mean, Q * M, P) && shape_is(p.variance, Q * M, P) && shape_is(p.delay, Q * M, P) &&
              shape_is(p.phase, Q, M),
          "MOSM shape mismatch");
  require_nonnegative(p.weight, "MOSM weight");
  require(p.mean.allFinite() && p.delay.allFinite() && p.phase.allFinite(), "MOSM mean/delay/phase must be finite");
  require_positive(p.variance, "MOSM variance");
  return {static_cast<int>(M), static_cast<int>(Q), static_cast<int>(P)};
}

Dims check(const CSMParams& p) {
  const auto Q = p.amplitude.rows();
  const auto M = p.amplitude.cols();
  const auto P = p.mean.cols();
  require(Q >= 1 && M >= 1 && P >= 1, "CSM needs Q, M, P >= 1");
  require(shape_is(p.mean, Q, P) && shape_is(p.variance, Q, P) && shape_is(p.phase, Q, M), "CSM shape mismatch");
  require_nonnegative(p.amplitude, "CSM amplitude");
  require(p.mean.allFinite() && p.phase.allFinite(), "CSM mean/phase must be finite");
  require_positive(p.variance, "CSM variance");
  return {static_cast<int>(M), static_cast<int>(Q), static_cast<int>(P)};
}

Dims check(const SMLMCParams& p) {
  const auto Q = p.mixing.rows();
  const auto M = p.mixing.cols();
  const auto P = p.mean.cols();
  require(Q >= 1 && M >= 1 && P >= 1, "SM-LMC needs Q, M, P >= 1");
  require(shape_is(p.mean, Q, P) && shape_is(p.variance, Q, P), "SM-LMC shape mismatch");
  require(p.mean.allFinite() && p.mixing.allFinite(), "SM-LMC mean/mixing must be finite");
  require_positive(p.variance, "SM-LMC variance");
  return {static_cast<int>(M), static_cast<int>(Q), static_cast<int>(P)};
}

Dims check(const ConvParams& p) {
  const auto Q = p.weight.rows();
  const auto M = p.weight.cols();
  const auto P = p.variance.cols();
  require(Q >= 1 && M >= 1 && P >= 1, "CONV needs Q, M, P >= 1");
  require(shape_is(p.variance, Q * M, P), "CONV shape mismatch");
  require_nonnegative(p.weight, "CONV weight");
  require_positive(p.variance, "CONV variance");
  return {static_cast<int>(M), static_cast<int>(Q), static_cast<int>(P)};
}

Dims check(const NoiseParams& p) {
  require(p.variance.size() >= 1, "NOISE needs at least one channel");
  require_nonnegative(p.variance, "NOISE variance");
  // Input dimension is not encoded in the noise parameters.
  return {static_cast<int>(p.variance.size()), 1, 0};
}

}  // namespace

KernelSpec::KernelSpec(Params params) : params_(std::move(params)) {
  const Dims dims = std::visit([](const auto& p) { return check(p); }, params_);
  channels_ = dims.channels;
  components_ = dims.components;
  input_dim_ = dims.input_dim;
}

KernelSpec KernelSpec::make(KernelFamily family, int channels, int components, int input_dim) {
  if (channels < 1 || components < 1 || input_dim < 1)
    throw InvalidInput("kernel dimensions must be >= 1");
  const Eigen::Index M = channels;
  const Eigen::Index Q = components;
  const Eigen::Index P = input_dim;
  auto ones = [](Eigen::Index r, Eigen::Index c) { return Eigen::MatrixXd::Ones(r, c); };
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return Eigen::MatrixXd::Zero(r, c); };
  switch (family) {
    case KernelFamily::SM:
      if (channels != 1) throw InvalidInput("SM kernel is single-channel; got M=" + std::to_string(channels));
      return KernelSpec(SMParams{Eigen::VectorXd::Ones(Q), zeros(Q, P), ones(Q, P)});
    case KernelFamily::MOSM:
      return KernelSpec(MOSMParams{ones(Q, M), zeros(Q * M, P), ones(Q * M, P), zeros(Q * M, P), zeros(Q, M)});
    case KernelFamily::CSM:
      return KernelSpec(CSMParams{zeros(Q, P), ones(Q, P), ones(Q, M), zeros(Q, M)});
    case KernelFamily::SMLMC:
      return KernelSpec(SMLMCParams{zeros(Q, P), ones(Q, P), ones(Q, M)});
    case KernelFamily::CONV:
      return KernelSpec(ConvParams{ones(Q, M), ones(Q * M, P)});
    case KernelFamily::Noise: {
      KernelSpec spec(NoiseParams{Eigen::VectorXd::Ones(M)});
      spec.input_dim_ = input_dim;
      return spec;
    }
  }
  throw InvalidInput("unknown kernel family");
}

KernelFamily KernelSpec::family() const noexcept {
  switch (params_.index()) {
    case 0: return KernelFamily::SM;
    case 1: return KernelFamily::MOSM;
    case 2: return KernelFamily::CSM;
    case 3: return KernelFamily::SMLMC;
    case 4: return KernelFamily::CONV;
    default: return KernelFamily::Noise;
  }
}

void KernelSpec::validate() const {
  const Dims dims = std::visit([](const auto& p) { return check(p); }, params_);
  if (dims.channels != channels_ || dims.components != components_ ||
      (family() != KernelFamily::Noise && dims.input_dim != input_dim_))
    throw InvalidInput("kernel parameters: dimensions changed after construction");
}

std::size_t kernel_param_count(const KernelSpec& kernel) {
  const std::size_t M = kernel.channels();
  const std::size_t Q = kernel.components();
  const std::size_t P = kernel.input_dim();
  switch (kernel.family()) {
    case KernelFamily::SM: return Q * (1 + 2 * P);
    case KernelFamily::MOSM: return Q * M * (2 + 3 * P);
    case KernelFamily::CSM: return Q * (2 * P + 2 * M);
    case KernelFamily::SMLMC: return Q * (2 * P + M);
    case KernelFamily::CONV: return Q * M * (1 + P);
    case KernelFamily::Noise: return M;
  }
  return 0;
}

std::size_t model_param_count(const KernelSpec& kernel) {
  return kernel_param_count(kernel) + static_cast<std::size_t>(kernel.channels());
}

Eigen::VectorXd constrained_values(const KernelSpec& kernel) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(kernel_param_count(kernel)));
  Eigen::Index k = 0;
  visit_all(kernel, [&](double& v, bool, const std::string&) { out(k++) = v; });
  return out;
}

std::vector<bool> positive_mask(const KernelSpec& kernel) {
  std::vector<bool> out;
  out.reserve(kernel_param_count(kernel));
  visit_all(kernel, [&](double&, bool positive, const std::string&) { out.push_back(positive); });
  return out;
}

std::vector<std::string> parameter_names(const KernelSpec& kernel) {
  std::vector<std::string> out;
  const std::string prefix(to_string(kernel.family()));
  visit_all(kernel, [&](double&, bool, const std::string& name) { out.push_back(prefix + "." + name); });
  return out;
}

Eigen::VectorXd pack_params(const KernelSpec& kernel) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(kernel_param_count(kernel)));
  Eigen::Index k = 0;
  visit_all(kernel, [&](double& v, bool positive, const std::string&) { out(k++) = positive ? softplus_inv(v) : v; });
  return out;
}

KernelSpec with_constrained_values(const KernelSpec& like, const Eigen::VectorXd& values) {
  const auto n = static_cast<Eigen::Index>(kernel_param_count(like));
  if (values.size() != n)
    throw InvalidInput("parameter vector has length " + std::to_string(values.size()) + ", expected " +
                       std::to_string(n));
  KernelSpec out = like;
  Eigen::Index k = 0;
  std::visit([&](auto& p) { visit_fields(p, [&](double& v, bool, const std::string&) { v = values(k++); }); },
             out.mutable_params());
  out.validate();
  return out;
}

KernelSpec unpack_params(const KernelSpec& like, const Eigen::VectorXd& unconstrained) {
  const auto n = static_cast<Eigen::Index>(kernel_param_count(like));
  if (unconstrained.size() != n)
    throw InvalidInput("parameter vector has length " + std::to_string(unconstrained.size()) + ", expected " +
                       std::to_string(n));
  KernelSpec out = like;
  Eigen::Index k = 0;
  std::visit(
      [&](auto& p) {
        visit_fields(p, [&](double& v, bool positive, const std::string&) {
          const double u = unconstrained(k++);
          v = positive ? softplus(u) : u;
        });
      },
      out.mutable_params());
  out.validate();
  return out;
}

}  // namespace mogp
