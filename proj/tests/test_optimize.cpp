#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mogp/error.hpp"
#include "mogp/optimize.hpp"
#include "oracles.hpp"

using namespace mogp;

namespace {

double quadratic(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  g = 2.0 * (x.array() - 3.0);
  return (x.array() - 3.0).square().sum();
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const double a = 1.0 - x(0);
  const double b = x(1) - x(0) * x(0);
  g.resize(2);
  g(0) = -2.0 * a - 400.0 * x(0) * b;
  g(1) = 200.0 * b;
  return a * a + 100.0 * b * b;
}

void expect_strictly_decreasing(const std::vector<double>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LT(trace[k], trace[k - 1]) << "step " << k;
}

}  // namespace

TEST(Lbfgs, QuadraticConverges) {
  const TrainResult r = lbfgs(quadratic, Eigen::VectorXd::Zero(1), OptimizerOptions{});
  EXPECT_NEAR(r.parameters(0), 3.0, 1e-6);
  EXPECT_LE(r.iterations, 20);
  EXPECT_EQ(r.reason, Convergence::GradientTol);
  expect_strictly_decreasing(r.trace);
}

TEST(Lbfgs, RosenbrockConverges) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const TrainResult r = lbfgs(rosenbrock, x0, OptimizerOptions{});
  EXPECT_LT(r.final_value, 1e-8);
  EXPECT_LE(r.iterations, 200);
  expect_strictly_decreasing(r.trace);
}

TEST(Lbfgs, ConstantObjectiveStopsImmediately) {
  const auto constant = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return 4.0;
  };
  const TrainResult r = lbfgs(constant, Eigen::VectorXd::Ones(3), OptimizerOptions{});
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.reason, Convergence::GradientTol);
}

TEST(Lbfgs, WrongGradientEndsInLineSearchFailure) {
  const auto liar = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -2.0 * x;
    return x.squaredNorm();
  };
  const TrainResult r = lbfgs(liar, Eigen::VectorXd::Ones(2), OptimizerOptions{});
  EXPECT_EQ(r.reason, Convergence::LineSearchFailure);
  EXPECT_EQ(r.parameters, Eigen::VectorXd::Ones(2));
}

TEST(Lbfgs, NonFiniteStartIsInvalid) {
  const auto bad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return std::nan("");
  };
  EXPECT_THROW(lbfgs(bad, Eigen::VectorXd::Zero(1), OptimizerOptions{}), InvalidInput);
}

TEST(Lbfgs, InfeasibleRegionIsAvoided) {
  // f = x - log(x), minimum at 1; undefined for x <= 0.
  const auto barrier = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    if (x(0) <= 0.0) {
      g(0) = 0.0;
      return std::numeric_limits<double>::infinity();
    }
    g(0) = 1.0 - 1.0 / x(0);
    return x(0) - std::log(x(0));
  };
  const TrainResult r = lbfgs(barrier, Eigen::VectorXd::Constant(1, 0.05), OptimizerOptions{});
  EXPECT_NEAR(r.parameters(0), 1.0, 1e-6);
  expect_strictly_decreasing(r.trace);
}

TEST(Options, Validation) {
  OptimizerOptions o;
  o.c1 = 0.95;
  EXPECT_THROW(o.validate(), InvalidInput);
  EXPECT_EQ(parse_optimizer("L-BFGS-B"), OptimizerMethod::LBFGS);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerMethod::Adam);
  EXPECT_THROW(parse_optimizer("sgd"), InvalidInput);
}

TEST(Adam, ShrinksSquareAndIsDeterministic) {
  const auto square = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  };
  OptimizerOptions o;
  o.method = OptimizerMethod::Adam;
  o.max_iters = 500;
  o.gradient_tol = 0.0;
  const TrainResult a = adam(square, Eigen::VectorXd::Ones(1), o);
  EXPECT_LT(std::abs(a.parameters(0)), 0.05);
  const TrainResult b = adam(square, Eigen::VectorXd::Ones(1), o);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Adam, ZeroGradientLeavesPointUnchanged) {
  const auto flat = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return 1.0;
  };
  OptimizerOptions o;
  o.gradient_tol = 0.0;
  o.max_iters = 50;
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(3, -1.0, 2.0);
  EXPECT_EQ(adam(flat, x0, o).parameters, x0);
}

class TrainModel : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(31);
    truth_ = oracle::random_kernel(KernelFamily::MOSM, 2, 1, 1, rng);
    inputs_ = oracle::random_inputs(2, 1, 15, 20, 10.0, rng);
    const Eigen::VectorXd noise = Eigen::VectorXd::Constant(2, 0.05);
    targets_ = sample_prior(truth_, inputs_, noise, 8);
    start_ = oracle::random_kernel(KernelFamily::MOSM, 2, 1, 1, rng);
  }
  KernelSpec truth_ = KernelSpec::make(KernelFamily::MOSM, 2, 1, 1);
  KernelSpec start_ = KernelSpec::make(KernelFamily::MOSM, 2, 1, 1);
  AugmentedInput inputs_;
  Eigen::VectorXd targets_;
};

TEST_F(TrainModel, ImprovesNlmlWithStrictlyDecreasingTrace) {
  ModelState model(start_, Eigen::VectorXd::Constant(2, 0.3), inputs_, targets_);
  const double before = nlml(model);
  OptimizerOptions o;
  o.max_iters = 100;
  const TrainResult r = train(model, o);
  EXPECT_LT(r.final_value, before);
  EXPECT_NEAR(nlml(model), r.final_value, 1e-9 * std::abs(r.final_value));
  expect_strictly_decreasing(r.trace);
  ASSERT_EQ(model.trace().size(), r.trace.size());
  const Eigen::VectorXd values = constrained_values(model.kernel());
  const auto positive = positive_mask(model.kernel());
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (positive[static_cast<std::size_t>(k)]) EXPECT_GE(values(k), kSoftplusFloor);
  EXPECT_TRUE((model.noise().array() >= kSoftplusFloor).all());
}

TEST_F(TrainModel, ZeroIterationsKeepsInitialParameters) {
  ModelState model(start_, Eigen::VectorXd::Constant(2, 0.3), inputs_, targets_);
  const double before = nlml(model);
  OptimizerOptions o;
  o.max_iters = 0;
  const TrainResult r = train(model, o);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.final_value, before);
  EXPECT_EQ(constrained_values(model.kernel()), constrained_values(start_));
  EXPECT_EQ(model.noise(), Eigen::VectorXd::Constant(2, 0.3));
}

TEST_F(TrainModel, AdamAlsoImproves) {
  ModelState model(start_, Eigen::VectorXd::Constant(2, 0.3), inputs_, targets_);
  const double before = nlml(model);
  OptimizerOptions o;
  o.method = OptimizerMethod::Adam;
  o.max_iters = 100;
  const TrainResult r = train(model, o);
  EXPECT_LT(r.final_value, before);
  EXPECT_NEAR(nlml(model), r.final_value, 1e-9 * std::abs(r.final_value));
}

TEST_F(TrainModel, ReparameterizedGradientMatchesFiniteDifferences) {
  ModelState model(start_, Eigen::VectorXd::Constant(2, 0.3), inputs_, targets_);
  const Eigen::VectorXd u = model.unconstrained();
  const Eigen::VectorXd g = nlml_grad(model);
  ModelState probe = model;
  const Eigen::VectorXd fd = oracle::central_diff(
      [&](const Eigen::VectorXd& v) {
        probe.set_unconstrained(v);
        return nlml(probe);
      },
      u);
  for (Eigen::Index k = 0; k < u.size(); ++k) EXPECT_LE(oracle::rel_err(g(k), fd(k)), 1e-4) << k;
}
