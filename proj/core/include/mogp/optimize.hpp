#pragma once

#include <Eigen/Core>
#include <functional>
#include <string_view>
#include <vector>

#include "mogp/gp.hpp"
#include "mogp/softplus.hpp"

namespace mogp {

enum class OptimizerMethod { LBFGS, Adam };
enum class Convergence { GradientTol, MaxIters, LineSearchFailure };

std::string_view to_string(OptimizerMethod method);
std::string_view to_string(Convergence reason);
// "lbfgs", "l-bfgs", "l-bfgs-b", "bfgs" or "adam"; case-insensitive.
OptimizerMethod parse_optimizer(std::string_view name);

struct OptimizerOptions {
  OptimizerMethod method = OptimizerMethod::LBFGS;
  int max_iters = 500;
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  double gradient_tol = 1e-6;
  double adam_step = 0.01;
  int max_line_search = 20;

  void validate() const;
};

struct TrainResult {
  Eigen::VectorXd parameters;
  double final_value = 0.0;
  int iterations = 0;
  Convergence reason = Convergence::MaxIters;
  // Objective at x0 followed by one entry per accepted iteration.
  std::vector<double> trace;
};

// Returns f(x) and writes the gradient. Non-finite values mark x as infeasible.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Limited-memory BFGS with a strong-Wolfe line search.
TrainResult lbfgs(const Objective& objective, Eigen::VectorXd x0, const OptimizerOptions& opts);

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8) and fixed step opts.adam_step.
TrainResult adam(const Objective& objective, Eigen::VectorXd x0, const OptimizerOptions& opts);

// Maximizes the marginal likelihood over ModelState::unconstrained() and writes the
// best parameters back into the model. The NLML trace is appended to model.trace().
TrainResult train(ModelState& model, const OptimizerOptions& opts);

}  // namespace mogp
