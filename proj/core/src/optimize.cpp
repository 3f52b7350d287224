#include "mogp/optimize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>

#include "mogp/error.hpp"

namespace mogp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Point {
  Eigen::VectorXd x;
  double f = kInf;
  Eigen::VectorXd g;
};

Point evaluate_at(const Objective& objective, const Eigen::VectorXd& x) {
  Point p{x, kInf, Eigen::VectorXd::Zero(x.size())};
  p.f = objective(x, p.g);
  if (!std::isfinite(p.f) || p.g.size() != x.size() || !p.g.allFinite()) p.f = kInf;
  return p;
}

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), falling back to bisection
// and kept away from the interval ends.
double interpolate(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  double t = 0.5 * (a + b);
  if (std::isfinite(fb) && std::isfinite(db)) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double denom = db - da + 2.0 * d2;
      if (denom != 0.0) {
        const double c = b - (b - a) * (db + d2 - d1) / denom;
        if (std::isfinite(c)) t = c;
      }
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

struct LineSearch {
  const Objective& objective;
  const OptimizerOptions& opts;
  const Point& start;
  const Eigen::VectorXd& dir;
  double dphi0;
  int evals = 0;

  double dphi(const Point& p) const { return p.g.dot(dir); }
  bool armijo(double alpha, const Point& p) const {
    return p.f <= start.f + opts.c1 * alpha * dphi0 && p.f < start.f;
  }
  bool curvature(const Point& p) const { return std::abs(dphi(p)) <= -opts.c2 * dphi0; }
  Point at(double alpha) {
    ++evals;
    return evaluate_at(objective, start.x + alpha * dir);
  }

  // Returns the accepted point, or nothing when no decrease could be found.
  std::optional<Point> zoom(double a_lo, Point lo, double a_hi, Point hi, std::optional<Point> fallback) {
    while (evals < opts.max_line_search) {
      const double a_j = interpolate(a_lo, lo.f, dphi(lo), a_hi, hi.f, std::isfinite(hi.f) ? dphi(hi) : kInf);
      Point p = at(a_j);
      if (!armijo(a_j, p) || p.f >= lo.f) {
        a_hi = a_j;
        hi = std::move(p);
        continue;
      }
      if (curvature(p)) return p;
      if (dphi(p) * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo;
        hi = lo;
      }
      a_lo = a_j;
      lo = p;
      fallback = lo;
    }
    return fallback;
  }

  std::optional<Point> run(double alpha) {
    double a_prev = 0.0;
    Point prev = start;
    std::optional<Point> best;
    while (evals < opts.max_line_search) {
      Point p = at(alpha);
      if (!armijo(alpha, p) || (evals > 1 && p.f >= prev.f))
        return zoom(a_prev, prev, alpha, std::move(p), best);
      if (curvature(p)) return p;
      best = p;
      if (dphi(p) >= 0.0) return zoom(alpha, p, a_prev, prev, best);
      a_prev = alpha;
      prev = std::move(p);
      alpha *= 2.0;
    }
    return best;
  }
};

Eigen::VectorXd two_loop(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& s,
                         const std::deque<Eigen::VectorXd>& y) {
  Eigen::VectorXd q = -g;
  const std::size_t m = s.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / y[k].dot(s[k]);
    alpha[k] = rho[k] * s[k].dot(q);
    q -= alpha[k] * y[k];
  }
  if (m > 0) q *= s.back().dot(y.back()) / y.back().squaredNorm();
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * y[k].dot(q);
    q += (alpha[k] - beta) * s[k];
  }
  return q;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(OptimizerMethod method) {
  return method == OptimizerMethod::LBFGS ? "lbfgs" : "adam";
}

std::string_view to_string(Convergence reason) {
  switch (reason) {
    case Convergence::GradientTol: return "gradient-tol";
    case Convergence::MaxIters: return "max-iters";
    case Convergence::LineSearchFailure: return "line-search-failure";
  }
  return "?";
}

OptimizerMethod parse_optimizer(std::string_view name) {
  const std::string n = lower(name);
  if (n == "lbfgs" || n == "l-bfgs" || n == "l-bfgs-b" || n == "bfgs") return OptimizerMethod::LBFGS;
  if (n == "adam") return OptimizerMethod::Adam;
  throw InvalidInput("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerOptions::validate() const {
  if (max_iters < 0) throw InvalidInput("optimizer: max_iters must be non-negative");
  if (history < 1) throw InvalidInput("optimizer: history must be >= 1");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw InvalidInput("optimizer: need 0 < c1 < c2 < 1");
  if (!(gradient_tol >= 0.0)) throw InvalidInput("optimizer: gradient tolerance must be non-negative");
  if (!(adam_step > 0.0)) throw InvalidInput("optimizer: adam step must be positive");
  if (max_line_search < 1) throw InvalidInput("optimizer: line search needs at least one trial");
}

TrainResult lbfgs(const Objective& objective, Eigen::VectorXd x0, const OptimizerOptions& opts) {
  opts.validate();
  Point cur = evaluate_at(objective, x0);
  if (!std::isfinite(cur.f)) throw InvalidInput("lbfgs: objective or gradient is not finite at the initial point");

  TrainResult result;
  result.trace.push_back(cur.f);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  result.reason = Convergence::MaxIters;

  while (result.iterations < opts.max_iters) {
    if (cur.g.lpNorm<Eigen::Infinity>() <= opts.gradient_tol) {
      result.reason = Convergence::GradientTol;
      break;
    }
    std::optional<Point> next;
    for (int attempt = 0; attempt < 2 && !next; ++attempt) {
      if (attempt == 1) {
        if (s_hist.empty()) break;
        s_hist.clear();
        y_hist.clear();
      }
      Eigen::VectorXd dir = two_loop(cur.g, s_hist, y_hist);
      double dphi0 = cur.g.dot(dir);
      if (!(dphi0 < 0.0) || !dir.allFinite()) {
        s_hist.clear();
        y_hist.clear();
        dir = -cur.g;
        dphi0 = cur.g.dot(dir);
      }
      const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / cur.g.norm()) : 1.0;
      LineSearch ls{objective, opts, cur, dir, dphi0};
      next = ls.run(alpha0);
    }
    if (!next) {
      result.reason = Convergence::LineSearchFailure;
      break;
    }
    Eigen::VectorXd s = next->x - cur.x;
    Eigen::VectorXd y = next->g - cur.g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    cur = std::move(*next);
    ++result.iterations;
    result.trace.push_back(cur.f);
  }
  if (result.reason == Convergence::MaxIters && cur.g.lpNorm<Eigen::Infinity>() <= opts.gradient_tol)
    result.reason = Convergence::GradientTol;
  result.parameters = std::move(cur.x);
  result.final_value = cur.f;
  return result;
}

TrainResult adam(const Objective& objective, Eigen::VectorXd x0, const OptimizerOptions& opts) {
  opts.validate();
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  TrainResult result;
  result.reason = Convergence::MaxIters;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  Point best;
  double b1 = 1.0;
  double b2 = 1.0;
  for (int t = 0;; ++t) {
    Point p = evaluate_at(objective, x);
    if (t == 0 && !std::isfinite(p.f))
      throw InvalidInput("adam: objective or gradient is not finite at the initial point");
    result.trace.push_back(p.f);
    if (p.f < best.f) best = p;
    if (!std::isfinite(p.f)) {
      result.reason = Convergence::LineSearchFailure;
      break;
    }
    if (p.g.lpNorm<Eigen::Infinity>() <= opts.gradient_tol) {
      result.reason = Convergence::GradientTol;
      break;
    }
    if (t == opts.max_iters) break;
    b1 *= beta1;
    b2 *= beta2;
    m = beta1 * m + (1.0 - beta1) * p.g;
    v = beta2 * v + (1.0 - beta2) * p.g.cwiseAbs2();
    const Eigen::ArrayXd m_hat = m.array() / (1.0 - b1);
    const Eigen::ArrayXd v_hat = v.array() / (1.0 - b2);
    x.array() -= opts.adam_step * m_hat / (v_hat.sqrt() + eps);
    ++result.iterations;
  }
  result.parameters = best.x;
  result.final_value = best.f;
  return result;
}

TrainResult train(ModelState& model, const OptimizerOptions& opts) {
  opts.validate();
  if (model.inputs().size() == 0) throw InvalidInput("train: model has no training points");

  const Eigen::VectorXd x0 = model.unconstrained();
  const KernelSpec initial_kernel = model.kernel();
  const Eigen::VectorXd initial_noise = model.noise();
  const double initial = nlml(model);
  if (!std::isfinite(initial)) throw InvalidInput("train: initial NLML is not finite");

  TrainResult result;
  if (opts.max_iters == 0) {
    result.parameters = x0;
    result.final_value = initial;
    result.trace = {initial};
  } else {
    Objective objective = [&model](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      try {
        model.set_unconstrained(x);
        const double f = nlml(model);
        grad = nlml_grad(model);
        return f;
      } catch (const Error&) {
        return kInf;
      }
    };
    result = opts.method == OptimizerMethod::LBFGS ? lbfgs(objective, x0, opts) : adam(objective, x0, opts);
    if (result.iterations == 0 && result.reason == Convergence::LineSearchFailure)
      throw OptimizationError(
          "every line search failed on the first iteration; re-initialize the parameters (different init method "
          "or seed)");
  }
  if (result.iterations > 0) {
    model.set_unconstrained(result.parameters);
    result.final_value = nlml(model);
  } else {
    model.set_kernel(initial_kernel);
    model.set_noise(initial_noise);
    result.parameters = x0;
    result.final_value = nlml(model);
  }
  const int offset = model.trace().empty() ? 0 : model.trace().back().iteration + 1;
  for (std::size_t k = 0; k < result.trace.size(); ++k)
    model.trace().push_back({offset + static_cast<int>(k), result.trace[k]});
  return result;
}

}  // namespace mogp
