#include <Eigen/QR>
#include <cmath>
#include <string>

#include "mogp/data.hpp"
#include "mogp/error.hpp"

namespace mogp {
namespace {

double poly(const Detrend& d, double x0) {
  const double t = (x0 - d.shift) / d.scale;
  double v = 0.0;
  for (Eigen::Index k = d.coefficients.size(); k-- > 0;) v = v * t + d.coefficients(k);
  return v;
}

struct ForwardMap {
  double x0;
  double y;
  double operator()(const Detrend& d) const { return y - poly(d, x0); }
  double operator()(const Whiten& w) const { return (y - w.mean) / w.stddev; }
  double operator()(const LogTransform& l) const { return std::log(y + l.offset); }
};

struct BackwardMap {
  double x0;
  double y;
  double operator()(const Detrend& d) const { return y + poly(d, x0); }
  double operator()(const Whiten& w) const { return y * w.stddev + w.mean; }
  double operator()(const LogTransform& l) const { return std::exp(y) - l.offset; }
};

Detrend fit(Detrend d, const Eigen::VectorXd& x0, const Eigen::VectorXd& y) {
  if (d.degree < 0) throw InvalidInput("detrend: degree must be >= 0");
  const Eigen::Index n = y.size();
  const Eigen::Index terms = d.degree + 1;
  if (n < terms)
    throw InvalidInput("detrend: degree " + std::to_string(d.degree) + " needs at least " + std::to_string(terms) +
                       " training points, have " + std::to_string(n));
  d.shift = x0.mean();
  d.scale = (x0.array() - d.shift).abs().maxCoeff();
  if (!(d.scale > 0.0)) d.scale = 1.0;
  Eigen::MatrixXd basis(n, terms);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double t = (x0(r) - d.shift) / d.scale;
    double p = 1.0;
    for (Eigen::Index k = 0; k < terms; ++k, p *= t) basis(r, k) = p;
  }
  const auto qr = basis.colPivHouseholderQr();
  if (qr.rank() < terms) throw InvalidInput("detrend: design matrix is rank deficient");
  d.coefficients = qr.solve(y);
  return d;
}

Whiten fit(Whiten, const Eigen::VectorXd&, const Eigen::VectorXd& y) {
  Whiten w;
  w.mean = y.mean();
  w.stddev = std::sqrt((y.array() - w.mean).square().mean());
  if (!std::isfinite(w.stddev) || w.stddev <= 1e-12 * std::max(std::abs(w.mean), 1e-300))
    throw InvalidInput("whiten: training values have zero standard deviation");
  return w;
}

LogTransform fit(LogTransform l, const Eigen::VectorXd&, const Eigen::VectorXd&) {
  if (!(l.offset >= 0.0) || !std::isfinite(l.offset)) throw InvalidInput("log: offset must be finite and >= 0");
  return l;
}

}  // namespace

std::string_view transform_name(const Transform& t) {
  switch (t.index()) {
    case 0: return "detrend";
    case 1: return "whiten";
    default: return "log";
  }
}

double transform_forward(const Transform& t, double x0, double y) { return std::visit(ForwardMap{x0, y}, t); }
double transform_backward(const Transform& t, double x0, double y) { return std::visit(BackwardMap{x0, y}, t); }

double TransformStack::forward(double x0, double y) const {
  for (const auto& t : items_) y = transform_forward(t, x0, y);
  return y;
}

double TransformStack::backward(double x0, double y) const {
  for (auto it = items_.rbegin(); it != items_.rend(); ++it) y = transform_backward(*it, x0, y);
  return y;
}

void Channel::apply_transform(Transform t) {
  const std::vector<std::size_t> train = train_indices();
  if (train.empty()) throw InvalidInput("channel '" + name_ + "': cannot fit a transform without training points");
  Eigen::VectorXd tx(static_cast<Eigen::Index>(train.size()));
  Eigen::VectorXd ty(tx.size());
  for (std::size_t k = 0; k < train.size(); ++k) {
    tx(static_cast<Eigen::Index>(k)) = x_(static_cast<Eigen::Index>(train[k]), 0);
    ty(static_cast<Eigen::Index>(k)) = y_(static_cast<Eigen::Index>(train[k]));
  }
  Transform fitted = std::visit([&](auto t) -> Transform { return fit(std::move(t), tx, ty); }, std::move(t));

  if (const auto* l = std::get_if<LogTransform>(&fitted)) {
    for (Eigen::Index r = 0; r < y_.size(); ++r)
      if (!(y_(r) + l->offset > 0.0))
        throw InvalidInput("channel '" + name_ + "': log transform undefined at point " + std::to_string(r) +
                           " (x=" + std::to_string(x_(r, 0)) + ", y=" + std::to_string(y_(r)) + ")");
  }
  Eigen::VectorXd next(y_.size());
  for (Eigen::Index r = 0; r < y_.size(); ++r) next(r) = transform_forward(fitted, x_(r, 0), y_(r));
  if (!next.allFinite()) throw InvalidInput("channel '" + name_ + "': transform produced non-finite values");
  y_ = std::move(next);
  transforms_.push(std::move(fitted));
}

void Channel::restore_transforms(TransformStack stack) {
  Eigen::VectorXd next(raw_y_.size());
  for (Eigen::Index r = 0; r < raw_y_.size(); ++r) {
    double v = raw_y_(r);
    for (const auto& t : stack.items()) v = transform_forward(t, x_(r, 0), v);
    next(r) = v;
  }
  if (!next.allFinite()) throw InvalidInput("channel '" + name_ + "': stored transforms produce non-finite values");
  y_ = std::move(next);
  transforms_ = std::move(stack);
}

void apply_transform(Channel& channel, Transform t) { channel.apply_transform(std::move(t)); }

Eigen::VectorXd detransform(const Channel& channel, const Eigen::MatrixXd& x, const Eigen::VectorXd& values) {
  if (x.rows() != values.size()) throw InvalidInput("detransform: x and values differ in length");
  Eigen::VectorXd out(values.size());
  for (Eigen::Index r = 0; r < values.size(); ++r) out(r) = channel.transforms().backward(x(r, 0), values(r));
  return out;
}

Bounds detransform(const Channel& channel, const Eigen::MatrixXd& x, const Bounds& transformed) {
  return {detransform(channel, x, transformed.mean), detransform(channel, x, transformed.lower),
          detransform(channel, x, transformed.upper)};
}

}  // namespace mogp
