#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mogp/gp.hpp"

namespace mogp {

// ---- transforms -------------------------------------------------------------

// Polynomial trend in the first input coordinate, evaluated at (x - shift) / scale.
struct Detrend {
  int degree = 1;
  Eigen::VectorXd coefficients;  // lowest order first; empty until fitted
  double shift = 0.0;
  double scale = 1.0;
};

// Zero mean, unit population standard deviation.
struct Whiten {
  double mean = 0.0;
  double stddev = 1.0;
};

// y -> ln(y + offset)
struct LogTransform {
  double offset = 0.0;
};

using Transform = std::variant<Detrend, Whiten, LogTransform>;

std::string_view transform_name(const Transform& t);

double transform_forward(const Transform& t, double x0, double y);
double transform_backward(const Transform& t, double x0, double y);

class TransformStack {
 public:
  void push(Transform t) { items_.push_back(std::move(t)); }
  const std::vector<Transform>& items() const noexcept { return items_; }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t size() const noexcept { return items_.size(); }

  // x0 is the first input coordinate of the point.
  double forward(double x0, double y) const;
  double backward(double x0, double y) const;

 private:
  std::vector<Transform> items_;
};

// ---- channels ---------------------------------------------------------------

class Channel {
 public:
  // Points are sorted by the first input coordinate; duplicates are rejected.
  Channel(std::string name, Eigen::MatrixXd x, Eigen::VectorXd y);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  int input_dim() const noexcept { return static_cast<int>(x_.cols()); }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  // Values in the transformed domain.
  const Eigen::VectorXd& y() const noexcept { return y_; }
  // Values as loaded.
  const Eigen::VectorXd& raw_y() const noexcept { return raw_y_; }
  const std::vector<bool>& mask() const noexcept { return mask_; }
  const TransformStack& transforms() const noexcept { return transforms_; }

  std::size_t train_count() const;
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> removed_indices() const;

  // Replaces the mask wholesale (used when restoring a saved model).
  void set_mask(std::vector<bool> mask);
  // Marks the given point as removed; never re-adds points.
  void remove_point(std::size_t index);

  // Fits `t` on the training points of the current y, then maps every point forward.
  void apply_transform(Transform t);
  // Re-applies an already fitted stack to raw_y without re-fitting.
  void restore_transforms(TransformStack stack);

 private:
  std::string name_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd raw_y_;
  Eigen::VectorXd y_;
  std::vector<bool> mask_;
  TransformStack transforms_;
};

// Closed x-span window [x_min + start (x_max - x_min), x_min + end (x_max - x_min)].
void remove_relative_range(Channel& channel, double start_frac, double end_frac);
// Removes floor(pct * training count) training points chosen by a seeded generator.
void remove_randomly(Channel& channel, double pct, std::uint64_t seed);
void apply_transform(Channel& channel, Transform t);

// Inverse-transforms values at inputs x (rows) back to the original domain.
Eigen::VectorXd detransform(const Channel& channel, const Eigen::MatrixXd& x, const Eigen::VectorXd& values);

struct Bounds {
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};
Bounds detransform(const Channel& channel, const Eigen::MatrixXd& x, const Bounds& transformed);

// ---- datasets ---------------------------------------------------------------

class DataSet {
 public:
  explicit DataSet(std::vector<Channel> channels);

  int size() const noexcept { return static_cast<int>(channels_.size()); }
  Channel& operator[](int m) { return channels_.at(static_cast<std::size_t>(m)); }
  const Channel& operator[](int m) const { return channels_.at(static_cast<std::size_t>(m)); }
  std::vector<Channel>& channels() noexcept { return channels_; }
  const std::vector<Channel>& channels() const noexcept { return channels_; }
  int index_of(std::string_view name) const;

 private:
  std::vector<Channel> channels_;
};

enum class Selection { Train, Removed, All };

struct PointRef {
  int channel = 0;
  std::size_t index = 0;
};

struct AugmentedData {
  AugmentedInput input;
  Eigen::VectorXd y;  // transformed domain
  std::vector<PointRef> points;
};

AugmentedData to_augmented(const DataSet& data, Selection which);

// ---- ingestion --------------------------------------------------------------

struct CsvOptions {
  std::string x_col;
  std::vector<std::string> y_cols;
  // strptime-style pattern, or "iso" for ISO-8601; unset means x is numeric.
  std::optional<std::string> time_format;
  double time_unit_seconds = 3600.0;
};

DataSet load_csv(const std::filesystem::path& path, const CsvOptions& options);

// Seconds since the Unix epoch (UTC). Throws InvalidInput when the text does not match.
double parse_time(std::string_view text, std::string_view format = "iso");
// Offsets from the earliest timestamp in units of `unit_seconds`; errors name the 1-based row.
std::vector<double> parse_times(std::span<const std::string> texts, std::string_view format, double unit_seconds);
// "seconds", "minutes", "hours", "days", "weeks" or a positive number of seconds.
double time_unit_seconds(std::string_view unit);

// FNV-1a 64-bit hash of the file contents, as 16 lowercase hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace mogp
