#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "mogp/data.hpp"
#include "mogp/error.hpp"

namespace mogp {

// ---- Channel ----------------------------------------------------------------

Channel::Channel(std::string name, Eigen::MatrixXd x, Eigen::VectorXd y) : name_(std::move(name)) {
  if (x.rows() != y.size())
    throw InvalidInput("channel '" + name_ + "': " + std::to_string(x.rows()) + " inputs for " +
                       std::to_string(y.size()) + " values");
  if (x.cols() < 1) throw InvalidInput("channel '" + name_ + "': inputs need at least one dimension");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("channel '" + name_ + "': non-finite data");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, 0) < x(b, 0); });
  x_.resize(x.rows(), x.cols());
  raw_y_.resize(y.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    x_.row(r) = x.row(order[k]);
    raw_y_(r) = y(order[k]);
    if (x_.cols() == 1 && r > 0 && x_(r, 0) == x_(r - 1, 0))
      throw InvalidInput("channel '" + name_ + "': duplicate x value " + std::to_string(x_(r, 0)));
  }
  y_ = raw_y_;
  mask_.assign(order.size(), true);
}

std::size_t Channel::train_count() const { return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), true)); }

std::vector<std::size_t> Channel::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < mask_.size(); ++k)
    if (mask_[k]) out.push_back(k);
  return out;
}

std::vector<std::size_t> Channel::removed_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < mask_.size(); ++k)
    if (!mask_[k]) out.push_back(k);
  return out;
}

void Channel::set_mask(std::vector<bool> mask) {
  if (mask.size() != mask_.size())
    throw InvalidInput("channel '" + name_ + "': mask has " + std::to_string(mask.size()) + " entries, expected " +
                       std::to_string(mask_.size()));
  mask_ = std::move(mask);
}

void Channel::remove_point(std::size_t index) { mask_.at(index) = false; }

void remove_relative_range(Channel& channel, double start_frac, double end_frac) {
  if (!(start_frac >= 0.0 && end_frac <= 1.0 && start_frac <= end_frac))
    throw InvalidInput("remove_relative_range: need 0 <= start <= end <= 1, got (" + std::to_string(start_frac) +
                       ", " + std::to_string(end_frac) + ")");
  if (channel.size() == 0) return;
  const auto& x = channel.x();
  const double lo = x(0, 0);
  const double span = x(x.rows() - 1, 0) - lo;
  // tolerance absorbs rounding in start_frac * span so grid points on the boundary are included
  const double eps = 1e-12 * std::max(span, 1.0);
  const double from = lo + start_frac * span - eps;
  const double to = lo + end_frac * span + eps;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    if (x(r, 0) >= from && x(r, 0) <= to) channel.remove_point(static_cast<std::size_t>(r));
}

void remove_randomly(Channel& channel, double pct, std::uint64_t seed) {
  if (!(pct >= 0.0 && pct <= 1.0)) throw InvalidInput("remove_randomly: pct must lie in [0, 1]");
  std::vector<std::size_t> train = channel.train_indices();
  const auto count = static_cast<std::size_t>(std::floor(pct * static_cast<double>(train.size())));
  if (count == 0) return;
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates: the first `count` slots end up as a uniform sample without replacement
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, train.size() - 1);
    std::swap(train[k], train[pick(rng)]);
    channel.remove_point(train[k]);
  }
}

// ---- DataSet ----------------------------------------------------------------

DataSet::DataSet(std::vector<Channel> channels) : channels_(std::move(channels)) {
  if (channels_.empty()) throw InvalidInput("dataset needs at least one channel");
  for (std::size_t a = 0; a < channels_.size(); ++a) {
    if (channels_[a].input_dim() != channels_[0].input_dim())
      throw InvalidInput("dataset: channels differ in input dimension");
    for (std::size_t b = a + 1; b < channels_.size(); ++b)
      if (channels_[a].name() == channels_[b].name())
        throw InvalidInput("dataset: duplicate channel name '" + channels_[a].name() + "'");
  }
}

int DataSet::index_of(std::string_view name) const {
  for (std::size_t m = 0; m < channels_.size(); ++m)
    if (channels_[m].name() == name) return static_cast<int>(m);
  throw InvalidInput("no channel named '" + std::string(name) + "'");
}

AugmentedData to_augmented(const DataSet& data, Selection which) {
  std::vector<PointRef> points;
  for (int m = 0; m < data.size(); ++m) {
    const auto& mask = data[m].mask();
    for (std::size_t k = 0; k < mask.size(); ++k) {
      const bool take = which == Selection::All || (which == Selection::Train) == mask[k];
      if (take) points.push_back({m, k});
    }
  }
  if (points.empty()) throw InvalidInput("to_augmented: selection is empty");
  const int P = data[0].input_dim();
  std::vector<int> channels(points.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), P);
  Eigen::VectorXd y(x.rows());
  for (std::size_t r = 0; r < points.size(); ++r) {
    const Channel& ch = data[points[r].channel];
    const auto row = static_cast<Eigen::Index>(r);
    const auto idx = static_cast<Eigen::Index>(points[r].index);
    channels[r] = points[r].channel;
    x.row(row) = ch.x().row(idx);
    y(row) = ch.y()(idx);
  }
  return {AugmentedInput(std::move(channels), std::move(x)), std::move(y), std::move(points)};
}

// ---- ingestion --------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> try_parse_time(std::string_view text, const char* format) {
  std::tm tm{};
  std::istringstream in{std::string(trim(text))};
  in >> std::get_time(&tm, format);
  if (in.fail()) return std::nullopt;
  std::string rest;
  in >> rest;
  if (!rest.empty() && rest != "Z") return std::nullopt;
  return static_cast<double>(timegm(&tm));
}

}  // namespace

double parse_time(std::string_view text, std::string_view format) {
  if (format.empty() || format == "iso" || format == "ISO") {
    for (const char* f : {"%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M", "%Y-%m-%d"})
      if (auto t = try_parse_time(text, f)) return *t;
  } else if (auto t = try_parse_time(text, std::string(format).c_str())) {
    return *t;
  }
  throw InvalidInput("cannot parse '" + std::string(text) + "' as a timestamp (format " +
                     (format.empty() ? std::string("iso") : std::string(format)) + ")");
}

std::vector<double> parse_times(std::span<const std::string> texts, std::string_view format, double unit_seconds) {
  if (!(unit_seconds > 0.0)) throw InvalidInput("time unit must be positive");
  std::vector<double> out;
  out.reserve(texts.size());
  for (std::size_t r = 0; r < texts.size(); ++r) {
    try {
      out.push_back(parse_time(texts[r], format));
    } catch (const InvalidInput& e) {
      throw IngestionError(e.what(), r + 1);
    }
  }
  if (out.empty()) return out;
  const double earliest = *std::min_element(out.begin(), out.end());
  for (double& t : out) t = (t - earliest) / unit_seconds;
  return out;
}

double time_unit_seconds(std::string_view unit) {
  if (unit == "s" || unit == "second" || unit == "seconds") return 1.0;
  if (unit == "min" || unit == "minute" || unit == "minutes") return 60.0;
  if (unit == "h" || unit == "hour" || unit == "hours") return 3600.0;
  if (unit == "d" || unit == "day" || unit == "days") return 86400.0;
  if (unit == "w" || unit == "week" || unit == "weeks") return 604800.0;
  if (auto v = parse_number(unit); v && *v > 0.0) return *v;
  throw InvalidInput("unknown time unit '" + std::string(unit) + "'");
}

DataSet load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open data file '" + path.string() + "'");
  if (options.y_cols.empty()) throw IngestionError("no y columns requested");

  std::string line;
  if (!std::getline(in, line)) throw IngestionError("data file '" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_csv(line);
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (trim(header[c]) == name) return c;
    throw IngestionError("column '" + name + "' not found in header of '" + path.string() + "'");
  };
  const std::size_t x_col = column(options.x_col);
  std::vector<std::size_t> y_cols;
  for (const auto& name : options.y_cols) y_cols.push_back(column(name));

  std::vector<std::string> x_text;
  std::vector<std::vector<std::optional<double>>> values(y_cols.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv(line);
    if (x_col >= cells.size() || trim(cells[x_col]).empty()) throw IngestionError("missing x value", row);
    x_text.emplace_back(trim(cells[x_col]));
    for (std::size_t m = 0; m < y_cols.size(); ++m)
      values[m].push_back(y_cols[m] < cells.size() ? parse_number(cells[y_cols[m]]) : std::nullopt);
  }

  std::vector<double> x;
  if (options.time_format) {
    x = parse_times(x_text, *options.time_format, options.time_unit_seconds);
  } else {
    x.reserve(x_text.size());
    for (std::size_t r = 0; r < x_text.size(); ++r) {
      auto v = parse_number(x_text[r]);
      if (!v) throw IngestionError("non-numeric x value '" + x_text[r] + "'", r + 1);
      x.push_back(*v);
    }
  }

  std::vector<Channel> channels;
  for (std::size_t m = 0; m < y_cols.size(); ++m) {
    std::vector<std::size_t> usable;
    for (std::size_t r = 0; r < x.size(); ++r)
      if (values[m][r]) usable.push_back(r);
    if (usable.empty()) throw IngestionError("channel '" + options.y_cols[m] + "' has zero usable rows");
    Eigen::MatrixXd cx(static_cast<Eigen::Index>(usable.size()), 1);
    Eigen::VectorXd cy(cx.rows());
    for (std::size_t k = 0; k < usable.size(); ++k) {
      cx(static_cast<Eigen::Index>(k), 0) = x[usable[k]];
      cy(static_cast<Eigen::Index>(k)) = *values[m][usable[k]];
    }
    try {
      channels.emplace_back(options.y_cols[m], std::move(cx), std::move(cy));
    } catch (const InvalidInput& e) {
      throw IngestionError(e.what());
    }
  }
  return DataSet(std::move(channels));
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open data file '" + path.string() + "'");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      hash ^= static_cast<unsigned char>(buf[k]);
      hash *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

}  // namespace mogp
