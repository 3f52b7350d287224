#include "mogp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json_io.hpp"
#include "mogp/error.hpp"

namespace mogp {

using detail::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InvalidInput(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(where + ": field '" + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal();
}

ChannelRef parse_channel(const json& j, const std::string& where) {
  ChannelRef ref;
  if (j.is_number_integer()) {
    ref.index = j.get<int>();
  } else if (j.is_string()) {
    ref.name = j.get<std::string>();
  } else {
    throw InvalidInput(where + ": channel must be an index or a column name");
  }
  return ref;
}

int resolve_channel(const DataSet& data, const ChannelRef& ref) {
  if (ref.index) {
    if (*ref.index < 0 || *ref.index >= data.size())
      throw InvalidInput("channel index " + std::to_string(*ref.index) + " out of range (dataset has " +
                         std::to_string(data.size()) + " channels)");
    return *ref.index;
  }
  return data.index_of(ref.name);
}


Transform parse_transform(const json& j, const std::string& where) {
  const std::string name = get_or<std::string>(j, "name", "", where);
  if (name == "detrend") {
    Detrend d;
    d.degree = get_or<int>(j, "degree", 1, where);
    if (d.degree < 0) throw InvalidInput(where + ": detrend degree must be non-negative");
    return d;
  }
  if (name == "whiten") return Whiten{};
  if (name == "log") return LogTransform{get_or<double>(j, "epsilon", 0.0, where)};
  throw InvalidInput(where + ": unknown transform '" + name + "'");
}

PreprocessOp parse_op(const json& j, std::size_t k) {
  const std::string where = "preprocess[" + std::to_string(k) + "]";
  const std::string op = get_or<std::string>(j, "op", "", where);
  if (op == "remove_relative_range") {
    check_keys(j, {"op", "channel", "start", "end"}, where);
    if (!j.contains("channel")) throw InvalidInput(where + ": remove_relative_range needs a channel");
    RemoveRangeOp r;
    r.channel = parse_channel(j.at("channel"), where);
    r.start = get_or<double>(j, "start", 0.0, where);
    r.end = get_or<double>(j, "end", 0.0, where);
    if (!(r.start >= 0.0 && r.end <= 1.0 && r.start <= r.end))
      throw InvalidInput(where + ": need 0 <= start <= end <= 1");
    return r;
  }
  if (op == "remove_randomly") {
    check_keys(j, {"op", "channel", "pct", "seed"}, where);
    RemoveRandomOp r;
    if (j.contains("channel") && !j.at("channel").is_null()) r.channel = parse_channel(j.at("channel"), where);
    r.pct = get_or<double>(j, "pct", 0.0, where);
    r.seed = get_or<std::uint64_t>(j, "seed", 0, where);
    if (!(r.pct >= 0.0 && r.pct <= 1.0)) throw InvalidInput(where + ": pct must lie in [0, 1]");
    return r;
  }
  if (op == "transform") {
    check_keys(j, {"op", "channel", "name", "degree", "epsilon"}, where);
    TransformOp t;
    if (j.contains("channel") && !j.at("channel").is_null()) t.channel = parse_channel(j.at("channel"), where);
    t.transform = parse_transform(j, where);
    return t;
  }
  throw InvalidInput(where + ": unknown op '" + op + "'");
}

json metrics_to_json(const ErrorMetrics& m) {
  json j = json::object();
  j["count"] = m.count;
  j["mae"] = detail::number(m.mae);
  j["rmse"] = detail::number(m.rmse);
  j["mape"] = detail::number(m.mape);
  j["mape_count"] = m.mape_count;
  return j;
}

json metrics_report_to_json(const MetricsReport& r) {
  json j = json::object();
  json channels = json::array();
  for (const auto& [name, m] : r.channels) {
    json c = metrics_to_json(m);
    c["channel"] = name;
    channels.push_back(std::move(c));
  }
  j["channels"] = std::move(channels);
  j["overall"] = metrics_to_json(r.overall);
  return j;
}

Eigen::MatrixXd rows_of(const Channel& ch, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), ch.input_dim());
  for (std::size_t k = 0; k < idx.size(); ++k) x.row(static_cast<Eigen::Index>(k)) = ch.x().row(static_cast<Eigen::Index>(idx[k]));
  return x;
}

std::vector<std::string> names_of(const DataSet& data) {
  std::vector<std::string> names;
  for (const auto& ch : data.channels()) names.push_back(ch.name());
  return names;
}

ModelState model_for(const DataSet& data, KernelSpec kernel, Eigen::VectorXd noise) {
  AugmentedData train = to_augmented(data, Selection::Train);
  return ModelState(std::move(kernel), std::move(noise), std::move(train.input), std::move(train.y));
}

bool has_removed(const DataSet& data) {
  return std::any_of(data.channels().begin(), data.channels().end(),
                     [](const Channel& c) { return !c.removed_indices().empty(); });
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

// ---- config -------------------------------------------------------------------

PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json j = detail::parse(json_text, "config");
  check_keys(j, {"data", "preprocess", "model", "init", "train", "output"}, "config");
  PipelineConfig c;

  const json& data = detail::field(j, "data");
  check_keys(data, {"file", "x_col", "y_cols", "time_format", "time_unit"}, "data");
  c.data.file = resolve(base_dir, get_or<std::string>(data, "file", "", "data"));
  if (get_or<std::string>(data, "file", "", "data").empty()) throw InvalidInput("data: missing field 'file'");
  c.data.csv.x_col = get_or<std::string>(data, "x_col", "", "data");
  if (c.data.csv.x_col.empty()) throw InvalidInput("data: missing field 'x_col'");
  c.data.csv.y_cols = get_or<std::vector<std::string>>(data, "y_cols", {}, "data");
  if (c.data.csv.y_cols.empty()) throw InvalidInput("data: y_cols must name at least one column");
  if (data.contains("time_format") && !data.at("time_format").is_null())
    c.data.csv.time_format = get_or<std::string>(data, "time_format", "", "data");
  if (data.contains("time_unit")) {
    const json& u = data.at("time_unit");
    if (u.is_number()) {
      c.data.csv.time_unit_seconds = u.get<double>();
      if (!(c.data.csv.time_unit_seconds > 0.0)) throw InvalidInput("data: time_unit must be positive");
    } else {
      c.data.csv.time_unit_seconds = time_unit_seconds(get_or<std::string>(data, "time_unit", "", "data"));
    }
  }

  if (j.contains("preprocess")) {
    const json& ops = j.at("preprocess");
    if (!ops.is_array()) throw InvalidInput("preprocess: expected an array");
    for (std::size_t k = 0; k < ops.size(); ++k) c.preprocess.push_back(parse_op(ops[k], k));
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"kernel", "Q", "include_noise"}, "model");
    c.family = parse_family(get_or<std::string>(m, "kernel", "MOSM", "model"));
    if (c.family == KernelFamily::Noise) throw UnsupportedFamily("model: NOISE is not a trainable model family");
    c.components = get_or<int>(m, "Q", 3, "model");
    if (c.components < 1) throw InvalidInput("model: Q must be at least 1");
    c.include_noise = get_or<bool>(m, "include_noise", true, "model");
  }

  if (j.contains("init")) {
    const json& i = j.at("init");
    check_keys(i, {"method", "iters"}, "init");
    const std::string method = get_or<std::string>(i, "method", "ls", "init");
    if (method == "ls" || method == "lomb-scargle") {
      c.init = InitMethod::LombScargle;
    } else if (method == "sm") {
      c.init = InitMethod::SpectralMixture;
    } else {
      throw InvalidInput("init: unknown method '" + method + "' (expected ls or sm)");
    }
    c.init_iters = get_or<int>(i, "iters", 100, "init");
    if (c.init_iters < 0) throw InvalidInput("init: iters must be non-negative");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"method", "max_iters", "seed", "gradient_tol", "step"}, "train");
    c.train.method = parse_optimizer(get_or<std::string>(t, "method", "lbfgs", "train"));
    c.train.max_iters = get_or<int>(t, "max_iters", 500, "train");
    c.train.gradient_tol = get_or<double>(t, "gradient_tol", c.train.gradient_tol, "train");
    c.train.adam_step = get_or<double>(t, "step", c.train.adam_step, "train");
    c.train_seed = get_or<std::uint64_t>(t, "seed", 0, "train");
    c.train.validate();
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"model", "report", "predictions", "plot", "spectrum"}, "output");
    auto path = [&](const char* key) -> std::optional<std::filesystem::path> {
      if (!o.contains(key) || o.at(key).is_null()) return std::nullopt;
      return resolve(base_dir, get_or<std::string>(o, key, "", "output"));
    };
    if (auto p = path("model")) c.output.model = *p;
    if (auto p = path("report")) c.output.report = *p;
    c.output.predictions = path("predictions");
    c.output.plot = path("plot");
    c.output.spectrum = path("spectrum");
  }
  if (c.output.model.is_relative()) c.output.model = resolve(base_dir, c.output.model.string());
  if (c.output.report.is_relative()) c.output.report = resolve(base_dir, c.output.report.string());
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  return parse_config(read_text(path), base);
}

DataSet load_data(const DataSource& source) { return load_csv(source.file, source.csv); }

void apply_preprocess(DataSet& data, const std::vector<PreprocessOp>& ops) {
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const std::string where = "preprocess[" + std::to_string(k) + "]: ";
    try {
      std::visit(
          [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, RemoveRangeOp>) {
              remove_relative_range(data[resolve_channel(data, op.channel)], op.start, op.end);
            } else if constexpr (std::is_same_v<T, RemoveRandomOp>) {
              if (op.channel) {
                remove_randomly(data[resolve_channel(data, *op.channel)], op.pct, op.seed);
              } else {
                for (int m = 0; m < data.size(); ++m)
                  remove_randomly(data[m], op.pct, op.seed + static_cast<std::uint64_t>(m));
              }
            } else {
              if (op.channel) {
                apply_transform(data[resolve_channel(data, *op.channel)], op.transform);
              } else {
                for (int m = 0; m < data.size(); ++m) apply_transform(data[m], op.transform);
              }
            }
          },
          ops[k]);
    } catch (const Error& e) {
      throw InvalidInput(where + e.what());
    }
  }
}

// ---- metrics ------------------------------------------------------------------

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw InvalidInput("prediction and target lengths differ");
  ErrorMetrics m;
  m.count = actual.size();
  if (m.count == 0) throw InvalidInput("no points to score");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double pct_sum = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double e = predicted[k] - actual[k];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(actual[k]) >= 1e-9) {
      pct_sum += std::abs(e) / std::abs(actual[k]);
      ++m.mape_count;
    }
  }
  const double n = static_cast<double>(m.count);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = m.mape_count ? pct_sum / static_cast<double>(m.mape_count) : std::nan("");
  return m;
}

MetricsReport heldout_metrics(const DataSet& data, const ModelState& model) {
  MetricsReport report;
  std::vector<double> all_pred;
  std::vector<double> all_true;
  for (int m = 0; m < data.size(); ++m) {
    const Channel& ch = data[m];
    const std::vector<std::size_t> idx = ch.removed_indices();
    if (idx.empty()) continue;
    const Eigen::MatrixXd x = rows_of(ch, idx);
    const AugmentedInput query(std::vector<int>(idx.size(), m), x);
    const PredictionResult pred = predict(model, query, false);
    const Eigen::VectorXd mean = detransform(ch, x, pred.mean);
    std::vector<double> p(mean.data(), mean.data() + mean.size());
    std::vector<double> t;
    for (std::size_t i : idx) t.push_back(ch.raw_y()(static_cast<Eigen::Index>(i)));
    report.channels.emplace_back(ch.name(), error_metrics(p, t));
    all_pred.insert(all_pred.end(), p.begin(), p.end());
    all_true.insert(all_true.end(), t.begin(), t.end());
  }
  if (all_true.empty()) throw InvalidInput("no held-out points to score");
  report.overall = error_metrics(all_pred, all_true);
  return report;
}

std::string metrics_json(const MetricsReport& report) { return metrics_report_to_json(report).dump(2) + "\n"; }

// ---- predictions ----------------------------------------------------------------

PredictionTable predict_points(const DataSet& data, const ModelState& model, const std::vector<int>& channels,
                               const Eigen::MatrixXd& x, bool include_noise) {
  if (static_cast<Eigen::Index>(channels.size()) != x.rows()) throw InvalidInput("channel list and inputs differ in length");
  PredictionTable table{names_of(data), {}};
  if (channels.empty()) return table;
  for (int c : channels)
    if (c < 0 || c >= data.size()) throw InvalidInput("prediction channel out of range");
  const PredictionResult pred = predict(model, AugmentedInput(channels, x), include_noise);
  table.rows.reserve(channels.size());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const TransformStack& ts = data[channels[static_cast<std::size_t>(r)]].transforms();
    const double x0 = x(r, 0);
    PredictionRow row{channels[static_cast<std::size_t>(r)], x0, ts.backward(x0, pred.mean(r)),
                      ts.backward(x0, pred.lower(r)), ts.backward(x0, pred.upper(r))};
    table.rows.push_back(row);
  }
  return table;
}

namespace {

void append_linspace(std::vector<int>& channels, std::vector<double>& xs, int m, double lo, double hi, int count) {
  for (int k = 0; k < count; ++k) {
    channels.push_back(m);
    xs.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
  }
}

Eigen::MatrixXd column(const std::vector<double>& xs) {
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

void require_1d(const DataSet& data) {
  for (const auto& ch : data.channels())
    if (ch.input_dim() != 1) throw InvalidInput("grid predictions need one-dimensional inputs");
}

}  // namespace

PredictionTable predict_grid(const DataSet& data, const ModelState& model, double min, double max, int count,
                             bool include_noise) {
  if (count < 1) throw InvalidInput("grid count must be at least 1");
  if (!(min <= max) || !std::isfinite(min) || !std::isfinite(max)) throw InvalidInput("grid needs finite min <= max");
  require_1d(data);
  std::vector<int> channels;
  std::vector<double> xs;
  for (int m = 0; m < data.size(); ++m) append_linspace(channels, xs, m, min, max, count);
  return predict_points(data, model, channels, column(xs), include_noise);
}

PredictionTable predict_span(const DataSet& data, const ModelState& model, int count, bool include_noise) {
  if (count < 1) throw InvalidInput("grid count must be at least 1");
  require_1d(data);
  std::vector<int> channels;
  std::vector<double> xs;
  for (int m = 0; m < data.size(); ++m) {
    const Eigen::VectorXd x = data[m].x().col(0);
    append_linspace(channels, xs, m, x.minCoeff(), x.maxCoeff(), count);
  }
  return predict_points(data, model, channels, column(xs), include_noise);
}

PredictionTable predict_removed(const DataSet& data, const ModelState& model, bool include_noise) {
  std::vector<int> channels;
  std::vector<Eigen::RowVectorXd> rows;
  for (int m = 0; m < data.size(); ++m) {
    for (std::size_t i : data[m].removed_indices()) {
      channels.push_back(m);
      rows.push_back(data[m].x().row(static_cast<Eigen::Index>(i)));
    }
  }
  const int P = data.size() ? data[0].input_dim() : 1;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), P);
  for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = rows[r];
  return predict_points(data, model, channels, x, include_noise);
}

std::string predictions_csv(const PredictionTable& table) {
  std::string out = "channel,x,mean,lower,upper\n";
  for (const auto& r : table.rows) {
    out += table.channel_names.at(static_cast<std::size_t>(r.channel));
    out += ',' + fmt(r.x) + ',' + fmt(r.mean) + ',' + fmt(r.lower) + ',' + fmt(r.upper) + '\n';
  }
  return out;
}

// ---- fit ------------------------------------------------------------------------

std::string report_json(const FitReport& r) {
  json j = json::object();
  j["toolkit_version"] = std::string(toolkit_version());
  j["family"] = r.family;
  j["components"] = r.components;
  j["parameter_count"] = r.parameter_count;
  j["kernel_parameter_count"] = r.kernel_parameter_count;
  j["train_points"] = r.train_points;
  j["init_method"] = r.init_method;
  j["init_combination"] = r.init_combination;
  j["initial_nlml"] = detail::number(r.initial_nlml);
  j["final_nlml"] = detail::number(r.final_nlml);
  j["iterations"] = r.iterations;
  j["convergence"] = std::string(to_string(r.reason));
  json channels = json::array();
  for (const auto& c : r.channels) {
    json cj = json::object();
    cj["name"] = c.name;
    cj["points"] = c.points;
    cj["train"] = c.train;
    cj["removed"] = c.removed;
    channels.push_back(std::move(cj));
  }
  j["channels"] = std::move(channels);
  json heldout = json::object();
  heldout["initial"] = r.initial_heldout ? metrics_report_to_json(*r.initial_heldout) : json(nullptr);
  heldout["final"] = r.final_heldout ? metrics_report_to_json(*r.final_heldout) : json(nullptr);
  j["heldout"] = std::move(heldout);
  return j.dump(2) + "\n";
}

FitOutcome run_fit(const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  DataSet data = stage("load", [&] { return load_data(config.data); });
  const std::string fingerprint = stage("load", [&] { return file_fingerprint(config.data.file); });
  stage("preprocess", [&] { apply_preprocess(data, config.preprocess); });

  Initialization init = stage("init", [&] {
    return config.init == InitMethod::LombScargle
               ? init_from_ls(data, config.family, config.components)
               : init_from_sm(data, config.family, config.components, config.init_iters);
  });
  ModelState model = stage("init", [&] { return model_for(data, init.kernel, init.noise); });

  FitReport report;
  report.family = std::string(to_string(config.family));
  report.components = config.components;
  report.parameter_count = model.parameter_count();
  report.kernel_parameter_count = kernel_param_count(model.kernel());
  report.train_points = model.inputs().size();
  report.init_method = config.init == InitMethod::LombScargle ? "ls" : "sm";
  report.init_combination = config.family == KernelFamily::CSM || config.family == KernelFamily::SMLMC
                                ? "power-weighted mean over channels"
                                : "per channel";
  for (const auto& ch : data.channels())
    report.channels.push_back({ch.name(), ch.size(), ch.train_count(), ch.size() - ch.train_count()});

  const bool removed = has_removed(data);
  stage("init", [&] {
    report.initial_nlml = nlml(model);
    if (!std::isfinite(report.initial_nlml)) throw NotPositiveDefinite("initial marginal likelihood is not finite", 0.0);
    if (removed) report.initial_heldout = heldout_metrics(data, model);
  });

  const TrainResult result = stage("train", [&] { return train(model, config.train); });
  stage("train", [&] {
    report.final_nlml = nlml(model);
    report.iterations = result.iterations;
    report.reason = result.reason;
    if (removed) report.final_heldout = heldout_metrics(data, model);
  });

  ModelArchive archive;
  archive.version = std::string(toolkit_version());
  archive.kernel = model.kernel();
  archive.noise = model.noise();
  archive.data = config.data;
  archive.fingerprint = fingerprint;
  archive.include_noise = config.include_noise;
  for (const auto& ch : data.channels()) archive.channels.push_back({ch.name(), ch.mask(), ch.transforms()});

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return FitOutcome{std::move(data), std::move(model), std::move(archive), std::move(report)};
}

std::filesystem::path timing_path(const std::filesystem::path& report) {
  return report.parent_path() / (report.stem().string() + ".timing.json");
}

void write_fit_outputs(const PipelineConfig& config, const FitOutcome& outcome) {
  stage("output", [&] {
    save_archive(config.output.model, outcome.archive);
    write_text(config.output.report, report_json(outcome.report));
    json timing = json::object();
    timing["wall_clock_seconds"] = outcome.report.wall_clock_seconds;
    write_text(timing_path(config.output.report), timing.dump(2) + "\n");
    if (config.output.predictions || config.output.plot) {
      const PredictionTable table = predict_span(outcome.data, outcome.model, 200, config.include_noise);
      if (config.output.predictions) write_text(*config.output.predictions, predictions_csv(table));
      if (config.output.plot) write_text(*config.output.plot, render_prediction_svg(outcome.data, table));
    }
    if (config.output.spectrum)
      write_text(*config.output.spectrum, cross_spectrum_json(outcome.model.kernel(), names_of(outcome.data)));
  });
}

RestoredModel restore_model(const ModelArchive& archive, const std::optional<std::filesystem::path>& data_override) {
  DataSource source = archive.data;
  if (data_override) source.file = *data_override;
  const std::string fingerprint = file_fingerprint(source.file);
  if (fingerprint != archive.fingerprint)
    throw InvalidInput("data fingerprint mismatch for '" + source.file.string() + "': archive has " +
                       archive.fingerprint + ", file has " + fingerprint);
  DataSet data = load_data(source);
  if (data.size() != static_cast<int>(archive.channels.size()))
    throw InvalidInput("archive has " + std::to_string(archive.channels.size()) + " channels, data has " +
                       std::to_string(data.size()));
  for (int m = 0; m < data.size(); ++m) {
    const ChannelArchive& ca = archive.channels[static_cast<std::size_t>(m)];
    if (data[m].name() != ca.name) throw InvalidInput("channel " + std::to_string(m) + " is '" + data[m].name() +
                                                      "' in the data but '" + ca.name + "' in the archive");
    data[m].set_mask(ca.mask);
    data[m].restore_transforms(ca.transforms);
  }
  ModelState model = model_for(data, archive.kernel, archive.noise);
  model.factorization();
  return RestoredModel{std::move(data), std::move(model)};
}

// ---- spectra --------------------------------------------------------------------

std::vector<ChannelSpectrum> compute_periodograms(const DataSet& data, int Q) {
  std::vector<ChannelSpectrum> out;
  for (const auto& ch : data.channels()) {
    ChannelSpectrum s;
    s.name = ch.name();
    const std::vector<double> grid = default_freq_grid(ch);
    s.periodogram = lomb_scargle(ch, grid);
    s.peaks = pick_peaks(s.periodogram, Q);
    out.push_back(std::move(s));
  }
  return out;
}

std::string periodogram_csv(const Periodogram& pgram) {
  std::string out = "frequency,power\n";
  for (std::size_t k = 0; k < pgram.freqs.size(); ++k) out += fmt(pgram.freqs[k]) + ',' + fmt(pgram.power[k]) + '\n';
  return out;
}

std::string peaks_json(const ChannelSpectrum& spectrum) {
  json j = json::object();
  j["channel"] = spectrum.name;
  j["frequency_unit"] = "cycles per input unit";
  const auto& f = spectrum.periodogram.freqs;
  j["grid_step"] = f.size() > 1 ? (f.back() - f.front()) / static_cast<double>(f.size() - 1) : 0.0;
  json peaks = json::array();
  for (const auto& p : spectrum.peaks) {
    json pj = json::object();
    pj["frequency"] = p.frequency;
    pj["power"] = p.power;
    pj["fwhm"] = p.fwhm;
    pj["sigma"] = p.sigma;
    peaks.push_back(std::move(pj));
  }
  j["peaks"] = std::move(peaks);
  return j.dump(2) + "\n";
}

std::string cross_spectrum_json(const KernelSpec& kernel, const std::vector<std::string>& channel_names) {
  if (!is_spectral(kernel.family()))
    throw UnsupportedFamily("cross spectrum is undefined for the " + std::string(to_string(kernel.family())) +
                            " family");
  const int M = kernel.channels();
  const int Q = kernel.components();
  const int P = kernel.input_dim();
  if (static_cast<int>(channel_names.size()) != M) throw InvalidInput("channel names do not match the kernel");

  struct Component {
    std::vector<double> mean;      // angular
    std::vector<double> variance;  // angular^2
    double magnitude = 0.0;
    double phase = 0.0;
    std::vector<double> delay;
  };
  auto component = [&](int q, int i, int j) {
    Component c;
    c.delay.assign(static_cast<std::size_t>(P), 0.0);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, MOSMParams>) {
            const Eigen::Index ri = static_cast<Eigen::Index>(q) * M + i;
            const Eigen::Index rj = static_cast<Eigen::Index>(q) * M + j;
            double log_amp = 0.0;
            for (int d = 0; d < P; ++d) {
              const double a = p.variance(ri, d);
              const double b = p.variance(rj, d);
              const double s = a + b;
              const double var_ij = 2.0 * (a * b) / s;
              const double dm = p.mean(ri, d) - p.mean(rj, d);
              c.mean.push_back((a * p.mean(rj, d) + b * p.mean(ri, d)) / s);
              c.variance.push_back(var_ij);
              c.delay[static_cast<std::size_t>(d)] = p.delay(ri, d) - p.delay(rj, d);
              log_amp += 0.5 * std::log(var_ij) - 0.25 * dm * dm / s;
            }
            c.magnitude = p.weight(q, i) * p.weight(q, j) * std::pow(kTwoPi, 0.5 * P) * std::exp(log_amp);
            c.phase = p.phase(q, i) - p.phase(q, j);
          } else if constexpr (std::is_same_v<T, SMParams> || std::is_same_v<T, CSMParams> ||
                               std::is_same_v<T, SMLMCParams>) {
            for (int d = 0; d < P; ++d) {
              c.mean.push_back(p.mean(q, d));
              c.variance.push_back(p.variance(q, d));
            }
            if constexpr (std::is_same_v<T, SMParams>) {
              c.magnitude = p.weight(q);
            } else if constexpr (std::is_same_v<T, CSMParams>) {
              c.magnitude = p.amplitude(q, i) * p.amplitude(q, j);
              c.phase = p.phase(q, i) - p.phase(q, j);
            } else {
              c.magnitude = p.mixing(q, i) * p.mixing(q, j);
            }
          }
        },
        kernel.params());
    return c;
  };

  json j = json::object();
  j["family"] = std::string(to_string(kernel.family()));
  j["frequency_unit"] = "cycles per input unit";
  j["bandwidth"] = "standard deviation of the spectral Gaussian, cycles per input unit";
  j["magnitude"] = kernel.family() == KernelFamily::MOSM ? "alpha: zero-lag covariance of the component at zero delay"
                                                         : "product of the channel weights of the component";
  json pairs = json::array();
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < M; ++k) {
      json pj = json::object();
      pj["i"] = i;
      pj["j"] = k;
      pj["channel_i"] = channel_names[static_cast<std::size_t>(i)];
      pj["channel_j"] = channel_names[static_cast<std::size_t>(k)];
      json comps = json::array();
      for (int q = 0; q < Q; ++q) {
        const Component c = component(q, i, k);
        json cj = json::object();
        cj["q"] = q;
        json freq = json::array();
        json bw = json::array();
        for (int d = 0; d < P; ++d) {
          freq.push_back(c.mean[static_cast<std::size_t>(d)] / kTwoPi);
          bw.push_back(std::sqrt(c.variance[static_cast<std::size_t>(d)]) / kTwoPi);
        }
        cj["frequency"] = std::move(freq);
        cj["bandwidth"] = std::move(bw);
        cj["magnitude"] = c.magnitude;
        cj["phase"] = c.phase;
        cj["delay"] = c.delay;
        comps.push_back(std::move(cj));
      }
      pj["components"] = std::move(comps);
      pairs.push_back(std::move(pj));
    }
  }
  j["pairs"] = std::move(pairs);
  return j.dump(2) + "\n";
}

// ---- synthetic data ---------------------------------------------------------------

KernelSpec default_simulation_kernel(KernelFamily family, int channels, int components) {
  if (channels < 1 || components < 1) throw InvalidInput("simulation needs at least one channel and one component");
  if (family == KernelFamily::SM && channels != 1)
    throw InvalidInput("SM kernel is single-channel; use --channels 1");
  if (family == KernelFamily::Noise) throw UnsupportedFamily("NOISE cannot be simulated");
  const int M = channels;
  const int Q = components;
  KernelSpec spec = KernelSpec::make(family, M, Q, 1);
  // Periods of 24 h / (q + 1); spectral std of 0.005 cycles per hour.
  auto mean = [](int q) { return kTwoPi * (q + 1) / 24.0; };
  const double spectral_var = std::pow(kTwoPi * 0.005, 2);
  auto share = [&](int q, int m) {
    double total = 0.0;
    for (int r = 0; r < Q; ++r) total += 1.0 / (r + 1);
    return (1.0 / (q + 1)) / total * (1.0 + 0.25 * ((q + m) % 2));
  };
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SMParams>) {
          for (int q = 0; q < Q; ++q) {
            p.weight(q) = share(q, 0);
            p.mean(q, 0) = mean(q);
            p.variance(q, 0) = spectral_var;
          }
        } else if constexpr (std::is_same_v<T, MOSMParams>) {
          const double unit = std::sqrt(kTwoPi) * std::sqrt(spectral_var);
          for (int q = 0; q < Q; ++q) {
            for (int m = 0; m < M; ++m) {
              const Eigen::Index r = static_cast<Eigen::Index>(q) * M + m;
              p.weight(q, m) = std::sqrt(share(q, m) / unit);
              p.mean(r, 0) = mean(q) * (1.0 + 0.01 * m);
              p.variance(r, 0) = spectral_var;
              p.delay(r, 0) = 1.5 * m;
              p.phase(q, m) = 0.2 * m;
            }
          }
        } else if constexpr (std::is_same_v<T, CSMParams>) {
          for (int q = 0; q < Q; ++q) {
            p.mean(q, 0) = mean(q);
            p.variance(q, 0) = spectral_var;
            for (int m = 0; m < M; ++m) {
              p.amplitude(q, m) = std::sqrt(share(q, m));
              p.phase(q, m) = 0.3 * m;
            }
          }
        } else if constexpr (std::is_same_v<T, SMLMCParams>) {
          for (int q = 0; q < Q; ++q) {
            p.mean(q, 0) = mean(q);
            p.variance(q, 0) = spectral_var;
            for (int m = 0; m < M; ++m) p.mixing(q, m) = std::sqrt(share(q, m)) * ((q + m) % 3 == 2 ? -1.0 : 1.0);
          }
        } else if constexpr (std::is_same_v<T, ConvParams>) {
          for (int q = 0; q < Q; ++q) {
            for (int m = 0; m < M; ++m) {
              p.weight(q, m) = std::sqrt(share(q, m));
              p.variance(static_cast<Eigen::Index>(q) * M + m, 0) = std::pow(3.0 * (q + 1) + 0.5 * m, 2);
            }
          }
        }
      },
      spec.mutable_params());
  spec.validate();
  return spec;
}

std::string simulate_csv(const SimulationOptions& o) {
  const KernelSpec kernel = o.kernel ? *o.kernel : default_simulation_kernel(o.family, o.channels, o.components);
  if (kernel.input_dim() != 1) throw InvalidInput("simulation needs a one-dimensional kernel");
  if (o.points < 1) throw InvalidInput("points must be at least 1");
  if (!(o.noise >= 0.0) || !std::isfinite(o.noise)) throw InvalidInput("noise must be non-negative");
  if (!(o.spacing > 0.0) || !std::isfinite(o.spacing)) throw InvalidInput("spacing must be positive");
  const int M = kernel.channels();
  const int N = o.points;
  std::vector<int> channels;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(M) * N, 1);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < N; ++k) {
      channels.push_back(m);
      x(static_cast<Eigen::Index>(m) * N + k, 0) = o.spacing * k;
    }
  }
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(M, o.noise);
  const Eigen::VectorXd y = sample_prior(kernel, AugmentedInput(channels, x), noise, o.seed);
  std::string out = "time";
  for (int m = 0; m < M; ++m) out += ",ch" + std::to_string(m);
  out += '\n';
  for (int k = 0; k < N; ++k) {
    const double t = o.spacing * k;
    out += fmt(t);
    for (int m = 0; m < M; ++m) {
      const double v = y(static_cast<Eigen::Index>(m) * N + k) + o.level * (m + 1) + o.drift * (m + 1) * t;
      out += ',' + fmt(v);
    }
    out += '\n';
  }
  return out;
}

// ---- file helpers -----------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mogp
