#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <regex>

#include "mogp/archive.hpp"
#include "mogp/error.hpp"
#include "mogp/pipeline.hpp"
#include "oracles.hpp"

using namespace mogp;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path workdir(const std::string& name) {
  const fs::path d = fs::path(MOGP_TEST_TMP) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::string small_config(int max_iters = 30) {
  json j = {
      {"data", {{"file", "data.csv"}, {"x_col", "time"}, {"y_cols", {"ch0", "ch1", "ch2"}}}},
      {"preprocess",
       {{{"op", "remove_relative_range"}, {"channel", 0}, {"start", 0.4}, {"end", 0.6}},
        {{"op", "remove_randomly"}, {"pct", 0.2}, {"seed", 3}},
        {{"op", "transform"}, {"name", "detrend"}, {"degree", 1}},
        {{"op", "transform"}, {"name", "whiten"}}}},
      {"model", {{"kernel", "MOSM"}, {"Q", 2}}},
      {"init", {{"method", "ls"}}},
      {"train", {{"method", "lbfgs"}, {"max_iters", max_iters}, {"seed", 0}}},
      {"output",
       {{"model", "out/model.json"},
        {"report", "out/report.json"},
        {"predictions", "out/pred.csv"},
        {"plot", "out/pred.svg"},
        {"spectrum", "out/cross.json"}}}};
  return j.dump(2);
}

PipelineConfig prepared(const fs::path& dir, int max_iters = 30) {
  SimulationOptions sim;
  sim.channels = 3;
  sim.points = 40;
  sim.components = 2;
  sim.seed = 5;
  sim.level = 2.0;
  write_text(dir / "data.csv", simulate_csv(sim));
  write_text(dir / "config.json", small_config(max_iters));
  return load_config(dir / "config.json");
}

}  // namespace

TEST(Metrics, WorkedExamples) {
  const std::vector<double> y = {1.0, 4.0};
  const ErrorMetrics exact = error_metrics(y, y);
  EXPECT_EQ(exact.mae, 0.0);
  EXPECT_EQ(exact.rmse, 0.0);
  const ErrorMetrics m = error_metrics(std::vector<double>{1.0, 2.0}, y);
  EXPECT_DOUBLE_EQ(m.mae, 1.0);
  EXPECT_NEAR(m.rmse, 1.41421, 1e-5);
  const ErrorMetrics p = error_metrics(std::vector<double>{1.0, 3.0}, std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(p.mape, 0.5);
  EXPECT_EQ(p.mape_count, 1u);
  EXPECT_TRUE(std::isnan(error_metrics(std::vector<double>{1.0}, std::vector<double>{0.0}).mape));
  EXPECT_THROW(error_metrics(std::vector<double>{}, std::vector<double>{}), InvalidInput);
}

TEST(Config, ParsesFullConfigAndResolvesPaths) {
  const PipelineConfig c = parse_config(small_config(), "/base/dir");
  EXPECT_EQ(c.data.file, fs::path("/base/dir/data.csv"));
  EXPECT_EQ(c.data.csv.y_cols.size(), 3u);
  ASSERT_EQ(c.preprocess.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<RemoveRangeOp>(c.preprocess[0]));
  EXPECT_TRUE(std::holds_alternative<RemoveRandomOp>(c.preprocess[1]));
  EXPECT_EQ(c.family, KernelFamily::MOSM);
  EXPECT_EQ(c.components, 2);
  EXPECT_EQ(c.train.max_iters, 30);
  EXPECT_EQ(c.output.model, fs::path("/base/dir/out/model.json"));
  EXPECT_TRUE(c.include_noise);
}

TEST(Config, RejectsBadInput) {
  json j = json::parse(small_config());
  j["model"]["kernel"] = "RBF";
  EXPECT_THROW(parse_config(j.dump(), "/"), InvalidInput);
  j = json::parse(small_config());
  j["preprocess"][0]["op"] = "drop";
  EXPECT_THROW(parse_config(j.dump(), "/"), InvalidInput);
  j = json::parse(small_config());
  j["preprocess"][0]["start"] = 0.9;
  EXPECT_THROW(parse_config(j.dump(), "/"), InvalidInput);
  j = json::parse(small_config());
  j["extra"] = 1;
  EXPECT_THROW(parse_config(j.dump(), "/"), InvalidInput);
  EXPECT_THROW(parse_config("{not json", "/"), InvalidInput);
}

TEST(Preprocess, UnknownChannelIsReported) {
  const fs::path dir = workdir("preprocess");
  PipelineConfig c = prepared(dir);
  DataSet data = load_data(c.data);
  std::vector<PreprocessOp> ops = {RemoveRangeOp{ChannelRef{std::nullopt, "nope"}, 0.1, 0.2}};
  EXPECT_THROW(apply_preprocess(data, ops), InvalidInput);
  ops = {RemoveRangeOp{ChannelRef{7, ""}, 0.1, 0.2}};
  EXPECT_THROW(apply_preprocess(data, ops), InvalidInput);
}

TEST(Preprocess, RandomRemovalUsesPerChannelSeeds) {
  const fs::path dir = workdir("seeds");
  PipelineConfig c = prepared(dir);
  DataSet data = load_data(c.data);
  apply_preprocess(data, {RemoveRandomOp{std::nullopt, 0.25, 10}});
  for (int m = 0; m < data.size(); ++m) {
    Channel copy("x", data[m].x(), data[m].raw_y());
    remove_randomly(copy, 0.25, 10 + static_cast<std::uint64_t>(m));
    EXPECT_EQ(copy.mask(), data[m].mask());
  }
}

TEST(Fit, ReportArchiveAndRestore) {
  const fs::path dir = workdir("fit");
  const PipelineConfig c = prepared(dir);
  const FitOutcome out = run_fit(c);
  write_fit_outputs(c, out);

  EXPECT_EQ(out.report.parameter_count, 3u * 2u * 5u + 3u);
  EXPECT_LE(out.report.final_nlml, out.report.initial_nlml);
  ASSERT_TRUE(out.report.final_heldout.has_value());
  const json report = json::parse(read_text(c.output.report));
  EXPECT_EQ(report["parameter_count"], out.report.parameter_count);
  EXPECT_EQ(report["channels"].size(), 3u);
  EXPECT_TRUE(report.contains("convergence"));
  const json timing = json::parse(read_text(timing_path(c.output.report)));
  EXPECT_GE(timing["wall_clock_seconds"].get<double>(), 0.0);

  const ModelArchive archive = load_archive(c.output.model);
  EXPECT_EQ(archive_to_json(archive), read_text(c.output.model));
  const RestoredModel restored = restore_model(archive);
  const AugmentedData all = to_augmented(out.data, Selection::All);
  const PredictionResult a = predict(out.model, all.input, true);
  const PredictionResult b = predict(restored.model, all.input, true);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance, b.variance);
  for (int m = 0; m < out.data.size(); ++m) {
    EXPECT_EQ(out.data[m].mask(), restored.data[m].mask());
    EXPECT_EQ(out.data[m].y(), restored.data[m].y());
  }

  const MetricsReport direct = heldout_metrics(restored.data, restored.model);
  EXPECT_EQ(metrics_json(direct), metrics_json(*out.report.final_heldout));
}

TEST(Fit, ZeroIterationsKeepsNlml) {
  const fs::path dir = workdir("zero");
  const FitOutcome out = run_fit(prepared(dir, 0));
  EXPECT_EQ(out.report.final_nlml, out.report.initial_nlml);
  EXPECT_EQ(out.report.iterations, 0);
}

TEST(Fit, StageLabelledErrors) {
  const fs::path dir = workdir("errors");
  PipelineConfig c = prepared(dir);
  c.data.file = dir / "missing.csv";
  try {
    run_fit(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_NE(std::string(e.what()).find("missing.csv"), std::string::npos);
  }
  c = prepared(dir);
  c.preprocess.push_back(RemoveRangeOp{ChannelRef{0, ""}, 0.0, 1.0});
  try {
    run_fit(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "init");
  }
}

TEST(Fit, OutputsAreByteDeterministic) {
  const fs::path d1 = workdir("det1");
  const fs::path d2 = workdir("det2");
  for (const auto& d : {d1, d2}) {
    const PipelineConfig c = prepared(d);
    write_fit_outputs(c, run_fit(c));
  }
  for (const char* f : {"out/model.json", "out/report.json", "out/pred.csv", "out/pred.svg", "out/cross.json"}) {
    std::string a = read_text(d1 / f);
    std::string b = read_text(d2 / f);
    if (std::string(f) == "out/model.json") {
      a = std::regex_replace(a, std::regex("det1"), "det");
      b = std::regex_replace(b, std::regex("det2"), "det");
    }
    EXPECT_EQ(a, b) << f;
  }
}

TEST(Restore, FingerprintMismatchIsRejected) {
  const fs::path dir = workdir("fingerprint");
  const PipelineConfig c = prepared(dir, 5);
  const FitOutcome out = run_fit(c);
  std::string text = read_text(dir / "data.csv");
  text.back() = '9';
  write_text(dir / "other.csv", text + "\n");
  EXPECT_THROW(restore_model(out.archive, dir / "other.csv"), InvalidInput);
}

TEST(Predictions, RowsBoundsAndDomain) {
  const fs::path dir = workdir("pred");
  const PipelineConfig c = prepared(dir, 10);
  const FitOutcome out = run_fit(c);
  const PredictionTable grid = predict_grid(out.data, out.model, 0.0, 39.0, 100, true);
  EXPECT_EQ(grid.rows.size(), 300u);
  for (const auto& r : grid.rows) {
    EXPECT_LE(r.lower, r.mean);
    EXPECT_LE(r.mean, r.upper);
  }
  const std::string csv = predictions_csv(grid);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "channel,x,mean,lower,upper");
  EXPECT_EQ(count(csv, "\n"), 301u);

  const PredictionTable removed = predict_removed(out.data, out.model, false);
  std::size_t expected = 0;
  for (const auto& ch : out.data.channels()) expected += ch.removed_indices().size();
  EXPECT_EQ(removed.rows.size(), expected);
}

TEST(Predictions, NoiselessModelReproducesTrainingValues) {
  const fs::path dir = workdir("noiseless");
  const PipelineConfig c = prepared(dir, 0);
  FitOutcome out = run_fit(c);
  KernelSpec k = out.model.kernel();
  std::get<MOSMParams>(k.mutable_params()).variance.setConstant(4.0);
  out.model.set_kernel(k);
  out.model.set_noise(Eigen::VectorXd::Zero(out.data.size()));
  std::vector<int> channels;
  std::vector<double> xs;
  std::vector<double> expect;
  for (int m = 0; m < out.data.size(); ++m)
    for (std::size_t i : out.data[m].train_indices()) {
      channels.push_back(m);
      xs.push_back(out.data[m].x()(static_cast<Eigen::Index>(i), 0));
      expect.push_back(out.data[m].raw_y()(static_cast<Eigen::Index>(i)));
    }
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const PredictionTable t = predict_points(out.data, out.model, channels, x, false);
  for (std::size_t k = 0; k < expect.size(); ++k) EXPECT_NEAR(t.rows[k].mean, expect[k], 1e-6);
}

TEST(Svg, PanelsMarkersAndDeterminism) {
  const fs::path dir = workdir("svg");
  const PipelineConfig c = prepared(dir, 5);
  const FitOutcome out = run_fit(c);
  const PredictionTable t = predict_span(out.data, out.model, 50, true);
  const std::string svg = render_prediction_svg(out.data, t);
  EXPECT_EQ(count(svg, "<g class=\"panel\""), 3u);
  EXPECT_EQ(count(svg, "<g class=\"heldout\""), 3u);
  EXPECT_NE(svg.find("1.96"), std::string::npos);
  EXPECT_EQ(svg, render_prediction_svg(out.data, t));

  DataSet clean = load_data(c.data);
  for (int m = 0; m < clean.size(); ++m) apply_transform(clean[m], Whiten{});
  const AugmentedData tr = to_augmented(clean, Selection::Train);
  const ModelState model(out.model.kernel(), out.model.noise(), tr.input, tr.y);
  const std::string plain = render_prediction_svg(clean, predict_span(clean, model, 20, true));
  EXPECT_EQ(count(plain, "<g class=\"panel\""), 3u);
  EXPECT_EQ(count(plain, "heldout"), 0u);
}

TEST(CrossSpectrum, MosmDiagonalAlphaAndSymmetry) {
  std::mt19937_64 rng(12);
  const KernelSpec one = oracle::random_kernel(KernelFamily::MOSM, 1, 2, 1, rng);
  const json j1 = json::parse(cross_spectrum_json(one, {"a"}));
  ASSERT_EQ(j1["pairs"].size(), 1u);
  const auto& p = one.get<MOSMParams>();
  for (int q = 0; q < 2; ++q) {
    const double alpha = p.weight(q, 0) * p.weight(q, 0) * std::sqrt(2.0 * oracle::kPi) * std::sqrt(p.variance(q, 0));
    EXPECT_NEAR(j1["pairs"][0]["components"][q]["magnitude"].get<double>(), alpha, 1e-14);
    EXPECT_NEAR(j1["pairs"][0]["components"][q]["frequency"][0].get<double>(), p.mean(q, 0) / (2 * oracle::kPi), 1e-15);
  }

  const KernelSpec three = oracle::random_kernel(KernelFamily::MOSM, 3, 2, 1, rng);
  const json j3 = json::parse(cross_spectrum_json(three, {"a", "b", "c"}));
  ASSERT_EQ(j3["pairs"].size(), 9u);
  for (const auto& pair : j3["pairs"]) {
    const int i = pair["i"];
    const int k = pair["j"];
    const auto& mirror = j3["pairs"][static_cast<std::size_t>(k * 3 + i)];
    for (int q = 0; q < 2; ++q)
      EXPECT_DOUBLE_EQ(pair["components"][q]["magnitude"].get<double>(), mirror["components"][q]["magnitude"].get<double>());
  }

  for (KernelFamily f : {KernelFamily::CSM, KernelFamily::SMLMC})
    EXPECT_NO_THROW(cross_spectrum_json(oracle::random_kernel(f, 2, 1, 1, rng), {"a", "b"}));
  EXPECT_THROW(cross_spectrum_json(oracle::random_kernel(KernelFamily::CONV, 2, 1, 1, rng), {"a", "b"}), UnsupportedFamily);
}

TEST(Simulate, ShapeDeterminismAndRoundTrip) {
  const fs::path dir = workdir("simulate");
  SimulationOptions o;
  o.channels = 4;
  o.points = 150;
  o.seed = 9;
  const std::string a = simulate_csv(o);
  EXPECT_EQ(a, simulate_csv(o));
  EXPECT_EQ(count(a, "\n"), 151u);
  EXPECT_EQ(count(a.substr(0, a.find('\n')), ","), 4u);
  write_text(dir / "sim.csv", a);
  const DataSet ds = load_csv(dir / "sim.csv", {"time", {"ch0", "ch1", "ch2", "ch3"}, std::nullopt, 3600.0});
  ASSERT_EQ(ds.size(), 4);
  for (const auto& ch : ds.channels()) EXPECT_EQ(ch.size(), 150u);

  for (KernelFamily f : {KernelFamily::CSM, KernelFamily::SMLMC, KernelFamily::CONV}) {
    o.family = f;
    EXPECT_NO_THROW(simulate_csv(o)) << to_string(f);
  }
  o.family = KernelFamily::SM;
  EXPECT_THROW(simulate_csv(o), InvalidInput);
  o.channels = 1;
  EXPECT_NO_THROW(simulate_csv(o));
  o.points = 0;
  EXPECT_THROW(simulate_csv(o), InvalidInput);
}

TEST(Periodograms, OneSpectrumPerChannel) {
  const fs::path dir = workdir("pgram");
  const PipelineConfig c = prepared(dir);
  DataSet data = load_data(c.data);
  const auto spectra = compute_periodograms(data, 2);
  ASSERT_EQ(spectra.size(), 3u);
  const json peaks = json::parse(peaks_json(spectra[0]));
  EXPECT_EQ(peaks["peaks"].size(), 2u);
  const std::string csv = periodogram_csv(spectra[0].periodogram);
  EXPECT_EQ(count(csv, "\n"), spectra[0].periodogram.freqs.size() + 1);
  EXPECT_EQ(count(render_periodogram_svg(spectra), "<g class=\"panel\""), 3u);
}

TEST(Archive, KernelJsonRoundTrip) {
  std::mt19937_64 rng(4);
  for (KernelFamily f : {KernelFamily::SM, KernelFamily::MOSM, KernelFamily::CSM, KernelFamily::SMLMC, KernelFamily::CONV}) {
    const KernelSpec k = oracle::random_kernel(f, oracle::channels_for(f, 2), 2, 2, rng);
    const KernelSpec back = kernel_from_json(kernel_to_json(k));
    EXPECT_EQ(back.family(), f);
    EXPECT_EQ(constrained_values(back), constrained_values(k)) << to_string(f);
  }
  EXPECT_THROW(kernel_from_json("{\"family\":\"MOSM\"}"), InvalidInput);
}
