#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mogp/archive.hpp"
#include "mogp/error.hpp"
#include "mogp/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

GridSpec parse_grid(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw mogp::InvalidInput("--grid expects min:max:count, got '" + text + "'");
  try {
    std::size_t used = 0;
    GridSpec g;
    g.min = std::stod(text.substr(0, a));
    g.max = std::stod(text.substr(a + 1, b - a - 1));
    const std::string count = text.substr(b + 1);
    g.count = std::stoi(count, &used);
    if (used != count.size()) throw std::invalid_argument(count);
    return g;
  } catch (const std::logic_error&) {
    throw mogp::InvalidInput("--grid expects min:max:count, got '" + text + "'");
  }
}

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) {
    mogp::write_text(*out, text);
  } else {
    std::cout << text;
  }
}

mogp::RestoredModel restore(const std::string& model_path, const std::optional<std::string>& data) {
  const mogp::ModelArchive archive = mogp::load_archive(model_path);
  std::optional<fs::path> override_path;
  if (data) override_path = fs::path(*data);
  return mogp::restore_model(archive, override_path);
}

template <typename F>
int guarded(const char* stage, F&& f) {
  try {
    f();
    return 0;
  } catch (const mogp::StageError& e) {
    std::cerr << "mogp: error in " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "mogp: error in " << stage << ": " << e.what() << "\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-output Gaussian process toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mogp::toolkit_version()));

  std::string config_path;
  auto* fit = app.add_subcommand("fit", "Load, preprocess, initialize and train a model from a JSON config");
  fit->add_option("config", config_path, "Pipeline config")->required();

  std::string model_path;
  std::optional<std::string> data_path;
  std::optional<std::string> out_path;
  std::optional<std::string> grid;
  std::optional<int> span;
  bool removed = false;
  bool include_noise = false;
  bool no_noise = false;
  auto* predict = app.add_subcommand("predict", "Predict from a saved model");
  predict->add_option("model", model_path, "Model archive")->required();
  auto* grid_opt = predict->add_option("--grid", grid, "min:max:count evenly spaced points per channel");
  auto* span_opt = predict->add_option("--span", span, "count points across each channel's own range");
  auto* removed_flag = predict->add_flag("--removed", removed, "Predict at the held-out points");
  grid_opt->excludes(span_opt)->excludes(removed_flag);
  span_opt->excludes(removed_flag);
  auto* noise_flag = predict->add_flag("--include-noise", include_noise, "Include observation noise in the band");
  predict->add_flag("--no-noise", no_noise, "Exclude observation noise from the band")->excludes(noise_flag);
  predict->add_option("--data", data_path, "Data file to use instead of the archived path");
  predict->add_option("--out", out_path, "Output CSV (stdout when omitted)");
  std::optional<std::string> plot_path;
  predict->add_option("--svg", plot_path, "Also write an SVG plot");

  std::optional<std::string> out_dir;
  std::optional<std::string> svg_path;
  std::optional<int> peaks_q;
  auto* periodogram = app.add_subcommand("periodogram", "Lomb-Scargle spectra of the preprocessed channels");
  periodogram->add_option("config", config_path, "Pipeline config")->required();
  periodogram->add_option("--out-dir", out_dir, "Output directory (defaults to the config's directory)");
  periodogram->add_option("--svg", svg_path, "Also write an SVG plot");
  periodogram->add_option("-Q,--peaks", peaks_q, "Number of peaks to report (defaults to the config's Q)");

  mogp::SimulationOptions sim;
  std::string sim_family = "MOSM";
  std::optional<std::string> params_path;
  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic dataset from a kernel prior");
  simulate->add_option("--kernel", sim_family, "Kernel family")->capture_default_str();
  simulate->add_option("--channels", sim.channels, "Number of channels")->capture_default_str();
  simulate->add_option("--points", sim.points, "Points per channel")->capture_default_str();
  simulate->add_option("--components", sim.components, "Spectral components")->capture_default_str();
  simulate->add_option("--noise", sim.noise, "Observation noise variance")->capture_default_str();
  simulate->add_option("--spacing", sim.spacing, "Input spacing")->capture_default_str();
  simulate->add_option("--level", sim.level, "Offset added to channel m as level * (m + 1)")->capture_default_str();
  simulate->add_option("--drift", sim.drift, "Slope added to channel m as drift * (m + 1)")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--params", params_path, "Kernel JSON overriding --kernel/--channels/--components");
  simulate->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  auto* metrics = app.add_subcommand("metrics", "Error metrics at held-out points");
  metrics->add_option("model", model_path, "Model archive")->required();
  metrics->add_flag("--removed", removed, "Score against the removed points")->required();
  metrics->add_option("--data", data_path, "Data file to use instead of the archived path");
  metrics->add_option("--out", out_path, "Output JSON (stdout when omitted)");

  auto* cross = app.add_subcommand("cross-spectrum", "Per channel pair spectral components of a saved model");
  cross->add_option("model", model_path, "Model archive")->required();
  cross->add_option("--out", out_path, "Output JSON (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) {
    return guarded("config", [&] {
      const mogp::PipelineConfig config = mogp::load_config(config_path);
      const mogp::FitOutcome outcome = mogp::run_fit(config);
      mogp::write_fit_outputs(config, outcome);
      const auto& r = outcome.report;
      std::printf("%s Q=%d: %zu parameters, NLML %.6f -> %.6f after %d iterations (%s), %.2f s\n", r.family.c_str(),
                  r.components, r.parameter_count, r.initial_nlml, r.final_nlml, r.iterations,
                  std::string(mogp::to_string(r.reason)).c_str(), r.wall_clock_seconds);
      std::printf("model: %s\nreport: %s\n", config.output.model.string().c_str(),
                  config.output.report.string().c_str());
    });
  }

  if (predict->parsed()) {
    return guarded("predict", [&] {
      if (!grid && !span && !removed) throw mogp::InvalidInput("choose one of --grid, --span or --removed");
      const mogp::ModelArchive archive = mogp::load_archive(model_path);
      std::optional<fs::path> override_path;
      if (data_path) override_path = fs::path(*data_path);
      const mogp::RestoredModel m = mogp::restore_model(archive, override_path);
      const bool noise = include_noise || (!no_noise && archive.include_noise);
      mogp::PredictionTable table;
      if (grid) {
        const GridSpec g = parse_grid(*grid);
        table = mogp::predict_grid(m.data, m.model, g.min, g.max, g.count, noise);
      } else if (span) {
        table = mogp::predict_span(m.data, m.model, *span, noise);
      } else {
        table = mogp::predict_removed(m.data, m.model, noise);
        if (table.rows.empty()) throw mogp::InvalidInput("the model has no held-out points");
      }
      emit(out_path, mogp::predictions_csv(table));
      if (plot_path) mogp::write_text(*plot_path, mogp::render_prediction_svg(m.data, table));
    });
  }

  if (periodogram->parsed()) {
    return guarded("periodogram", [&] {
      const mogp::PipelineConfig config = mogp::load_config(config_path);
      mogp::DataSet data = mogp::load_data(config.data);
      mogp::apply_preprocess(data, config.preprocess);
      const auto spectra = mogp::compute_periodograms(data, peaks_q.value_or(config.components));
      const fs::path dir = out_dir ? fs::path(*out_dir) : fs::absolute(config_path).parent_path();
      for (std::size_t m = 0; m < spectra.size(); ++m) {
        const std::string stem = "periodogram_" + std::to_string(m);
        mogp::write_text(dir / (stem + ".csv"), mogp::periodogram_csv(spectra[m].periodogram));
        mogp::write_text(dir / (stem + ".peaks.json"), mogp::peaks_json(spectra[m]));
        std::printf("%s: %s\n", spectra[m].name.c_str(), (dir / (stem + ".csv")).string().c_str());
      }
      if (svg_path) mogp::write_text(*svg_path, mogp::render_periodogram_svg(spectra));
    });
  }

  if (simulate->parsed()) {
    return guarded("simulate", [&] {
      sim.family = mogp::parse_family(sim_family);
      if (params_path) sim.kernel = mogp::kernel_from_json(mogp::read_text(*params_path));
      emit(out_path, mogp::simulate_csv(sim));
    });
  }

  if (metrics->parsed()) {
    return guarded("metrics", [&] {
      const mogp::RestoredModel m = restore(model_path, data_path);
      emit(out_path, mogp::metrics_json(mogp::heldout_metrics(m.data, m.model)));
    });
  }

  if (cross->parsed()) {
    return guarded("cross-spectrum", [&] {
      const mogp::ModelArchive archive = mogp::load_archive(model_path);
      std::vector<std::string> names;
      for (const auto& c : archive.channels) names.push_back(c.name);
      emit(out_path, mogp::cross_spectrum_json(archive.kernel, names));
    });
  }
  return 0;
}
