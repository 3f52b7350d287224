#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "mogp/archive.hpp"
#include "mogp/error.hpp"
#include "mogp/data.hpp"
#include "mogp/gp.hpp"
#include "mogp/optimize.hpp"
#include "mogp/spectral.hpp"

namespace mogp {

// An error tagged with the pipeline stage that raised it ("load", "preprocess", ...).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Channel by position or by column name.
struct ChannelRef {
  std::optional<int> index;
  std::string name;
};

struct RemoveRangeOp {
  ChannelRef channel;
  double start = 0.0;
  double end = 0.0;
};

// Without a channel the op runs on every channel with seed + channel index.
struct RemoveRandomOp {
  std::optional<ChannelRef> channel;
  double pct = 0.0;
  std::uint64_t seed = 0;
};

struct TransformOp {
  std::optional<ChannelRef> channel;
  Transform transform;
};

using PreprocessOp = std::variant<RemoveRangeOp, RemoveRandomOp, TransformOp>;

enum class InitMethod { LombScargle, SpectralMixture };

struct PipelineConfig {
  DataSource data;
  std::vector<PreprocessOp> preprocess;
  KernelFamily family = KernelFamily::MOSM;
  int components = 3;
  InitMethod init = InitMethod::LombScargle;
  int init_iters = 100;
  OptimizerOptions train;
  std::uint64_t train_seed = 0;
  bool include_noise = true;
  struct Outputs {
    std::filesystem::path model = "model.json";
    std::filesystem::path report = "report.json";
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> plot;
    std::optional<std::filesystem::path> spectrum;
  } output;
};

// Relative paths are resolved against `base_dir`.
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

DataSet load_data(const DataSource& source);
void apply_preprocess(DataSet& data, const std::vector<PreprocessOp>& ops);

// ---- metrics ----------------------------------------------------------------

struct ErrorMetrics {
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // NaN when every target is below 1e-9 in magnitude
  std::size_t mape_count = 0;
};

ErrorMetrics error_metrics(std::span<const double> predicted, std::span<const double> actual);

struct MetricsReport {
  std::vector<std::pair<std::string, ErrorMetrics>> channels;
  ErrorMetrics overall;
};

// Predictive means at removed points versus the loaded values, in the original domain.
MetricsReport heldout_metrics(const DataSet& data, const ModelState& model);
std::string metrics_json(const MetricsReport& report);

// ---- predictions ------------------------------------------------------------

struct PredictionRow {
  int channel = 0;
  double x = 0.0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct PredictionTable {
  std::vector<std::string> channel_names;
  std::vector<PredictionRow> rows;
};

PredictionTable predict_points(const DataSet& data, const ModelState& model, const std::vector<int>& channels,
                               const Eigen::MatrixXd& x, bool include_noise);
// `count` evenly spaced points in [min, max] for every channel.
PredictionTable predict_grid(const DataSet& data, const ModelState& model, double min, double max, int count,
                             bool include_noise);
// `count` points spanning each channel's own x range.
PredictionTable predict_span(const DataSet& data, const ModelState& model, int count, bool include_noise);
PredictionTable predict_removed(const DataSet& data, const ModelState& model, bool include_noise);
std::string predictions_csv(const PredictionTable& table);

// ---- fit --------------------------------------------------------------------

struct ChannelCounts {
  std::string name;
  std::size_t points = 0;
  std::size_t train = 0;
  std::size_t removed = 0;
};

struct FitReport {
  std::string family;
  int components = 0;
  std::size_t parameter_count = 0;
  std::size_t kernel_parameter_count = 0;
  std::size_t train_points = 0;
  std::string init_method;
  // How per-channel spectral estimates were merged into the kernel.
  std::string init_combination;
  double initial_nlml = 0.0;
  double final_nlml = 0.0;
  int iterations = 0;
  Convergence reason = Convergence::MaxIters;
  std::vector<ChannelCounts> channels;
  std::optional<MetricsReport> initial_heldout;
  std::optional<MetricsReport> final_heldout;
  double wall_clock_seconds = 0.0;
};

// Deterministic report (no timing).
std::string report_json(const FitReport& report);

struct FitOutcome {
  DataSet data;
  ModelState model;
  ModelArchive archive;
  FitReport report;
};

// load -> preprocess -> init -> train; errors are StageError.
FitOutcome run_fit(const PipelineConfig& config);
// Model archive, report (plus a `<report stem>.timing.json` sidecar) and any optional outputs.
void write_fit_outputs(const PipelineConfig& config, const FitOutcome& outcome);
std::filesystem::path timing_path(const std::filesystem::path& report);

struct RestoredModel {
  DataSet data;
  ModelState model;
};

// Reloads the archived data file (or `data_override`), checks its fingerprint and
// rebuilds masks, transforms and the trained model.
RestoredModel restore_model(const ModelArchive& archive, const std::optional<std::filesystem::path>& data_override = {});

// ---- spectra ----------------------------------------------------------------

struct ChannelSpectrum {
  std::string name;
  Periodogram periodogram;
  std::vector<Peak> peaks;
};

std::vector<ChannelSpectrum> compute_periodograms(const DataSet& data, int Q);
std::string periodogram_csv(const Periodogram& pgram);
std::string peaks_json(const ChannelSpectrum& spectrum);

// Gaussian cross-spectral components for every ordered channel pair. Throws
// UnsupportedFamily for CONV and NOISE.
std::string cross_spectrum_json(const KernelSpec& kernel, const std::vector<std::string>& channel_names);

// ---- synthetic data -----------------------------------------------------------

struct SimulationOptions {
  KernelFamily family = KernelFamily::MOSM;
  int channels = 4;
  int points = 150;
  int components = 2;
  double noise = 0.01;
  double spacing = 1.0;
  double level = 0.0;  // constant added to channel m: level * (m + 1)
  double drift = 0.0;  // linear slope added to channel m: drift * (m + 1)
  std::uint64_t seed = 0;
  std::optional<KernelSpec> kernel;  // overrides family/channels/components
};

// Coupled parameters with daily-scale periodicities (input unit: hours).
KernelSpec default_simulation_kernel(KernelFamily family, int channels, int components);
std::string simulate_csv(const SimulationOptions& options);

// ---- plots ------------------------------------------------------------------

std::string render_prediction_svg(const DataSet& data, const PredictionTable& predictions);
std::string render_periodogram_svg(const std::vector<ChannelSpectrum>& spectra);

// ---- file helpers -------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mogp
