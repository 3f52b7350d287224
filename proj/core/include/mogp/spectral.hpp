#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "mogp/data.hpp"
#include "mogp/kernels.hpp"
#include "mogp/optimize.hpp"

namespace mogp {

// Frequencies here are in cycles per input unit.
struct Peak {
  double frequency = 0.0;
  double fwhm = 0.0;   // full width at half maximum
  double sigma = 0.0;  // fwhm / 2.3548
  double power = 0.0;
};

struct Periodogram {
  std::vector<double> freqs;
  std::vector<double> power;
  std::vector<Peak> peaks;  // all strict local maxima, descending power
};

inline constexpr double kFwhmPerSigma = 2.3548;
inline constexpr int kGridOversampling = 5;

// [1 / span, 0.5 / median spacing] with ceil(5 N) points over the channel's training points.
std::vector<double> default_freq_grid(const Channel& channel);
std::vector<double> default_freq_grid(std::span<const double> t);

// Classic Lomb-Scargle power of the mean-centred series at each grid frequency.
Periodogram lomb_scargle(std::span<const double> t, std::span<const double> y, std::span<const double> grid);
// Uses the channel's training points in the transformed domain.
Periodogram lomb_scargle(const Channel& channel, std::span<const double> grid);

// Top-Q peaks by power. Missing peaks are filled by splitting the strongest one;
// a periodogram without local maxima yields Q evenly spaced frequencies.
std::vector<Peak> pick_peaks(const Periodogram& pgram, int Q);

// One spectral Gaussian for one channel. mean/variance are angular (radians per unit).
struct SpectralComponent {
  double mean = 0.0;
  double variance = 1.0;
  double weight = 0.0;  // zero-lag variance carried by the component
  double power = 0.0;   // relative strength used to combine channels
};

// Splits the strongest component until there are Q, nudging each copy by `step` in mean.
std::vector<SpectralComponent> pad_components(std::vector<SpectralComponent> components, int Q, double step);

struct Initialization {
  KernelSpec kernel;
  Eigen::VectorXd noise;
};

// Maps per-channel components (index q of every channel lines up) onto a kernel family.
// Shared-parameter families (CSM, SM-LMC) take power-weighted averages across channels.
Initialization kernel_from_components(KernelFamily family, const std::vector<std::vector<SpectralComponent>>& per_channel,
                                      const Eigen::VectorXd& noise);

Initialization init_from_ls(const DataSet& data, KernelFamily family, int Q);

struct SMFit {
  SMParams params;
  double noise = 0.0;
  double initial_nlml = 0.0;
  double final_nlml = 0.0;
};

std::vector<SMFit> train_sm_per_channel(const DataSet& data, int Q, int iters);
Initialization init_from_sm(const DataSet& data, KernelFamily family, int Q, int iters);

// Population variance of the channel's training values.
double train_variance(const Channel& channel);

}  // namespace mogp
