#include "mogp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "mogp/error.hpp"

namespace mogp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinWeight = 1e-6;
constexpr double kMinVariance = 1e-12;

struct TrainSeries {
  std::vector<double> t;
  std::vector<double> y;
};

TrainSeries train_series(const Channel& channel) {
  TrainSeries s;
  for (std::size_t k : channel.train_indices()) {
    s.t.push_back(channel.x()(static_cast<Eigen::Index>(k), 0));
    s.y.push_back(channel.y()(static_cast<Eigen::Index>(k)));
  }
  return s;
}

double grid_step(std::span<const double> grid) {
  return grid.size() > 1 ? (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1) : 1.0;
}

std::size_t nearest_index(std::span<const double> grid, double f) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), f);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto k = static_cast<std::size_t>(it - grid.begin());
  return (f - grid[k - 1] <= grid[k] - f) ? k - 1 : k;
}

Peak measure_peak(const Periodogram& pg, std::size_t k) {
  const double half = 0.5 * pg.power[k];
  const auto& f = pg.freqs;
  const auto& p = pg.power;
  double left = f.front();
  for (std::size_t j = k; j-- > 0;) {
    if (p[j] <= half) {
      left = f[j] + (half - p[j]) / (p[j + 1] - p[j]) * (f[j + 1] - f[j]);
      break;
    }
  }
  double right = f.back();
  for (std::size_t j = k + 1; j < p.size(); ++j) {
    if (p[j] <= half) {
      right = f[j - 1] + (p[j - 1] - half) / (p[j - 1] - p[j]) * (f[j] - f[j - 1]);
      break;
    }
  }
  Peak peak;
  peak.frequency = f[k];
  peak.fwhm = right - left;
  if (!(peak.fwhm > 0.0)) peak.fwhm = grid_step(f);
  peak.sigma = peak.fwhm / kFwhmPerSigma;
  peak.power = p[k];
  return peak;
}

void require_1d(const DataSet& data) {
  if (data[0].input_dim() != 1)
    throw InvalidInput("spectral initialization supports one input dimension, got P=" +
                       std::to_string(data[0].input_dim()));
}

}  // namespace

double train_variance(const Channel& channel) {
  const TrainSeries s = train_series(channel);
  if (s.y.empty()) throw InvalidInput("channel '" + channel.name() + "' has no training points");
  const Eigen::Map<const Eigen::VectorXd> y(s.y.data(), static_cast<Eigen::Index>(s.y.size()));
  return (y.array() - y.mean()).square().mean();
}

// ---- periodogram ------------------------------------------------------------

std::vector<double> default_freq_grid(std::span<const double> t) {
  if (t.size() < 4) throw InvalidInput("frequency grid needs at least 4 points, got " + std::to_string(t.size()));
  std::vector<double> sorted(t.begin(), t.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> gaps;
  for (std::size_t k = 1; k < sorted.size(); ++k) gaps.push_back(sorted[k] - sorted[k - 1]);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t g = gaps.size();
  const double median = g % 2 == 1 ? gaps[g / 2] : 0.5 * (gaps[g / 2 - 1] + gaps[g / 2]);
  const double span = sorted.back() - sorted.front();
  if (!(span > 0.0) || !(median > 0.0)) throw InvalidInput("frequency grid: inputs have zero spacing");
  const double f_min = 1.0 / span;
  const double f_max = 0.5 / median;
  if (!(f_max > f_min)) throw InvalidInput("frequency grid: too few points for the observed span");
  const auto n = static_cast<std::size_t>(std::ceil(kGridOversampling * static_cast<double>(t.size())));
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k)
    grid[k] = f_min + (f_max - f_min) * static_cast<double>(k) / static_cast<double>(n - 1);
  return grid;
}

std::vector<double> default_freq_grid(const Channel& channel) {
  const TrainSeries s = train_series(channel);
  return default_freq_grid(s.t);
}

Periodogram lomb_scargle(std::span<const double> t, std::span<const double> y, std::span<const double> grid) {
  if (t.size() != y.size()) throw InvalidInput("lomb_scargle: t and y differ in length");
  if (t.size() < 4) throw InvalidInput("lomb_scargle needs at least 4 points");
  const double n = static_cast<double>(t.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  std::vector<double> yc(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) yc[k] = y[k] - mean;

  Periodogram pg;
  pg.freqs.assign(grid.begin(), grid.end());
  pg.power.assign(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double w = kTwoPi * grid[g];
    double s2 = 0.0;
    double c2 = 0.0;
    for (double tk : t) {
      s2 += std::sin(2.0 * w * tk);
      c2 += std::cos(2.0 * w * tk);
    }
    const double tau = std::atan2(s2, c2) / (2.0 * w);
    double yc_cos = 0.0, yc_sin = 0.0, cc = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double arg = w * (t[k] - tau);
      const double c = std::cos(arg);
      const double s = std::sin(arg);
      yc_cos += yc[k] * c;
      yc_sin += yc[k] * s;
      cc += c * c;
      ss += s * s;
    }
    if (cc <= 1e-12 * n || ss <= 1e-12 * n) continue;
    pg.power[g] = 0.5 * (yc_cos * yc_cos / cc + yc_sin * yc_sin / ss);
  }

  for (std::size_t k = 1; k + 1 < pg.power.size(); ++k)
    if (pg.power[k] > pg.power[k - 1] && pg.power[k] > pg.power[k + 1]) pg.peaks.push_back(measure_peak(pg, k));
  std::stable_sort(pg.peaks.begin(), pg.peaks.end(), [](const Peak& a, const Peak& b) { return a.power > b.power; });
  return pg;
}

Periodogram lomb_scargle(const Channel& channel, std::span<const double> grid) {
  const TrainSeries s = train_series(channel);
  return lomb_scargle(s.t, s.y, grid);
}

std::vector<Peak> pick_peaks(const Periodogram& pgram, int Q) {
  if (Q < 1) throw InvalidInput("pick_peaks: Q must be >= 1");
  if (pgram.freqs.empty()) throw InvalidInput("pick_peaks: empty periodogram");
  const auto& grid = pgram.freqs;
  const auto count = static_cast<std::size_t>(Q);

  std::vector<Peak> peaks = pgram.peaks;
  if (peaks.empty()) {
    // flat spectrum: evenly spaced frequencies with uniform power
    const double lo = grid.front();
    const double hi = grid.back();
    std::set<std::size_t> used;
    for (std::size_t q = 0; q < count; ++q) {
      std::size_t k = nearest_index(grid, lo + (hi - lo) * static_cast<double>(q + 1) / static_cast<double>(count + 1));
      while (used.count(k) && k + 1 < grid.size()) ++k;
      used.insert(k);
      Peak p;
      p.frequency = grid[k];
      p.fwhm = (hi - lo) / static_cast<double>(count);
      p.sigma = p.fwhm / kFwhmPerSigma;
      p.power = 1.0;
      peaks.push_back(p);
    }
    return peaks;
  }
  if (peaks.size() > count) peaks.resize(count);
  if (peaks.size() < count) {
    std::set<std::size_t> used;
    for (const auto& p : peaks) used.insert(nearest_index(grid, p.frequency));
    const std::size_t missing = count - peaks.size();
    Peak& top = peaks.front();
    top.power /= static_cast<double>(missing + 1);
    const std::size_t base = nearest_index(grid, top.frequency);
    std::vector<Peak> extra;
    std::size_t k = base;
    int direction = 1;
    for (std::size_t d = 0; d < missing; ++d) {
      do {
        if (direction > 0 && k + 1 >= grid.size()) {
          direction = -1;
          k = base;
        }
        if (direction < 0 && k == 0) throw InvalidInput("pick_peaks: grid too small to pad peaks");
        k = direction > 0 ? k + 1 : k - 1;
      } while (used.count(k));
      used.insert(k);
      Peak p = top;
      p.frequency = grid[k];
      extra.push_back(p);
    }
    peaks.insert(peaks.end(), extra.begin(), extra.end());
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.power > b.power; });
  }
  return peaks;
}

// ---- initialization ---------------------------------------------------------

std::vector<SpectralComponent> pad_components(std::vector<SpectralComponent> components, int Q, double step) {
  if (Q < 1) throw InvalidInput("pad_components: Q must be >= 1");
  if (components.empty()) throw InvalidInput("pad_components: no components to split");
  const auto count = static_cast<std::size_t>(Q);
  if (components.size() >= count) {
    components.resize(count);
    return components;
  }
  const std::size_t missing = count - components.size();
  auto strongest = std::max_element(components.begin(), components.end(),
                                    [](const auto& a, const auto& b) { return a.power < b.power; });
  strongest->weight /= static_cast<double>(missing + 1);
  strongest->power /= static_cast<double>(missing + 1);
  const SpectralComponent base = *strongest;
  for (std::size_t d = 1; d <= missing; ++d) {
    SpectralComponent c = base;
    c.mean += static_cast<double>(d) * step;
    components.push_back(c);
  }
  return components;
}

Initialization kernel_from_components(KernelFamily family, const std::vector<std::vector<SpectralComponent>>& per_channel,
                                      const Eigen::VectorXd& noise) {
  const auto M = static_cast<int>(per_channel.size());
  if (M < 1) throw InvalidInput("initialization needs at least one channel");
  const auto Q = static_cast<int>(per_channel[0].size());
  for (const auto& c : per_channel)
    if (static_cast<int>(c.size()) != Q || Q < 1) throw InvalidInput("initialization: ragged component lists");
  if (noise.size() != M) throw InvalidInput("initialization: noise length mismatch");

  if (family == KernelFamily::Noise) throw InvalidInput("the NOISE family has no spectral initialization");
  KernelSpec spec = KernelSpec::make(family, M, Q, 1);

  auto shared = [&](int q, auto field) {
    double num = 0.0, den = 0.0, plain = 0.0;
    for (int m = 0; m < M; ++m) {
      const auto& c = per_channel[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
      num += c.power * field(c);
      den += c.power;
      plain += field(c);
    }
    return den > 0.0 ? num / den : plain / M;
  };
  auto at = [&](int m, int q) -> const SpectralComponent& {
    return per_channel[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
  };
  auto amplitude = [](const SpectralComponent& c) { return std::max(std::sqrt(std::max(c.weight, 0.0)), kMinWeight); };

  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        for (int q = 0; q < Q; ++q) {
          if constexpr (std::is_same_v<T, SMParams>) {
            p.weight(q) = std::max(at(0, q).weight, kMinWeight);
            p.mean(q, 0) = at(0, q).mean;
            p.variance(q, 0) = std::max(at(0, q).variance, kMinVariance);
          } else if constexpr (std::is_same_v<T, MOSMParams>) {
            for (int m = 0; m < M; ++m) {
              const auto& c = at(m, q);
              const double var = std::max(c.variance, kMinVariance);
              const double norm = std::sqrt(kTwoPi) * std::sqrt(var);
              p.weight(q, m) = std::max(std::sqrt(std::max(c.weight, 0.0) / norm), kMinWeight);
              p.mean(q * M + m, 0) = c.mean;
              p.variance(q * M + m, 0) = var;
            }
          } else if constexpr (std::is_same_v<T, CSMParams> || std::is_same_v<T, SMLMCParams>) {
            p.mean(q, 0) = shared(q, [](const SpectralComponent& c) { return c.mean; });
            p.variance(q, 0) =
                std::max(shared(q, [](const SpectralComponent& c) { return c.variance; }), kMinVariance);
            for (int m = 0; m < M; ++m) {
              if constexpr (std::is_same_v<T, CSMParams>)
                p.amplitude(q, m) = amplitude(at(m, q));
              else
                p.mixing(q, m) = amplitude(at(m, q));
            }
          } else if constexpr (std::is_same_v<T, ConvParams>) {
            for (int m = 0; m < M; ++m) {
              p.weight(q, m) = amplitude(at(m, q));
              p.variance(q * M + m, 0) = 1.0 / std::max(at(m, q).variance, kMinVariance);
            }
          }
        }
      },
      spec.mutable_params());
  spec.validate();
  return {std::move(spec), noise};
}

Initialization init_from_ls(const DataSet& data, KernelFamily family, int Q) {
  require_1d(data);
  if (family == KernelFamily::SM && data.size() != 1)
    throw InvalidInput("SM kernel is single-channel; dataset has " + std::to_string(data.size()) + " channels");
  std::vector<std::vector<SpectralComponent>> per_channel;
  Eigen::VectorXd noise(data.size());
  for (int m = 0; m < data.size(); ++m) {
    const Channel& ch = data[m];
    const std::vector<double> grid = default_freq_grid(ch);
    const std::vector<Peak> peaks = pick_peaks(lomb_scargle(ch, grid), Q);
    const double var = train_variance(ch);
    double total = 0.0;
    for (const auto& p : peaks) total += p.power;
    std::vector<SpectralComponent> comps;
    for (const auto& p : peaks) {
      SpectralComponent c;
      c.mean = kTwoPi * p.frequency;
      c.variance = std::pow(kTwoPi * p.sigma, 2);
      c.power = p.power;
      c.weight = total > 0.0 ? var * p.power / total : var / Q;
      comps.push_back(c);
    }
    per_channel.push_back(std::move(comps));
    noise(m) = std::max(var / 10.0, kMinWeight);
  }
  return kernel_from_components(family, per_channel, noise);
}

std::vector<SMFit> train_sm_per_channel(const DataSet& data, int Q, int iters) {
  require_1d(data);
  std::vector<SMFit> fits;
  for (int m = 0; m < data.size(); ++m) {
    const Channel& ch = data[m];
    try {
      if (ch.train_count() < 4) throw InvalidInput("needs at least 4 training points");
      const DataSet single({ch});
      Initialization init = init_from_ls(single, KernelFamily::SM, Q);
      AugmentedData train_data = to_augmented(single, Selection::Train);
      ModelState model(std::move(init.kernel), std::move(init.noise), std::move(train_data.input),
                       std::move(train_data.y));
      OptimizerOptions opts;
      opts.max_iters = iters;
      SMFit fit;
      fit.initial_nlml = nlml(model);
      const TrainResult result = train(model, opts);
      fit.final_nlml = result.final_value;
      fit.params = model.kernel().get<SMParams>();
      fit.noise = model.noise()(0);
      fits.push_back(std::move(fit));
    } catch (const Error& e) {
      throw OptimizationError("SM training for channel '" + ch.name() + "' failed: " + e.what());
    }
  }
  return fits;
}

Initialization init_from_sm(const DataSet& data, KernelFamily family, int Q, int iters) {
  const std::vector<SMFit> fits = train_sm_per_channel(data, Q, iters);
  std::vector<std::vector<SpectralComponent>> per_channel;
  Eigen::VectorXd noise(data.size());
  for (int m = 0; m < data.size(); ++m) {
    const SMParams& p = fits[static_cast<std::size_t>(m)].params;
    std::vector<SpectralComponent> comps;
    for (Eigen::Index q = 0; q < p.weight.size(); ++q)
      comps.push_back({p.mean(q, 0), p.variance(q, 0), p.weight(q), p.weight(q)});
    std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    const std::vector<double> grid = default_freq_grid(data[m]);
    per_channel.push_back(pad_components(std::move(comps), Q, kTwoPi * (grid[1] - grid[0])));
    noise(m) = fits[static_cast<std::size_t>(m)].noise;
  }
  return kernel_from_components(family, per_channel, noise);
}

}  // namespace mogp
