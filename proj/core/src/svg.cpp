#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "mogp/error.hpp"
#include "mogp/pipeline.hpp"

namespace mogp {
namespace {

constexpr double kWidth = 760.0;
constexpr double kPanelHeight = 200.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 24.0;
constexpr double kBottom = 28.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

class Panel {
 public:
  Panel(int index, Range x, Range y) : x_(x), y_(y), top_(index * kPanelHeight) {}

  double px(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const {
    const double h = kPanelHeight - kTop - kBottom;
    return top_ + kTop + (1.0 - (v - y_.lo) / (y_.hi - y_.lo)) * h;
  }

  std::string frame(const std::string& title) const {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = top_ + kTop;
    const double y1 = top_ + kPanelHeight - kBottom;
    std::string s;
    s += "<rect class=\"frame\" x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(x1 - x0) +
         "\" height=\"" + num(y1 - y0) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    s += "<text x=\"" + num(x0) + "\" y=\"" + num(y0 - 6) + "\" font-size=\"12\">" + escape(title) + "</text>\n";
    s += "<text x=\"" + num(x0) + "\" y=\"" + num(y1 + 14) + "\" font-size=\"10\">" + label(x_.lo) + "</text>\n";
    s += "<text x=\"" + num(x1) + "\" y=\"" + num(y1 + 14) + "\" font-size=\"10\" text-anchor=\"end\">" +
         label(x_.hi) + "</text>\n";
    s += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(y0 + 10) + "\" font-size=\"10\" text-anchor=\"end\">" +
         label(y_.hi) + "</text>\n";
    s += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(y1) + "\" font-size=\"10\" text-anchor=\"end\">" +
         label(y_.lo) + "</text>\n";
    return s;
  }

 private:
  Range x_;
  Range y_;
  double top_;
};

std::string header(int panels, const std::string& metadata) {
  const double h = std::max(1, panels) * kPanelHeight;
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(h) + "\">\n<metadata>" + metadata + "</metadata>\n";
}

std::string points(const Panel& panel, const Channel& ch, const std::vector<std::size_t>& idx, const char* cls,
                   const char* shape) {
  std::string s = "<g class=\"" + std::string(cls) + "\">\n";
  for (std::size_t i : idx) {
    const double x = panel.px(ch.x()(static_cast<Eigen::Index>(i), 0));
    const double y = panel.py(ch.raw_y()(static_cast<Eigen::Index>(i)));
    if (std::string(shape) == "circle") {
      s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"2\" fill=\"#222\"/>\n";
    } else {
      s += "<path d=\"M" + num(x - 3) + " " + num(y - 3) + "L" + num(x + 3) + " " + num(y + 3) + "M" + num(x - 3) +
           " " + num(y + 3) + "L" + num(x + 3) + " " + num(y - 3) + "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n";
    }
  }
  return s + "</g>\n";
}

}  // namespace

std::string render_prediction_svg(const DataSet& data, const PredictionTable& predictions) {
  std::vector<int> panels;
  for (const auto& r : predictions.rows)
    if (std::find(panels.begin(), panels.end(), r.channel) == panels.end()) panels.push_back(r.channel);
  std::sort(panels.begin(), panels.end());
  if (panels.empty()) throw InvalidInput("plot needs predictions for at least one channel");

  std::string out = header(static_cast<int>(panels.size()),
                           "{\"band\":\"mean +/- 1.96 standard deviations\",\"band_multiplier\":" +
                               num(kBandMultiplier) + ",\"coverage\":0.95}");
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const int m = panels[k];
    if (m < 0 || m >= data.size()) throw InvalidInput("prediction channel out of range");
    const Channel& ch = data[m];
    if (ch.input_dim() != 1) throw InvalidInput("plots need one-dimensional inputs");
    std::vector<const PredictionRow*> rows;
    for (const auto& r : predictions.rows)
      if (r.channel == m) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(), [](const PredictionRow* a, const PredictionRow* b) { return a->x < b->x; });

    Range xr;
    Range yr;
    for (Eigen::Index i = 0; i < ch.x().rows(); ++i) {
      xr.add(ch.x()(i, 0));
      yr.add(ch.raw_y()(i));
    }
    for (const auto* r : rows) {
      xr.add(r->x);
      yr.add(r->lower);
      yr.add(r->upper);
    }
    xr.finish();
    yr.finish();
    const Panel panel(static_cast<int>(k), xr, yr);

    out += "<g class=\"panel\" data-channel=\"" + escape(ch.name()) + "\">\n";
    out += panel.frame(ch.name());
    std::string band = "M";
    for (std::size_t i = 0; i < rows.size(); ++i)
      band += (i ? "L" : "") + num(panel.px(rows[i]->x)) + " " + num(panel.py(rows[i]->upper));
    for (std::size_t i = rows.size(); i-- > 0;) band += "L" + num(panel.px(rows[i]->x)) + " " + num(panel.py(rows[i]->lower));
    band += "Z";
    out += "<path class=\"band\" d=\"" + band + "\" fill=\"#3b7dd8\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    std::string mean = "M";
    for (std::size_t i = 0; i < rows.size(); ++i)
      mean += (i ? "L" : "") + num(panel.px(rows[i]->x)) + " " + num(panel.py(rows[i]->mean));
    out += "<path class=\"mean\" d=\"" + mean + "\" fill=\"none\" stroke=\"#3b7dd8\" stroke-width=\"1.5\"/>\n";
    out += points(panel, ch, ch.train_indices(), "train", "circle");
    const std::vector<std::size_t> removed = ch.removed_indices();
    if (!removed.empty()) out += points(panel, ch, removed, "heldout", "cross");
    out += "</g>\n";
  }
  return out + "</svg>\n";
}

std::string render_periodogram_svg(const std::vector<ChannelSpectrum>& spectra) {
  if (spectra.empty()) throw InvalidInput("plot needs at least one spectrum");
  std::string out = header(static_cast<int>(spectra.size()), "{\"frequency_unit\":\"cycles per input unit\"}");
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    const auto& s = spectra[k];
    Range xr;
    Range yr;
    for (double f : s.periodogram.freqs) xr.add(f);
    for (double p : s.periodogram.power) yr.add(p);
    yr.add(0.0);
    xr.finish();
    yr.finish();
    const Panel panel(static_cast<int>(k), xr, yr);
    out += "<g class=\"panel\" data-channel=\"" + escape(s.name) + "\">\n";
    out += panel.frame(s.name);
    std::string line = "M";
    for (std::size_t i = 0; i < s.periodogram.freqs.size(); ++i)
      line += (i ? "L" : "") + num(panel.px(s.periodogram.freqs[i])) + " " + num(panel.py(s.periodogram.power[i]));
    out += "<path class=\"power\" d=\"" + line + "\" fill=\"none\" stroke=\"#3b7dd8\"/>\n";
    out += "<g class=\"peaks\">\n";
    for (const auto& p : s.peaks)
      out += "<circle cx=\"" + num(panel.px(p.frequency)) + "\" cy=\"" + num(panel.py(p.power)) +
             "\" r=\"3\" fill=\"#c0392b\"/>\n";
    out += "</g>\n</g>\n";
  }
  return out + "</svg>\n";
}

}  // namespace mogp
