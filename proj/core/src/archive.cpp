#include "mogp/archive.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "mogp/error.hpp"
#include "mogp/pipeline.hpp"

#ifndef MOGP_VERSION_STRING
#define MOGP_VERSION_STRING "0.0.0"
#endif

namespace mogp {

using detail::field;
using detail::json;
using detail::matrix_from;
using detail::to_json;
using detail::vector_from;

std::string_view toolkit_version() { return MOGP_VERSION_STRING; }

namespace {

json kernel_json(const KernelSpec& kernel) {
  json params = json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SMParams>) {
          params["weight"] = to_json(p.weight);
          params["mean"] = to_json(p.mean);
          params["variance"] = to_json(p.variance);
        } else if constexpr (std::is_same_v<T, MOSMParams>) {
          params["weight"] = to_json(p.weight);
          params["mean"] = to_json(p.mean);
          params["variance"] = to_json(p.variance);
          params["delay"] = to_json(p.delay);
          params["phase"] = to_json(p.phase);
        } else if constexpr (std::is_same_v<T, CSMParams>) {
          params["mean"] = to_json(p.mean);
          params["variance"] = to_json(p.variance);
          params["amplitude"] = to_json(p.amplitude);
          params["phase"] = to_json(p.phase);
        } else if constexpr (std::is_same_v<T, SMLMCParams>) {
          params["mean"] = to_json(p.mean);
          params["variance"] = to_json(p.variance);
          params["mixing"] = to_json(p.mixing);
        } else if constexpr (std::is_same_v<T, ConvParams>) {
          params["weight"] = to_json(p.weight);
          params["variance"] = to_json(p.variance);
        } else {
          params["variance"] = to_json(p.variance);
        }
      },
      kernel.params());
  json j = json::object();
  j["family"] = std::string(to_string(kernel.family()));
  j["channels"] = kernel.channels();
  j["components"] = kernel.components();
  j["input_dim"] = kernel.input_dim();
  j["params"] = std::move(params);
  return j;
}

KernelSpec kernel_from(const json& j) {
  const KernelFamily family = parse_family(field(j, "family").get<std::string>());
  const json& p = field(j, "params");
  auto mat = [&](const char* key) { return matrix_from(field(p, key), key); };
  auto vec = [&](const char* key) { return vector_from(field(p, key), key); };
  switch (family) {
    case KernelFamily::SM: return KernelSpec(SMParams{vec("weight"), mat("mean"), mat("variance")});
    case KernelFamily::MOSM:
      return KernelSpec(MOSMParams{mat("weight"), mat("mean"), mat("variance"), mat("delay"), mat("phase")});
    case KernelFamily::CSM: return KernelSpec(CSMParams{mat("mean"), mat("variance"), mat("amplitude"), mat("phase")});
    case KernelFamily::SMLMC: return KernelSpec(SMLMCParams{mat("mean"), mat("variance"), mat("mixing")});
    case KernelFamily::CONV: return KernelSpec(ConvParams{mat("weight"), mat("variance")});
    case KernelFamily::Noise: {
      const int P = j.contains("input_dim") ? j["input_dim"].get<int>() : 1;
      KernelSpec spec = KernelSpec::make(KernelFamily::Noise, static_cast<int>(vec("variance").size()), 1, std::max(P, 1));
      std::get<NoiseParams>(spec.mutable_params()).variance = vec("variance");
      spec.validate();
      return spec;
    }
  }
  throw InvalidInput("unknown kernel family");
}

json transform_json(const Transform& t) {
  json j = json::object();
  j["name"] = std::string(transform_name(t));
  if (const auto* d = std::get_if<Detrend>(&t)) {
    j["degree"] = d->degree;
    j["coefficients"] = to_json(d->coefficients);
    j["shift"] = d->shift;
    j["scale"] = d->scale;
  } else if (const auto* w = std::get_if<Whiten>(&t)) {
    j["mean"] = w->mean;
    j["stddev"] = w->stddev;
  } else if (const auto* l = std::get_if<LogTransform>(&t)) {
    j["offset"] = l->offset;
  }
  return j;
}

Transform transform_from(const json& j) {
  const std::string name = field(j, "name").get<std::string>();
  if (name == "detrend") {
    Detrend d;
    d.degree = field(j, "degree").get<int>();
    d.coefficients = vector_from(field(j, "coefficients"), "coefficients");
    d.shift = field(j, "shift").get<double>();
    d.scale = field(j, "scale").get<double>();
    return d;
  }
  if (name == "whiten") return Whiten{field(j, "mean").get<double>(), field(j, "stddev").get<double>()};
  if (name == "log") return LogTransform{field(j, "offset").get<double>()};
  throw InvalidInput("unknown transform '" + name + "'");
}

std::string mask_string(const std::vector<bool>& mask) {
  std::string s(mask.size(), '0');
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) s[k] = '1';
  return s;
}

std::vector<bool> mask_from(const std::string& s) {
  std::vector<bool> mask(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] != '0' && s[k] != '1') throw InvalidInput("mask must contain only '0' and '1'");
    mask[k] = s[k] == '1';
  }
  return mask;
}

}  // namespace

std::string kernel_to_json(const KernelSpec& kernel, int indent) { return kernel_json(kernel).dump(indent); }

KernelSpec kernel_from_json(const std::string& text) {
  try {
    return kernel_from(detail::parse(text, "kernel"));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("kernel: ") + e.what());
  }
}

std::string archive_to_json(const ModelArchive& a) {
  json j = json::object();
  j["format"] = "mogp-model";
  j["version"] = a.version;
  j["kernel"] = kernel_json(a.kernel);
  j["noise"] = to_json(a.noise);
  json data = json::object();
  data["file"] = a.data.file.generic_string();
  data["x_col"] = a.data.csv.x_col;
  data["y_cols"] = a.data.csv.y_cols;
  data["time_format"] = a.data.csv.time_format ? json(*a.data.csv.time_format) : json(nullptr);
  data["time_unit_seconds"] = a.data.csv.time_unit_seconds;
  data["fingerprint"] = a.fingerprint;
  j["data"] = std::move(data);
  json channels = json::array();
  for (const auto& c : a.channels) {
    json cj = json::object();
    cj["name"] = c.name;
    cj["mask"] = mask_string(c.mask);
    json ts = json::array();
    for (const auto& t : c.transforms.items()) ts.push_back(transform_json(t));
    cj["transforms"] = std::move(ts);
    channels.push_back(std::move(cj));
  }
  j["channels"] = std::move(channels);
  j["include_noise"] = a.include_noise;
  j["band_multiplier"] = kBandMultiplier;
  return j.dump(2) + "\n";
}

ModelArchive archive_from_json(const std::string& text) {
  const json j = detail::parse(text, "model archive");
  try {
    if (field(j, "format").get<std::string>() != "mogp-model") throw InvalidInput("not a mogp model archive");
    ModelArchive a;
    a.version = field(j, "version").get<std::string>();
    a.kernel = kernel_from(field(j, "kernel"));
    a.noise = vector_from(field(j, "noise"), "noise");
    const json& data = field(j, "data");
    a.data.file = field(data, "file").get<std::string>();
    a.data.csv.x_col = field(data, "x_col").get<std::string>();
    a.data.csv.y_cols = field(data, "y_cols").get<std::vector<std::string>>();
    if (!field(data, "time_format").is_null()) a.data.csv.time_format = data["time_format"].get<std::string>();
    a.data.csv.time_unit_seconds = field(data, "time_unit_seconds").get<double>();
    a.fingerprint = field(data, "fingerprint").get<std::string>();
    for (const auto& cj : field(j, "channels")) {
      ChannelArchive c;
      c.name = field(cj, "name").get<std::string>();
      c.mask = mask_from(field(cj, "mask").get<std::string>());
      for (const auto& tj : field(cj, "transforms")) c.transforms.push(transform_from(tj));
      a.channels.push_back(std::move(c));
    }
    a.include_noise = j.value("include_noise", true);
    if (static_cast<int>(a.channels.size()) != a.kernel.channels() || a.noise.size() != a.kernel.channels())
      throw InvalidInput("channel count does not match the kernel");
    return a;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("model archive: ") + e.what());
  }
}

void save_archive(const std::filesystem::path& path, const ModelArchive& archive) {
  write_text(path, archive_to_json(archive));
}

ModelArchive load_archive(const std::filesystem::path& path) { return archive_from_json(read_text(path)); }

}  // namespace mogp
