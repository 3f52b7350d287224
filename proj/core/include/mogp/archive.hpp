#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mogp/data.hpp"
#include "mogp/kernels.hpp"

namespace mogp {

std::string_view toolkit_version();

struct DataSource {
  std::filesystem::path file;
  CsvOptions csv;
};

struct ChannelArchive {
  std::string name;
  std::vector<bool> mask;
  TransformStack transforms;
};

// Everything needed to rebuild a fitted model except the raw data file itself.
struct ModelArchive {
  std::string version;
  KernelSpec kernel = KernelSpec::make(KernelFamily::SM, 1, 1, 1);
  Eigen::VectorXd noise;
  DataSource data;
  std::string fingerprint;
  std::vector<ChannelArchive> channels;
  bool include_noise = true;
};

// JSON text forms. Doubles are written with round-trip precision.
std::string kernel_to_json(const KernelSpec& kernel, int indent = 2);
KernelSpec kernel_from_json(const std::string& text);
std::string archive_to_json(const ModelArchive& archive);
ModelArchive archive_from_json(const std::string& text);

void save_archive(const std::filesystem::path& path, const ModelArchive& archive);
ModelArchive load_archive(const std::filesystem::path& path);

}  // namespace mogp
