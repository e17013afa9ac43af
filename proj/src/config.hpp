#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "experiment.hpp"
#include "frames.hpp"
#include "loss.hpp"
#include "train.hpp"

namespace fiberpinn {

inline constexpr const char* kArtifactVersion = "fiberpinn 0.1.0";

struct MeshSource {
  std::filesystem::path path;  // empty: use the generator
  std::optional<MeshFormat> format;
  std::string generator = "sheet";  // sheet | icosphere | cylinder
  double width_mm = 100.0;
  double height_mm = 100.0;
  int nx = 50;  // cells (sheet) or segments around (cylinder)
  int ny = 50;
  int subdivisions = 3;
  double radius_mm = 50.0;
  double length_mm = 100.0;
};

struct RunConfig {
  MeshSource mesh;
  FrameSettings frames;
  bool synthetic_enabled = true;
  SyntheticSpec synthetic;
  std::filesystem::path samples_path;       // empty: synthetic samples in memory
  std::filesystem::path ground_truth_path;  // empty: synthetic truth if available
  std::filesystem::path checkpoint_path;    // empty: <out>/model.ckpt
  int phi_layers = 7;
  int phi_width = 20;
  int d_layers = 5;
  int d_width = 5;
  double d_max = 5.0;
  NormalEigenvalue normal_eigenvalue = NormalEigenvalue::Zero;
  LossWeights loss;
  TrainConfig train;
  std::filesystem::path out = "out";

  // Fully resolved document (defaults + file + overrides) with absolute paths.
  nlohmann::json document;
};

struct ConfigOverrides {
  std::vector<std::string> sets;  // "section.key=value"
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

nlohmann::json default_config_document();

// Reads a config file or a run manifest (its embedded config is used), then
// applies overrides. An empty path means defaults only.
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
RunConfig config_from_document(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// Hex SHA-256 of the canonical serialization of the resolved document.
std::string config_hash(const nlohmann::json& doc);
std::string sha256_hex(const std::string& data);

}  // namespace fiberpinn
