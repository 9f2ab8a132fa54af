#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oedmt/forward.hpp"
#include "oedmt/types.hpp"

namespace oedmt {

struct GridConfig {
  double east_min = -4000.0, east_max = 4000.0;
  double north_min = -4000.0, north_max = 4000.0;
  std::optional<double> spacing;
  std::optional<int> count_east, count_north;
};

struct NoiseConfig {
  double rel = 0.1;
  std::optional<double> corr_time;    // default: trace duration
  std::optional<double> sigma_floor;  // default: 1e-12 * max(1, global waveform RMS)
};

struct SourceCloudConfig {
  double half_width_m = 500.0;
  int count = 25;
  int use_first = 20;
  double depth = 2000.0;
};

struct MisspecSweepConfig {
  std::string kind = "velocity";  // "velocity" | "source"
  // Ordered (model, data) scenario index pairs; empty = all ordered pairs i != j.
  std::vector<std::pair<int, int>> pairs;
};

struct GreensConfig {
  std::string provider = "analytic";  // "analytic" | "import"
  std::string manifest;               // import only
};

struct ExperimentConfig {
  std::string mode = "greedy";
  GridConfig grid;
  TimeGrid time{900, 0.005};
  std::vector<MediumSpec> media{MediumSpec{}};
  SourceSpec source;
  std::optional<SourceCloudConfig> source_cloud;
  std::vector<double> depths;
  double prior_sigma_p = 0.5;
  NoiseConfig noise;
  MomentTensor true_mt = default_true_mt();
  int k = 10;
  std::uint64_t seed = 1;
  int random_networks = 50;
  bool export_eig_field = false;
  GreensConfig greens;
  std::optional<MisspecSweepConfig> misspec;

  static MomentTensor default_true_mt();

  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  void validate() const;
  // FNV-1a of the canonical (key-sorted) normalized form; 16 hex chars.
  std::string hash() const;

  double corr_time_or_default() const {
    return noise.corr_time.value_or(time.duration());
  }
};

ExperimentConfig load_config(const std::filesystem::path& path);

// Sets a dotted path (e.g. "noise.rel") in a raw config document; the value
// string is parsed as JSON when possible, else taken as a string literal.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

}  // namespace oedmt
