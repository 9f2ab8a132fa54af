#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oedmt/config.hpp"
#include "oedmt/design.hpp"
#include "oedmt/evaluation.hpp"
#include "oedmt/forward.hpp"

namespace oedmt {

// Row-major surface grid: south-to-north outer, west-to-east inner, ids equal
// to the enumeration index.
std::vector<StationCandidate> build_grid(const GridConfig& spec);

// I.i.d. uniform horizontal source positions at a fixed depth.
std::vector<SourceSpec> sample_source_cloud(double east_min, double east_max, double north_min,
                                            double north_max, int count, double depth,
                                            std::uint64_t seed);

struct Scenario {
  std::string label;
  std::string kind;  // "nominal" | "velocity-model" | "source-location"
  MediumSpec medium;
  SourceSpec source;
};

// Per-scenario station information reduced to 6x6 summaries, plus everything
// needed to rebuild the full forward model of any single station later
// (selected-network scoring, misspecification cross terms).
class ForwardSet {
public:
  ForwardSet(const ExperimentConfig& cfg, std::vector<Scenario> scenarios);

  const CandidateSet& candidates() const { return candidates_; }
  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  const TimeGrid& grid() const { return grid_; }
  double corr_time() const { return corr_time_; }

  // Restricts the candidate set to a subset of scenarios (by index), sharing
  // the station list. Used to run per-scenario greedy designs.
  CandidateSet single_scenario(std::size_t scenario_index) const;

  GreenMatrix green_for(std::size_t scenario_index, int station_id) const;
  NoiseModel noise_for(std::size_t scenario_index, int station_id) const;
  const PrecisionSummary& info_for(std::size_t scenario_index, int station_id) const;

  double sigma_floor(std::size_t scenario_index) const { return floors_[scenario_index]; }

private:
  std::size_t station_index(int station_id) const;

  TimeGrid grid_;
  double corr_time_ = 0.0;
  std::vector<Scenario> scenarios_;
  CandidateSet candidates_;
  std::vector<std::vector<double>> sigma_eps_;  // [scenario][station]
  std::vector<double> floors_;
  std::vector<GreenMatrix> imported_;  // import provider only, single scenario
  bool imported_provider_ = false;
};

std::vector<Scenario> make_scenarios(const ExperimentConfig& cfg);

struct RunResult {
  std::filesystem::path run_dir;
  std::string config_hash;
  std::vector<DesignRecord> designs;      // primary first
  std::vector<ScoreReport> scores;        // aligned with score artifact order
  nlohmann::json summary;
};

// Executes the configured mode end to end: forward precompute, design,
// evaluation, exports. All artifacts land under out_root/<config-hash>/ and
// reruns are byte-identical.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_root);

// Generates the analytic Green set for the nominal scenario and writes the
// manifest plus per-station binaries.
std::filesystem::path export_greens(const ExperimentConfig& cfg,
                                    const std::filesystem::path& manifest_path);

}  // namespace oedmt
