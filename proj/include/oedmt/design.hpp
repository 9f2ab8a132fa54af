#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "oedmt/types.hpp"

namespace oedmt {

struct StationCandidate {
  int id = -1;
  double east = 0.0;
  double north = 0.0;
};

struct ScenarioBinding {
  std::string label;
  std::string kind;  // "velocity-model" | "source-location" | "nominal"
};

// Candidate stations with their projected information per scenario. Green
// matrices are reduced to 6x6 summaries up front; every selection step is then
// an O(n * 6^3) sweep regardless of trace length.
struct CandidateSet {
  std::vector<StationCandidate> stations;
  std::vector<ScenarioBinding> scenarios;
  // info[scenario][station]
  std::vector<std::vector<PrecisionSummary>> info;

  std::size_t size() const { return stations.size(); }
  void validate() const;
};

struct DesignStep {
  int station_id = -1;
  double east = 0.0;
  double north = 0.0;
  double eig_increment = 0.0;
  double cum_eig = 0.0;
  // Posterior covariance after this step; for consensus runs, the arithmetic
  // mean over scenarios.
  Mat6 post_cov = Mat6::Zero();
};

struct DesignRecord {
  std::string method;
  std::vector<DesignStep> steps;
  std::string config_hash;
  std::uint64_t seed = 0;

  std::vector<int> selected_ids() const;
};

struct SelectOptions {
  // When set, receives the per-candidate (mean) single-station EIG sweep of
  // each step; selected candidates carry NaN from step 2 on.
  std::vector<std::vector<double>>* eig_fields = nullptr;
};

// Algorithm: sequentially add the station with the largest single-station EIG
// under the current belief covariance; the mean is reset to zero each step so
// the closed-form EIG stays data-free. Ties break toward the lowest id.
DesignRecord greedy_select(const CandidateSet& cands, int k, const GaussianBelief& prior,
                           const SelectOptions& opts = {});

// Consensus variant: argmax of the arithmetic mean of per-scenario EIG; every
// scenario's belief is updated with the chosen station's own H.
DesignRecord consensus_select(const CandidateSet& cands, int k, const GaussianBelief& prior,
                              const SelectOptions& opts = {});

// Uniform sample without replacement; incremental EIGs evaluated post-hoc in
// draw order.
DesignRecord random_select(const CandidateSet& cands, int k, std::uint64_t seed,
                           const GaussianBelief& prior);

// Exact argmax of the joint EIG over all k-subsets. Guarded: C(n, k) <= 1e6.
std::pair<std::vector<int>, double> exhaustive_select(const CandidateSet& cands, int k,
                                                      const GaussianBelief& prior);

void write_design_json(const std::filesystem::path& path, const DesignRecord& rec);
void write_eig_field_csv(const std::filesystem::path& path, const CandidateSet& cands,
                         const std::vector<double>& field);

}  // namespace oedmt
