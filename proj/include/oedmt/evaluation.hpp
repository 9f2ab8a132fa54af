#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "oedmt/design.hpp"
#include "oedmt/forward.hpp"
#include "oedmt/types.hpp"

namespace oedmt {

// Model-side and data-side information for a misspecified problem:
// H = G^T S^-1 G, H_tilde = G^T S^-1 G_tilde (generally non-symmetric).
struct MisspecPair {
  Mat6 H = Mat6::Zero();
  Mat6 H_tilde = Mat6::Zero();
};

// Bayes risk of the posterior mean under a well-specified model:
// trace of the posterior covariance.
double bayes_risk_nominal(const GaussianBelief& pos);

// Closed-form Bayes risk when the data come from G_tilde but inference uses G:
//   Tr(S_pos) + Tr(S_pos D (S_pr + mu mu^T) D^T S_pos) - Tr(S_pos (D + D^T) S_pos)
// with D = H_tilde - H. The transpose placement is the one validated against
// the Monte Carlo estimate of E_m E_{Y|m} ||mu_pos - m||^2.
double bayes_risk_misspec(const Mat6& pos_cov, const GaussianBelief& prior,
                          const MisspecPair& pair);

// Gaussian closed form sigma*(z(2Phi(z)-1) + 2phi(z) - 1/sqrt(pi)); degenerates
// to |truth - mean| as sd -> 0.
double crps_gaussian(double marginal_mean, double marginal_sd, double truth);

struct ScoreRow {
  int k = 0;
  double trace_risk = 0.0;
  double logdet_pos = 0.0;
  std::array<double, 6> crps{};
  std::optional<double> misspec_risk;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
};

// Posterior-quality series along a design: for each prefix length k, the trace
// risk, logdet of the posterior covariance, and per-component CRPS of the
// marginals given data synthesized from the truth. Row k = 0 carries the prior
// statistics. greens/noises align with the design's step order. When
// data_greens is given, observations come from those matrices instead
// (inference still uses greens) and each row carries the closed-form
// misspecified risk of the prefix.
ScoreReport score_network(const DesignRecord& design, const std::vector<GreenMatrix>& greens,
                          const std::vector<NoiseModel>& noises, const GaussianBelief& prior,
                          const MomentTensor& truth, std::uint64_t seed,
                          const std::vector<GreenMatrix>* data_greens = nullptr);

void write_score_csv(const std::filesystem::path& path, const ScoreReport& report);
void write_score_json(const std::filesystem::path& path, const ScoreReport& report);

}  // namespace oedmt
