#include "oedmt/evaluation.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "oedmt/inference.hpp"
#include "oedmt/io_util.hpp"
#include "oedmt/rng.hpp"

namespace oedmt {

using nlohmann::json;

double bayes_risk_nominal(const GaussianBelief& pos) { return pos.cov.trace(); }

double bayes_risk_misspec(const Mat6& pos_cov, const GaussianBelief& prior,
                          const MisspecPair& pair) {
  // pos_cov must satisfy its defining identity (H + S_pr^-1) pos_cov = I.
  const Mat6 prior_prec = spd_inverse(prior.cov);
  const Mat6 identity_check = (symmetrized(pair.H) + prior_prec) * pos_cov;
  if ((identity_check - Mat6::Identity()).cwiseAbs().maxCoeff() > 1e-8) {
    throw InconsistentInputs("bayes_risk_misspec: pos_cov does not match (H + prior^-1)^-1");
  }

  const Mat6 d = pair.H_tilde - pair.H;
  const Mat6 prior_second_moment = prior.cov + prior.mean * prior.mean.transpose();
  const double base = pos_cov.trace();
  const double spread = (pos_cov * d * prior_second_moment * d.transpose() * pos_cov).trace();
  const double cross = (pos_cov * (d + d.transpose()) * pos_cov).trace();
  const double risk = base + spread - cross;
  if (!std::isfinite(risk)) throw NumericalBreakdown("bayes_risk_misspec: non-finite result");
  return risk;
}

double crps_gaussian(double marginal_mean, double marginal_sd, double truth) {
  if (!(marginal_sd >= 0.0)) throw ConfigError("crps requires sd >= 0");
  if (marginal_sd == 0.0) return std::abs(truth - marginal_mean);
  const double z = (truth - marginal_mean) / marginal_sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return marginal_sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

ScoreReport score_network(const DesignRecord& design, const std::vector<GreenMatrix>& greens,
                          const std::vector<NoiseModel>& noises, const GaussianBelief& prior,
                          const MomentTensor& truth, std::uint64_t seed,
                          const std::vector<GreenMatrix>* data_greens) {
  const std::size_t k = design.steps.size();
  if (greens.size() != k || noises.size() != k ||
      (data_greens && data_greens->size() != k)) {
    throw ShapeMismatch("score_network: bindings do not match design length");
  }

  ScoreReport report;

  auto stats_row = [&](int prefix, const GaussianBelief& belief) {
    ScoreRow row;
    row.k = prefix;
    row.trace_risk = bayes_risk_nominal(belief);
    row.logdet_pos = logdet_spd(belief.cov);
    for (int i = 0; i < 6; ++i) {
      row.crps[i] = crps_gaussian(belief.mean[i], std::sqrt(belief.cov(i, i)), truth.m[i]);
    }
    return row;
  };

  const Mat6 prior_prec = data_greens ? spd_inverse(prior.cov) : Mat6::Zero();
  MisspecPair accum;

  {
    auto row = stats_row(0, prior);
    if (data_greens) row.misspec_risk = prior.cov.trace();
    report.rows.push_back(row);
  }

  GaussianBelief belief = prior;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& data_side = data_greens ? (*data_greens)[i] : greens[i];
    const auto y = synthesize_observation(data_side, truth, noises[i],
                                          seed::derive(seed, "observation", i));
    const auto info = precision_summary(greens[i], noises[i], &y);
    belief = posterior_update(belief, info);
    auto row = stats_row(static_cast<int>(i + 1), belief);
    if (data_greens) {
      accum.H += info.H;
      for (int q = 0; q < 6; ++q) {
        const Eigen::VectorXd w = noises[i].apply_precision(data_side.samples.col(q));
        accum.H_tilde.col(q) += greens[i].samples.transpose() * w;
      }
      const Mat6 pos_cov = spd_inverse(symmetrized(accum.H) + prior_prec);
      row.misspec_risk = bayes_risk_misspec(pos_cov, prior, accum);
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_score_csv(const std::filesystem::path& path, const ScoreReport& report) {
  CsvWriter csv(path);
  const bool misspec = !report.rows.empty() && report.rows.front().misspec_risk.has_value();
  if (misspec) {
    csv.row("k", "trace_risk", "logdet_pos", "crps_m1", "crps_m2", "crps_m3", "crps_m4",
            "crps_m5", "crps_m6", "misspec_risk");
  } else {
    csv.row("k", "trace_risk", "logdet_pos", "crps_m1", "crps_m2", "crps_m3", "crps_m4",
            "crps_m5", "crps_m6");
  }
  for (const auto& r : report.rows) {
    if (misspec) {
      csv.row(r.k, r.trace_risk, r.logdet_pos, r.crps[0], r.crps[1], r.crps[2], r.crps[3],
              r.crps[4], r.crps[5], r.misspec_risk.value());
    } else {
      csv.row(r.k, r.trace_risk, r.logdet_pos, r.crps[0], r.crps[1], r.crps[2], r.crps[3],
              r.crps[4], r.crps[5]);
    }
  }
}

void write_score_json(const std::filesystem::path& path, const ScoreReport& report) {
  json doc;
  doc["rows"] = json::array();
  for (const auto& r : report.rows) {
    json row = {{"k", r.k},
                {"trace_risk", r.trace_risk},
                {"logdet_pos", r.logdet_pos},
                {"crps", r.crps}};
    if (r.misspec_risk) row["misspec_risk"] = *r.misspec_risk;
    doc["rows"].push_back(row);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write score report: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace oedmt
