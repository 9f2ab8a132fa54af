#include "oedmt/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "oedmt/inference.hpp"
#include "oedmt/io_util.hpp"
#include "oedmt/parallel.hpp"
#include "oedmt/rng.hpp"

namespace oedmt {

using nlohmann::json;

void CandidateSet::validate() const {
  if (stations.empty()) throw EmptyCandidates("candidate set is empty");
  if (scenarios.empty()) throw ScenarioForwardMissing("candidate set has no scenario bound");
  if (info.size() != scenarios.size()) {
    throw ScenarioForwardMissing("per-scenario info count != scenario count");
  }
  for (const auto& per_station : info) {
    if (per_station.size() != stations.size()) {
      throw ScenarioForwardMissing("scenario missing per-station information");
    }
  }
  std::unordered_set<int> seen;
  for (const auto& s : stations) {
    if (!seen.insert(s.id).second) throw ConfigError("duplicate station id " + std::to_string(s.id));
  }
}

std::vector<int> DesignRecord::selected_ids() const {
  std::vector<int> ids;
  ids.reserve(steps.size());
  for (const auto& s : steps) ids.push_back(s.station_id);
  return ids;
}

namespace {

// Candidate order fixed by ascending station id; the argmax keeps the first
// strictly better score, which realizes the lowest-id tie-break.
std::vector<std::size_t> order_by_id(const CandidateSet& cands) {
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cands.stations[a].id < cands.stations[b].id;
  });
  return order;
}

void check_k(const CandidateSet& cands, int k) {
  cands.validate();
  if (k < 1 || static_cast<std::size_t>(k) > cands.size()) {
    throw KTooLarge("k = " + std::to_string(k) + " out of range for n = " +
                    std::to_string(cands.size()));
  }
}

DesignRecord select_by_mean_eig(const CandidateSet& cands, int k, const GaussianBelief& prior,
                                const SelectOptions& opts, const char* method) {
  check_k(cands, k);
  const std::size_t n = cands.size();
  const std::size_t n_s = cands.scenarios.size();
  const auto order = order_by_id(cands);

  std::vector<Mat6> cov(n_s, prior.cov);
  std::vector<char> selected(n, 0);
  std::vector<double> score(n);

  DesignRecord rec;
  rec.method = method;
  double cum = 0.0;

  for (int step = 0; step < k; ++step) {
    std::vector<EigSweep> sweeps;
    sweeps.reserve(n_s);
    for (std::size_t s = 0; s < n_s; ++s) sweeps.emplace_back(cov[s]);

    parallel_for(n, [&](std::size_t i) {
      if (selected[i]) {
        score[i] = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      double acc = 0.0;
      for (std::size_t s = 0; s < n_s; ++s) acc += sweeps[s](cands.info[s][i].H);
      score[i] = acc / static_cast<double>(n_s);
    });
    if (opts.eig_fields) opts.eig_fields->push_back(score);

    std::size_t best = n;
    double best_score = -1.0;
    for (std::size_t idx : order) {
      if (selected[idx]) continue;
      if (score[idx] > best_score) {
        best_score = score[idx];
        best = idx;
      }
    }
    if (best == n) throw NumericalBreakdown("selection sweep produced no finite score");
    selected[best] = 1;

    Mat6 mean_cov = Mat6::Zero();
    for (std::size_t s = 0; s < n_s; ++s) {
      GaussianBelief belief(Vec6::Zero(), cov[s]);
      PrecisionSummary h_only;
      h_only.H = cands.info[s][best].H;
      cov[s] = posterior_update(belief, h_only).cov;
      mean_cov += cov[s];
    }
    mean_cov /= static_cast<double>(n_s);

    cum += best_score;
    DesignStep ds;
    ds.station_id = cands.stations[best].id;
    ds.east = cands.stations[best].east;
    ds.north = cands.stations[best].north;
    ds.eig_increment = best_score;
    ds.cum_eig = cum;
    ds.post_cov = mean_cov;
    rec.steps.push_back(ds);
  }
  return rec;
}

}  // namespace

DesignRecord greedy_select(const CandidateSet& cands, int k, const GaussianBelief& prior,
                           const SelectOptions& opts) {
  cands.validate();
  if (cands.scenarios.size() != 1) {
    throw ScenarioForwardMissing("greedy_select requires exactly one scenario bound");
  }
  return select_by_mean_eig(cands, k, prior, opts, "greedy");
}

DesignRecord consensus_select(const CandidateSet& cands, int k, const GaussianBelief& prior,
                              const SelectOptions& opts) {
  return select_by_mean_eig(cands, k, prior, opts, "consensus");
}

DesignRecord random_select(const CandidateSet& cands, int k, std::uint64_t seed,
                           const GaussianBelief& prior) {
  check_k(cands, k);
  if (cands.scenarios.size() != 1) {
    throw ScenarioForwardMissing("random_select requires exactly one scenario bound");
  }
  const std::size_t n = cands.size();
  const auto order = order_by_id(cands);

  // Partial Fisher-Yates over the id-ordered candidates.
  std::vector<std::size_t> pool(order);
  Rng rng(seed);
  std::vector<std::size_t> draw;
  draw.reserve(k);
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
    draw.push_back(pool[i]);
  }

  DesignRecord rec;
  rec.method = "random";
  rec.seed = seed;
  Mat6 cov = prior.cov;
  double cum = 0.0;
  for (std::size_t idx : draw) {
    const double inc = eig(cands.info[0][idx].H, cov);
    GaussianBelief belief(Vec6::Zero(), cov);
    PrecisionSummary h_only;
    h_only.H = cands.info[0][idx].H;
    cov = posterior_update(belief, h_only).cov;
    cum += inc;

    DesignStep ds;
    ds.station_id = cands.stations[idx].id;
    ds.east = cands.stations[idx].east;
    ds.north = cands.stations[idx].north;
    ds.eig_increment = inc;
    ds.cum_eig = cum;
    ds.post_cov = cov;
    rec.steps.push_back(ds);
  }
  return rec;
}

std::pair<std::vector<int>, double> exhaustive_select(const CandidateSet& cands, int k,
                                                      const GaussianBelief& prior) {
  check_k(cands, k);
  if (cands.scenarios.size() != 1) {
    throw ScenarioForwardMissing("exhaustive_select requires exactly one scenario bound");
  }
  const std::size_t n = cands.size();

  double subsets = 1.0;
  for (int i = 0; i < k; ++i) subsets = subsets * static_cast<double>(n - i) / (i + 1);
  if (subsets > 1e6) {
    throw CombinatorialBlowup("C(n, k) exceeds 1e6; refusing exhaustive sweep");
  }

  const auto order = order_by_id(cands);

  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<int> best_ids;
  double best_eig = -1.0;

  // Lexicographic enumeration over id-ordered candidates; strict improvement
  // keeps the lexicographically smallest maximizer.
  for (;;) {
    Mat6 H = Mat6::Zero();
    for (int i = 0; i < k; ++i) H += cands.info[0][order[pick[i]]].H;
    const double val = eig(H, prior.cov);
    if (val > best_eig) {
      best_eig = val;
      best_ids.clear();
      for (int i = 0; i < k; ++i) best_ids.push_back(cands.stations[order[pick[i]]].id);
    }

    int pos = k - 1;
    while (pos >= 0 && pick[pos] == static_cast<int>(n) - k + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int i = pos + 1; i < k; ++i) pick[i] = pick[i - 1] + 1;
  }
  return {best_ids, best_eig};
}

void write_design_json(const std::filesystem::path& path, const DesignRecord& rec) {
  json doc;
  doc["config_hash"] = rec.config_hash;
  doc["seed"] = rec.seed;
  doc["method"] = rec.method;
  doc["steps"] = json::array();
  int rank = 1;
  for (const auto& s : rec.steps) {
    doc["steps"].push_back({{"rank", rank++},
                            {"station_id", s.station_id},
                            {"east_m", s.east},
                            {"north_m", s.north},
                            {"eig_increment", s.eig_increment},
                            {"cum_eig", s.cum_eig}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write design record: " + path.string());
  out << doc.dump(2) << "\n";
}

void write_eig_field_csv(const std::filesystem::path& path, const CandidateSet& cands,
                         const std::vector<double>& field) {
  if (field.size() != cands.size()) throw ShapeMismatch("eig field size != candidate count");
  CsvWriter csv(path);
  csv.row("station_id", "east_m", "north_m", "eig");
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (std::isnan(field[i])) {
      csv.row(cands.stations[i].id, cands.stations[i].east, cands.stations[i].north, "");
    } else {
      csv.row(cands.stations[i].id, cands.stations[i].east, cands.stations[i].north, field[i]);
    }
  }
}

}  // namespace oedmt
