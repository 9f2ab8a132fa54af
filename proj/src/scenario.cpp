#include "oedmt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "oedmt/inference.hpp"
#include "oedmt/io_util.hpp"
#include "oedmt/parallel.hpp"
#include "oedmt/rng.hpp"

namespace oedmt {

using nlohmann::json;

std::vector<StationCandidate> build_grid(const GridConfig& spec) {
  auto axis_count = [](double lo, double hi, std::optional<double> spacing,
                       std::optional<int> count, const char* name) {
    if (!(hi >= lo)) throw InvalidExtent(std::string(name) + ": max < min");
    if (count) {
      if (*count < 1) throw InvalidExtent(std::string(name) + ": count < 1");
      if (*count == 1 && hi != lo) {
        throw InvalidExtent(std::string(name) + ": count 1 needs zero extent");
      }
      return *count;
    }
    if (!spacing || !(*spacing > 0.0)) {
      throw InvalidExtent(std::string(name) + ": need spacing > 0 or a count");
    }
    const double cells = (hi - lo) / *spacing;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells)) {
      throw InvalidExtent(std::string(name) + ": spacing does not divide the extent");
    }
    return static_cast<int>(rounded) + 1;
  };

  const int nx = axis_count(spec.east_min, spec.east_max, spec.spacing, spec.count_east, "east");
  const int ny = axis_count(spec.north_min, spec.north_max, spec.spacing, spec.count_north, "north");
  const double de = nx > 1 ? (spec.east_max - spec.east_min) / (nx - 1) : 0.0;
  const double dn = ny > 1 ? (spec.north_max - spec.north_min) / (ny - 1) : 0.0;

  std::vector<StationCandidate> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  int id = 0;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      out.push_back({id++, spec.east_min + ix * de, spec.north_min + iy * dn});
    }
  }
  return out;
}

std::vector<SourceSpec> sample_source_cloud(double east_min, double east_max, double north_min,
                                            double north_max, int count, double depth,
                                            std::uint64_t seed) {
  if (count < 1) throw ConfigError("source cloud count must be >= 1");
  Rng rng(seed);
  std::vector<SourceSpec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SourceSpec s;
    s.east = rng.uniform(east_min, east_max);
    s.north = rng.uniform(north_min, north_max);
    s.depth = depth;
    out.push_back(s);
  }
  return out;
}

std::vector<Scenario> make_scenarios(const ExperimentConfig& cfg) {
  std::vector<Scenario> out;
  const bool velocity_set = cfg.mode == "consensus-velocity" ||
                            (cfg.mode == "misspec-sweep" && cfg.misspec->kind == "velocity");
  const bool source_set = cfg.mode == "consensus-source" ||
                          (cfg.mode == "misspec-sweep" && cfg.misspec->kind == "source");

  if (velocity_set) {
    for (std::size_t i = 0; i < cfg.media.size(); ++i) {
      Scenario s;
      s.label = "V" + std::to_string(i + 1);
      s.kind = "velocity-model";
      s.medium = cfg.media[i];
      s.source = cfg.source;
      out.push_back(s);
    }
  } else if (source_set) {
    const auto& cloud = *cfg.source_cloud;
    auto sources = sample_source_cloud(-cloud.half_width_m, cloud.half_width_m,
                                       -cloud.half_width_m, cloud.half_width_m, cloud.count,
                                       cloud.depth, seed::derive(cfg.seed, "source-cloud"));
    for (std::size_t i = 0; i < sources.size(); ++i) {
      Scenario s;
      s.label = "S" + std::to_string(i + 1);
      s.kind = "source-location";
      s.medium = cfg.media[0];
      sources[i].stf = cfg.source.stf;
      s.source = sources[i];
      out.push_back(s);
    }
  } else if (cfg.mode == "depth-study") {
    for (double d : cfg.depths) {
      Scenario s;
      s.label = "depth" + format_number(d);
      s.kind = "source-location";
      s.medium = cfg.media[0];
      s.source = cfg.source;
      s.source.depth = d;
      out.push_back(s);
    }
  } else {
    Scenario s;
    s.label = "nominal";
    s.kind = "nominal";
    s.medium = cfg.media[0];
    s.source = cfg.source;
    out.push_back(s);
  }
  return out;
}

ForwardSet::ForwardSet(const ExperimentConfig& cfg, std::vector<Scenario> scenarios)
    : grid_(cfg.time), corr_time_(cfg.corr_time_or_default()), scenarios_(std::move(scenarios)) {
  if (scenarios_.empty()) throw ScenarioForwardMissing("no scenarios configured");

  if (cfg.greens.provider == "import") {
    imported_provider_ = true;
    if (scenarios_.size() != 1) {
      throw ScenarioForwardMissing("imported greens bind a single scenario only");
    }
    auto set = green_import(cfg.greens.manifest);
    if (!(set.grid == grid_)) {
      throw ShapeMismatch("manifest time grid differs from configured time grid");
    }
    for (auto& sg : set.stations) {
      candidates_.stations.push_back({sg.green.station_id, sg.east, sg.north});
      imported_.push_back(std::move(sg.green));
    }
  } else {
    candidates_.stations = build_grid(cfg.grid);
  }
  if (candidates_.stations.empty()) throw EmptyCandidates("no candidate stations");

  const std::size_t n = candidates_.stations.size();
  const std::size_t n_s = scenarios_.size();
  const double rows = 3.0 * grid_.n_t;

  candidates_.info.assign(n_s, std::vector<PrecisionSummary>(n));
  sigma_eps_.assign(n_s, std::vector<double>(n, 0.0));
  floors_.assign(n_s, 0.0);
  for (const auto& sc : scenarios_) candidates_.scenarios.push_back({sc.label, sc.kind});

  NoiseModel unit;
  unit.sigma_eps = 1.0;
  unit.corr_time = corr_time_;
  unit.grid = grid_;

  std::vector<double> unorm(n);
  for (std::size_t s = 0; s < n_s; ++s) {
    auto& info = candidates_.info[s];
    parallel_for(n, [&](std::size_t i) {
      const GreenMatrix g = imported_provider_
                                ? imported_[i]
                                : green_analytic(scenarios_[s].source, scenarios_[s].medium,
                                                 {candidates_.stations[i].east,
                                                  candidates_.stations[i].north},
                                                 grid_, candidates_.stations[i].id);
      unorm[i] = (g.samples * cfg.true_mt.m).norm();
      info[i] = precision_summary(g, unit);
    });

    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_sq += unorm[i] * unorm[i];
    const double global_rms = std::sqrt(sum_sq / (static_cast<double>(n) * rows));
    const double floor = cfg.noise.sigma_floor.value_or(1e-12 * std::max(1.0, global_rms));
    floors_[s] = floor;

    for (std::size_t i = 0; i < n; ++i) {
      const bool zero_signal = unorm[i] < floor * std::sqrt(rows);
      const double sigma =
          zero_signal ? floor : std::max(cfg.noise.rel * unorm[i] / std::sqrt(rows), floor);
      if (!(sigma > 0.0)) {
        throw NumericalBreakdown("station noise collapsed to zero; set noise.sigma_floor");
      }
      sigma_eps_[s][i] = sigma;
      info[i].H /= sigma * sigma;
    }
  }
}

std::size_t ForwardSet::station_index(int station_id) const {
  for (std::size_t i = 0; i < candidates_.stations.size(); ++i) {
    if (candidates_.stations[i].id == station_id) return i;
  }
  throw ConfigError("unknown station id " + std::to_string(station_id));
}

CandidateSet ForwardSet::single_scenario(std::size_t scenario_index) const {
  CandidateSet out;
  out.stations = candidates_.stations;
  out.scenarios = {candidates_.scenarios[scenario_index]};
  out.info = {candidates_.info[scenario_index]};
  return out;
}

GreenMatrix ForwardSet::green_for(std::size_t scenario_index, int station_id) const {
  const std::size_t i = station_index(station_id);
  if (imported_provider_) return imported_[i];
  const auto& sc = scenarios_[scenario_index];
  return green_analytic(sc.source, sc.medium,
                        {candidates_.stations[i].east, candidates_.stations[i].north}, grid_,
                        station_id);
}

NoiseModel ForwardSet::noise_for(std::size_t scenario_index, int station_id) const {
  NoiseModel m;
  m.sigma_eps = sigma_eps_[scenario_index][station_index(station_id)];
  m.corr_time = corr_time_;
  m.grid = grid_;
  return m;
}

const PrecisionSummary& ForwardSet::info_for(std::size_t scenario_index, int station_id) const {
  return candidates_.info[scenario_index][station_index(station_id)];
}

namespace {

constexpr int kDepthRadiusLastRank = 12;

struct RunContext {
  const ExperimentConfig& cfg;
  const ForwardSet& fwd;
  std::filesystem::path dir;
  std::string hash;
  GaussianBelief prior;
};

ScoreReport score_design(const RunContext& ctx, const DesignRecord& rec,
                         std::size_t scenario_index) {
  std::vector<GreenMatrix> greens;
  std::vector<NoiseModel> noises;
  for (const auto& step : rec.steps) {
    greens.push_back(ctx.fwd.green_for(scenario_index, step.station_id));
    noises.push_back(ctx.fwd.noise_for(scenario_index, step.station_id));
  }
  return score_network(rec, greens, noises, ctx.prior, ctx.cfg.true_mt,
                       seed::derive(ctx.cfg.seed, "score", scenario_index));
}

void export_design(const RunContext& ctx, DesignRecord& rec, const std::string& stem,
                   const std::vector<std::vector<double>>* fields = nullptr) {
  rec.config_hash = ctx.hash;
  write_design_json(ctx.dir / (stem + ".json"), rec);
  if (fields) {
    for (std::size_t i = 0; i < fields->size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_eig_field_step_%02zu.csv", stem.c_str(), i + 1);
      write_eig_field_csv(ctx.dir / name, ctx.fwd.candidates(), (*fields)[i]);
    }
  }
}

json design_summary(const DesignRecord& rec) {
  json j;
  j["method"] = rec.method;
  j["stations"] = rec.selected_ids();
  j["joint_eig"] = rec.steps.empty() ? 0.0 : rec.steps.back().cum_eig;
  return j;
}

void run_greedy_mode(RunContext& ctx, RunResult& result) {
  std::vector<std::vector<double>> fields;
  SelectOptions opts;
  if (ctx.cfg.export_eig_field) opts.eig_fields = &fields;

  auto design = greedy_select(ctx.fwd.candidates(), ctx.cfg.k, ctx.prior, opts);
  design.seed = ctx.cfg.seed;
  export_design(ctx, design, "design", ctx.cfg.export_eig_field ? &fields : nullptr);

  auto report = score_design(ctx, design, 0);
  write_score_csv(ctx.dir / "scores.csv", report);
  write_score_json(ctx.dir / "scores.json", report);

  // Plot-ready reference waveform at the first selected station.
  const auto g1 = ctx.fwd.green_for(0, design.steps.front().station_id);
  write_waveform_csv(ctx.dir / "waveform_rank1.csv", ctx.fwd.grid(),
                     g1.samples * ctx.cfg.true_mt.m);

  result.summary["design"] = design_summary(design);
  result.designs.push_back(std::move(design));
  result.scores.push_back(std::move(report));
}

void run_random_baseline_mode(RunContext& ctx, RunResult& result) {
  auto greedy = greedy_select(ctx.fwd.candidates(), ctx.cfg.k, ctx.prior);
  greedy.seed = ctx.cfg.seed;
  export_design(ctx, greedy, "design_greedy");

  std::vector<DesignRecord> randoms;
  for (int i = 0; i < ctx.cfg.random_networks; ++i) {
    auto rec = random_select(ctx.fwd.candidates(), ctx.cfg.k,
                             seed::derive(ctx.cfg.seed, "random-baseline", i), ctx.prior);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "design_random_%03d", i);
    export_design(ctx, rec, stem);
    randoms.push_back(std::move(rec));
  }

  CsvWriter csv(ctx.dir / "comparison.csv");
  csv.row("k", "greedy_cum_eig", "random_min", "random_mean", "random_max");
  json rows = json::array();
  for (int kk = 1; kk <= ctx.cfg.k; ++kk) {
    double lo = 0.0, hi = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < randoms.size(); ++i) {
      const double v = randoms[i].steps[kk - 1].cum_eig;
      mean += v;
      lo = i == 0 ? v : std::min(lo, v);
      hi = i == 0 ? v : std::max(hi, v);
    }
    mean /= static_cast<double>(randoms.size());
    const double gv = greedy.steps[kk - 1].cum_eig;
    csv.row(kk, gv, lo, mean, hi);
    rows.push_back({{"k", kk}, {"greedy", gv}, {"random_max", hi}, {"random_mean", mean}});
  }

  result.summary["design"] = design_summary(greedy);
  result.summary["comparison"] = rows;
  result.designs.push_back(std::move(greedy));
  for (auto& r : randoms) result.designs.push_back(std::move(r));
}

void run_depth_study_mode(RunContext& ctx, RunResult& result) {
  CsvWriter csv(ctx.dir / "radii.csv");
  csv.row("depth_m", "mean_epicentral_radius_m", "first_rank", "last_rank");
  json radii = json::array();
  for (std::size_t s = 0; s < ctx.fwd.scenarios().size(); ++s) {
    const auto& sc = ctx.fwd.scenarios()[s];
    auto cands = ctx.fwd.single_scenario(s);
    auto design = greedy_select(cands, ctx.cfg.k, ctx.prior);
    design.seed = ctx.cfg.seed;
    export_design(ctx, design, "design_" + sc.label);

    const int last = std::min<int>(kDepthRadiusLastRank, ctx.cfg.k);
    double mean_radius = 0.0;
    int count = 0;
    for (int rank = 2; rank <= last; ++rank) {
      const auto& st = design.steps[rank - 1];
      mean_radius += std::hypot(st.east - sc.source.east, st.north - sc.source.north);
      ++count;
    }
    mean_radius = count > 0 ? mean_radius / count : 0.0;
    csv.row(sc.source.depth, mean_radius, 2, last);
    radii.push_back({{"depth_m", sc.source.depth}, {"mean_epicentral_radius_m", mean_radius}});

    auto report = score_design(ctx, design, s);
    write_score_csv(ctx.dir / ("scores_" + sc.label + ".csv"), report);
    result.designs.push_back(std::move(design));
    result.scores.push_back(std::move(report));
  }
  result.summary["radii"] = radii;
}

void run_consensus_mode(RunContext& ctx, RunResult& result) {
  const auto& scenarios = ctx.fwd.scenarios();
  std::size_t design_count = scenarios.size();
  if (ctx.cfg.mode == "consensus-source") {
    design_count = static_cast<std::size_t>(ctx.cfg.source_cloud->use_first);
    CsvWriter cloud(ctx.dir / "cloud.csv");
    cloud.row("label", "east_m", "north_m", "depth_m", "used_in_design");
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      cloud.row(scenarios[s].label, scenarios[s].source.east, scenarios[s].source.north,
                scenarios[s].source.depth, s < design_count ? 1 : 0);
    }
  }

  CandidateSet design_set;
  design_set.stations = ctx.fwd.candidates().stations;
  for (std::size_t s = 0; s < design_count; ++s) {
    design_set.scenarios.push_back(ctx.fwd.candidates().scenarios[s]);
    design_set.info.push_back(ctx.fwd.candidates().info[s]);
  }

  auto consensus = consensus_select(design_set, ctx.cfg.k, ctx.prior);
  consensus.seed = ctx.cfg.seed;
  export_design(ctx, consensus, "design_consensus");

  json greedy_summaries = json::array();
  std::vector<DesignRecord> greedys;
  for (std::size_t s = 0; s < design_count; ++s) {
    auto rec = greedy_select(ctx.fwd.single_scenario(s), ctx.cfg.k, ctx.prior);
    rec.seed = ctx.cfg.seed;
    export_design(ctx, rec, "design_greedy_" + scenarios[s].label);
    greedy_summaries.push_back(design_summary(rec));
    greedys.push_back(std::move(rec));
  }

  // Consensus network evaluated under every scenario, including (for source
  // clouds) the held-out tail not used in the design.
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    auto report = score_design(ctx, consensus, s);
    write_score_csv(ctx.dir / ("scores_consensus_" + scenarios[s].label + ".csv"), report);
    result.scores.push_back(std::move(report));
  }

  result.summary["design"] = design_summary(consensus);
  result.summary["greedy_designs"] = greedy_summaries;
  result.designs.push_back(std::move(consensus));
  for (auto& r : greedys) result.designs.push_back(std::move(r));
}

void run_misspec_mode(RunContext& ctx, RunResult& result) {
  const auto& scenarios = ctx.fwd.scenarios();
  const std::size_t n_s = scenarios.size();

  std::size_t design_count = n_s;
  if (ctx.cfg.misspec->kind == "source" && ctx.cfg.source_cloud) {
    design_count = std::min<std::size_t>(n_s, ctx.cfg.source_cloud->use_first);
  }

  CandidateSet design_set;
  design_set.stations = ctx.fwd.candidates().stations;
  for (std::size_t s = 0; s < design_count; ++s) {
    design_set.scenarios.push_back(ctx.fwd.candidates().scenarios[s]);
    design_set.info.push_back(ctx.fwd.candidates().info[s]);
  }
  auto consensus = consensus_select(design_set, ctx.cfg.k, ctx.prior);
  consensus.seed = ctx.cfg.seed;
  export_design(ctx, consensus, "design_consensus");

  std::vector<DesignRecord> greedys;
  for (std::size_t s = 0; s < n_s; ++s) {
    auto rec = greedy_select(ctx.fwd.single_scenario(s), ctx.cfg.k, ctx.prior);
    rec.seed = ctx.cfg.seed;
    export_design(ctx, rec, "design_greedy_" + scenarios[s].label);
    greedys.push_back(std::move(rec));
  }

  std::vector<std::pair<int, int>> pairs = ctx.cfg.misspec->pairs;
  if (pairs.empty()) {
    for (std::size_t i = 0; i < n_s; ++i) {
      for (std::size_t j = 0; j < n_s; ++j) {
        if (i != j) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= static_cast<int>(n_s) || j >= static_cast<int>(n_s)) {
      throw ConfigError("misspec pair index out of range");
    }
  }

  // Cross information G_model^T S_model^-1 G_data per (pair, station), cached
  // by station because networks overlap heavily.
  std::map<std::tuple<int, int, int>, Mat6> cross_cache;
  std::map<std::pair<int, int>, GreenMatrix> green_cache;
  auto green_of = [&](int scenario, int station_id) -> const GreenMatrix& {
    auto key = std::make_pair(scenario, station_id);
    auto it = green_cache.find(key);
    if (it == green_cache.end()) {
      it = green_cache.emplace(key, ctx.fwd.green_for(scenario, station_id)).first;
    }
    return it->second;
  };
  auto cross_of = [&](int model, int data, int station_id) -> const Mat6& {
    auto key = std::make_tuple(model, data, station_id);
    auto it = cross_cache.find(key);
    if (it == cross_cache.end()) {
      const auto& gm = green_of(model, station_id);
      const auto& gd = green_of(data, station_id);
      const auto noise = ctx.fwd.noise_for(model, station_id);
      Mat6 h_tilde = Mat6::Zero();
      for (int q = 0; q < 6; ++q) {
        const Eigen::VectorXd w = noise.apply_precision(gd.samples.col(q));
        h_tilde.col(q) = gm.samples.transpose() * w;
      }
      it = cross_cache.emplace(key, h_tilde).first;
    }
    return it->second;
  };

  const Mat6 prior_prec = spd_inverse(ctx.prior.cov);

  auto risk_of = [&](const DesignRecord& rec, int prefix, int model, int data) {
    MisspecPair pair;
    for (int r = 0; r < prefix; ++r) {
      const int sid = rec.steps[r].station_id;
      pair.H += ctx.fwd.info_for(model, sid).H;
      pair.H_tilde += cross_of(model, data, sid);
    }
    const Mat6 pos_cov = spd_inverse(symmetrized(pair.H) + prior_prec);
    return bayes_risk_misspec(pos_cov, ctx.prior, pair);
  };

  CsvWriter csv(ctx.dir / "misspec_risk_diff.csv");
  csv.row("k", "model_scenario", "data_scenario", "network", "risk_consensus", "risk_network",
          "risk_diff");
  std::size_t row_count = 0;
  for (int kk = 1; kk <= ctx.cfg.k; ++kk) {
    for (const auto& [mi, dj] : pairs) {
      const double risk_cons = risk_of(consensus, kk, mi, dj);
      for (std::size_t g = 0; g < greedys.size(); ++g) {
        const double risk_g = risk_of(greedys[g], kk, mi, dj);
        csv.row(kk, scenarios[mi].label, scenarios[dj].label, "greedy_" + scenarios[g].label,
                risk_cons, risk_g, risk_cons - risk_g);
        ++row_count;
      }
    }
  }

  result.summary["design"] = design_summary(consensus);
  result.summary["misspec_rows"] = row_count;
  result.summary["misspec_pairs"] = pairs.size();
  result.designs.push_back(std::move(consensus));
  for (auto& r : greedys) result.designs.push_back(std::move(r));
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_root) {
  cfg.validate();

  RunResult result;
  result.config_hash = cfg.hash();
  result.run_dir = out_root / result.config_hash;
  std::filesystem::create_directories(result.run_dir);

  ForwardSet fwd(cfg, make_scenarios(cfg));
  RunContext ctx{cfg, fwd, result.run_dir, result.config_hash,
                 GaussianBelief::isotropic(cfg.prior_sigma_p)};

  result.summary["mode"] = cfg.mode;
  result.summary["config_hash"] = result.config_hash;
  result.summary["k"] = cfg.k;
  result.summary["candidates"] = fwd.candidates().size();
  result.summary["scenarios"] = fwd.scenarios().size();

  if (cfg.mode == "greedy") {
    run_greedy_mode(ctx, result);
  } else if (cfg.mode == "random-baseline") {
    run_random_baseline_mode(ctx, result);
  } else if (cfg.mode == "depth-study") {
    run_depth_study_mode(ctx, result);
  } else if (cfg.mode == "consensus-velocity" || cfg.mode == "consensus-source") {
    run_consensus_mode(ctx, result);
  } else if (cfg.mode == "misspec-sweep") {
    run_misspec_mode(ctx, result);
  } else {
    throw ConfigError("unhandled mode '" + cfg.mode + "'");
  }

  json config_doc;
  config_doc["hash"] = result.config_hash;
  config_doc["config"] = cfg.to_json();
  std::ofstream out(result.run_dir / "config.json", std::ios::trunc);
  if (!out) throw IoError("cannot write config.json");
  out << config_doc.dump(2) << "\n";

  std::ofstream summary(result.run_dir / "summary.json", std::ios::trunc);
  if (!summary) throw IoError("cannot write summary.json");
  summary << result.summary.dump(2) << "\n";
  return result;
}

std::filesystem::path export_greens(const ExperimentConfig& cfg,
                                    const std::filesystem::path& manifest_path) {
  const auto scenarios = make_scenarios(cfg);
  const auto& sc = scenarios.front();
  const auto stations = build_grid(cfg.grid);

  GreenSet set;
  set.grid = cfg.time;
  set.stations.resize(stations.size());
  parallel_for(stations.size(), [&](std::size_t i) {
    StationGreen sg;
    sg.east = stations[i].east;
    sg.north = stations[i].north;
    sg.green = green_analytic(sc.source, sc.medium, {sg.east, sg.north}, cfg.time, stations[i].id);
    set.stations[i] = std::move(sg);
  });
  green_export(manifest_path, set);
  return manifest_path;
}

}  // namespace oedmt
