#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oedmt/scenario.hpp"
#include "test_support.hpp"

using namespace oedmt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// 5x5 desk-miniature with all S arrivals inside the trace.
json tiny_config(const std::string& mode) {
  json doc = {
      {"mode", mode},
      {"grid",
       {{"east_min", -1000.0}, {"east_max", 1000.0}, {"north_min", -1000.0},
        {"north_max", 1000.0}, {"spacing", 500.0}}},
      {"time", {{"n_t", 200}, {"dt", 0.005}}},
      {"medium", {{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}}},
      {"source", {{"east", 0.0}, {"north", 0.0}, {"depth", 500.0}}},
      {"k", 4},
      {"seed", 31337},
  };
  return doc;
}

fs::path temp_root(const char* tag) {
  auto dir = fs::temp_directory_path() / (std::string("oedmt_scn_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("paper-scale grid enumeration") {
  GridConfig spec;
  spec.east_min = -4000;
  spec.east_max = 4000;
  spec.north_min = -4000;
  spec.north_max = 4000;
  spec.spacing = 50.0;
  const auto grid = build_grid(spec);
  REQUIRE(grid.size() == 25921);
  CHECK(grid[0].id == 0);
  CHECK(grid[0].east == -4000.0);
  CHECK(grid[0].north == -4000.0);
  const auto& center = grid[12960];  // row 80, col 80
  CHECK(center.east == 0.0);
  CHECK(center.north == 0.0);
  CHECK(grid.back().east == 4000.0);
  CHECK(grid.back().north == 4000.0);

  // id <-> (row, col) bijection.
  for (int id : {0, 160, 161, 12960, 25920}) {
    const int row = id / 161, col = id % 161;
    CHECK(grid[id].east == doctest::Approx(-4000.0 + 50.0 * col));
    CHECK(grid[id].north == doctest::Approx(-4000.0 + 50.0 * row));
  }
  std::set<std::pair<double, double>> positions;
  for (const auto& st : grid) positions.emplace(st.east, st.north);
  CHECK(positions.size() == grid.size());
}

TEST_CASE("small grid order and invalid extents") {
  GridConfig spec;
  spec.east_min = 0;
  spec.east_max = 1;
  spec.north_min = 0;
  spec.north_max = 1;
  spec.spacing = 1.0;
  const auto grid = build_grid(spec);
  REQUIRE(grid.size() == 4);
  CHECK((grid[0].east == 0 && grid[0].north == 0));
  CHECK((grid[1].east == 1 && grid[1].north == 0));
  CHECK((grid[2].east == 0 && grid[2].north == 1));
  CHECK((grid[3].east == 1 && grid[3].north == 1));

  spec.spacing = 0.3;
  CHECK_THROWS_AS(build_grid(spec), InvalidExtent);
  spec.spacing.reset();
  CHECK_THROWS_AS(build_grid(spec), InvalidExtent);
  spec.count_east = 3;
  spec.count_north = 2;
  CHECK(build_grid(spec).size() == 6);
}

TEST_CASE("source cloud sampling") {
  const auto cloud = sample_source_cloud(-500, 500, -500, 500, 25, 2000.0, 7);
  REQUIRE(cloud.size() == 25);
  for (const auto& s : cloud) {
    CHECK(s.east >= -500.0);
    CHECK(s.east < 500.0);
    CHECK(s.north >= -500.0);
    CHECK(s.north < 500.0);
    CHECK(s.depth == 2000.0);
  }
  const auto again = sample_source_cloud(-500, 500, -500, 500, 25, 2000.0, 7);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(cloud[i].east == again[i].east);
    CHECK(cloud[i].north == again[i].north);
  }

  const auto big = sample_source_cloud(-500, 500, -500, 500, 10000, 1000.0, 11);
  double me = 0.0, mn = 0.0;
  for (const auto& s : big) {
    me += s.east;
    mn += s.north;
  }
  me /= big.size();
  mn /= big.size();
  const double se = (1000.0 / std::sqrt(12.0)) / std::sqrt(10000.0);
  CHECK(std::abs(me) < 3.0 * se);
  CHECK(std::abs(mn) < 3.0 * se);
}

TEST_CASE("config parsing, validation, and hashing") {
  auto doc = tiny_config("greedy");
  const auto cfg = ExperimentConfig::from_json(doc);
  CHECK(cfg.k == 4);
  CHECK(cfg.time.n_t == 200);

  SUBCASE("unknown keys are rejected") {
    auto bad = doc;
    bad["unknown_field"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
    auto bad2 = doc;
    bad2["noise"] = {{"relative", 0.1}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad2), ConfigError);
  }

  SUBCASE("field reordering does not change the hash") {
    json reordered = {
        {"seed", 31337},
        {"k", 4},
        {"source", {{"depth", 500.0}, {"north", 0.0}, {"east", 0.0}}},
        {"medium", {{"rho", 2000.0}, {"vs", 2300.0}, {"vp", 4000.0}}},
        {"time", {{"dt", 0.005}, {"n_t", 200}}},
        {"grid",
         {{"spacing", 500.0}, {"north_max", 1000.0}, {"north_min", -1000.0},
          {"east_max", 1000.0}, {"east_min", -1000.0}}},
        {"mode", "greedy"},
    };
    CHECK(ExperimentConfig::from_json(reordered).hash() == cfg.hash());
  }

  SUBCASE("invalid fields name the problem") {
    auto bad = doc;
    bad["prior_sigma_p"] = -0.5;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad),
                         doctest::Contains("prior_sigma_p"), ConfigError);
    auto bad2 = doc;
    bad2["k"] = 0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad2), ConfigError);
    auto bad3 = doc;
    bad3["true_mt"] = {1.0, 2.0};
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad3), ConfigError);
  }

  SUBCASE("overrides flatten dotted paths and are type-checked") {
    auto over = doc;
    apply_override(over, "noise.rel", "0.2");
    apply_override(over, "k", "7");
    const auto c2 = ExperimentConfig::from_json(over);
    CHECK(c2.noise.rel == 0.2);
    CHECK(c2.k == 7);
    apply_override(over, "k", "\"now a string\"");
    CHECK_THROWS_AS(ExperimentConfig::from_json(over), ConfigError);
  }
}

TEST_CASE("greedy experiment: artifacts and byte-identical reruns") {
  const auto cfg = ExperimentConfig::from_json(tiny_config("greedy"));

  const auto root_a = temp_root("rerun_a");
  const auto root_b = temp_root("rerun_b");
  const auto a = run_experiment(cfg, root_a);
  const auto b = run_experiment(cfg, root_b);

  CHECK(a.config_hash == cfg.hash());
  REQUIRE(a.designs.size() == 1);
  CHECK(a.designs[0].steps.size() == 4);

  for (const char* name : {"design.json", "scores.csv", "scores.json", "config.json",
                           "summary.json"}) {
    CHECK(slurp(a.run_dir / name) == slurp(b.run_dir / name));
  }

  const json design = json::parse(slurp(a.run_dir / "design.json"));
  CHECK(design["config_hash"] == cfg.hash());
  CHECK(design["steps"].size() == 4);
}

TEST_CASE("eig field export carries the documented schema") {
  auto doc = tiny_config("greedy");
  doc["export_eig_field"] = true;
  doc["k"] = 2;
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto root = temp_root("field");
  const auto result = run_experiment(cfg, root);

  for (int step = 1; step <= 2; ++step) {
    char name[64];
    std::snprintf(name, sizeof(name), "design_eig_field_step_%02d.csv", step);
    const auto csv = slurp(result.run_dir / name);
    CHECK(count_lines(csv) == 1 + 25);  // header + one row per candidate
    CHECK(csv.rfind("station_id,east_m,north_m,eig", 0) == 0);
  }
  // Step 2 blanks the already-selected station.
  const auto csv2 = slurp(result.run_dir / "design_eig_field_step_02.csv");
  const int first_id = result.designs[0].steps[0].station_id;
  std::istringstream ss(csv2);
  std::string line;
  std::getline(ss, line);
  bool found_blank = false;
  while (std::getline(ss, line)) {
    if (line.rfind(std::to_string(first_id) + ",", 0) == 0) {
      found_blank = line.back() == ',';
    }
  }
  CHECK(found_blank);

  CHECK(fs::exists(result.run_dir / "waveform_rank1.csv"));
  const auto wf = slurp(result.run_dir / "waveform_rank1.csv");
  CHECK(wf.rfind("t,u1,u2,u3", 0) == 0);
  CHECK(count_lines(wf) == 1 + cfg.time.n_t);
}

TEST_CASE("greedy beats the random-mean crps on the desk grid at k = 10") {
  // Needs the full 21x21 grid: on toy grids the posterior is so tight that
  // the per-draw bias, not the width, decides the component-wise CRPS.
  json doc = {
      {"mode", "greedy"},
      {"grid",
       {{"east_min", -2000.0}, {"east_max", 2000.0}, {"north_min", -2000.0},
        {"north_max", 2000.0}, {"spacing", 200.0}}},
      {"time", {{"n_t", 300}, {"dt", 0.005}}},
      {"medium", {{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}}},
      {"source", {{"east", 0.0}, {"north", 0.0}, {"depth", 1000.0}}},
      {"k", 10},
      {"seed", 20240501},
  };
  const auto cfg = ExperimentConfig::from_json(doc);
  ForwardSet fwd(cfg, make_scenarios(cfg));
  const auto prior = GaussianBelief::isotropic(cfg.prior_sigma_p);

  auto score_of = [&](const DesignRecord& rec, std::uint64_t obs_seed) {
    std::vector<GreenMatrix> greens;
    std::vector<NoiseModel> noises;
    for (const auto& s : rec.steps) {
      greens.push_back(fwd.green_for(0, s.station_id));
      noises.push_back(fwd.noise_for(0, s.station_id));
    }
    return score_network(rec, greens, noises, prior, cfg.true_mt, obs_seed);
  };

  // A single noise draw can flip individual components; the qualitative
  // ordering is a statement about the expected score, so average the greedy
  // side over observation seeds and the random side over networks.
  const auto greedy = greedy_select(fwd.candidates(), cfg.k, prior);
  std::array<double, 6> greedy_mean{};
  const int n_seeds = 20;
  for (int s = 0; s < n_seeds; ++s) {
    const auto rep = score_of(greedy, seed::derive(cfg.seed, "crps-greedy", s));
    for (int c = 0; c < 6; ++c) greedy_mean[c] += rep.rows.back().crps[c] / n_seeds;
  }

  std::array<double, 6> random_mean{};
  const int n_random = 50;
  for (int i = 0; i < n_random; ++i) {
    const auto rnd = random_select(fwd.candidates(), cfg.k, seed::derive(cfg.seed, "rnd", i), prior);
    const auto rep = score_of(rnd, seed::derive(cfg.seed, "crps-random", i));
    for (int c = 0; c < 6; ++c) random_mean[c] += rep.rows.back().crps[c] / n_random;
  }
  for (int c = 0; c < 6; ++c) {
    CHECK(greedy_mean[c] <= random_mean[c]);
  }
}

TEST_CASE("random-baseline experiment emits all records plus the comparison") {
  auto doc = tiny_config("random-baseline");
  doc["random_networks"] = 8;
  const auto cfg = ExperimentConfig::from_json(doc);

  const auto root = temp_root("baseline");
  const auto result = run_experiment(cfg, root);
  REQUIRE(result.designs.size() == 9);  // greedy + 8 random

  CHECK(fs::exists(result.run_dir / "design_greedy.json"));
  for (int i = 0; i < 8; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "design_random_%03d.json", i);
    CHECK(fs::exists(result.run_dir / name));
  }
  const auto cmp = slurp(result.run_dir / "comparison.csv");
  CHECK(count_lines(cmp) == 1 + cfg.k);
  CHECK(cmp.rfind("k,greedy_cum_eig,random_min,random_mean,random_max", 0) == 0);
}

TEST_CASE("depth-study emits one design per depth and the radius series") {
  auto doc = tiny_config("depth-study");
  doc["depths"] = {500.0, 800.0};
  doc["k"] = 5;
  const auto cfg = ExperimentConfig::from_json(doc);

  const auto root = temp_root("depth");
  const auto result = run_experiment(cfg, root);
  REQUIRE(result.designs.size() == 2);
  CHECK(fs::exists(result.run_dir / "design_depth500.json"));
  CHECK(fs::exists(result.run_dir / "design_depth800.json"));
  const auto radii = slurp(result.run_dir / "radii.csv");
  CHECK(count_lines(radii) == 3);
  CHECK(result.summary["radii"].size() == 2);
}

TEST_CASE("consensus-velocity: duplication invariance against plain greedy") {
  auto doc = tiny_config("consensus-velocity");
  doc.erase("medium");
  doc["media"] = {{{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}},
                  {{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}}};
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto root = temp_root("consensus_dup");
  const auto result = run_experiment(cfg, root);

  // Two identical scenarios: consensus == each per-scenario greedy.
  REQUIRE(result.designs.size() == 3);
  CHECK(result.designs[0].selected_ids() == result.designs[1].selected_ids());
  CHECK(result.designs[0].selected_ids() == result.designs[2].selected_ids());
  CHECK(fs::exists(result.run_dir / "scores_consensus_V1.csv"));
  CHECK(fs::exists(result.run_dir / "scores_consensus_V2.csv"));
}

TEST_CASE("consensus-source: held-out locations are scored but not designed for") {
  auto doc = tiny_config("consensus-source");
  doc["source_cloud"] = {{"half_width_m", 300.0}, {"count", 5}, {"use_first", 3},
                         {"depth", 500.0}};
  doc["k"] = 3;
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto root = temp_root("consensus_src");
  const auto result = run_experiment(cfg, root);

  REQUIRE(result.designs.size() == 4);  // consensus + 3 per-scenario greedy
  const auto cloud = slurp(result.run_dir / "cloud.csv");
  CHECK(count_lines(cloud) == 6);
  for (int i = 1; i <= 5; ++i) {
    CHECK(fs::exists(result.run_dir / ("scores_consensus_S" + std::to_string(i) + ".csv")));
  }
  CHECK(result.scores.size() == 5);
}

TEST_CASE("misspec sweep row accounting and well-specified pair") {
  auto doc = tiny_config("misspec-sweep");
  doc.erase("medium");
  doc["media"] = {{{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}},
                  {{"vp", 4200.0}, {"vs", 2400.0}, {"rho", 2000.0}},
                  {{"vp", 3800.0}, {"vs", 2200.0}, {"rho", 2000.0}}};
  doc["misspec"] = {{"kind", "velocity"}};
  doc["k"] = 3;
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto root = temp_root("misspec");
  const auto result = run_experiment(cfg, root);

  const auto csv = slurp(result.run_dir / "misspec_risk_diff.csv");
  // 6 ordered pairs x 3 greedy networks x 3 k values.
  CHECK(count_lines(csv) == 1 + 6 * 3 * 3);
  CHECK(result.summary["misspec_rows"] == 54);

  SUBCASE("explicit identical pair reduces to nominal risk differences") {
    auto same = doc;
    same["misspec"] = {{"kind", "velocity"}, {"pairs", {{0, 0}}}};
    const auto cfg2 = ExperimentConfig::from_json(same);
    const auto r2 = run_experiment(cfg2, temp_root("misspec_same"));
    const auto lines = slurp(r2.run_dir / "misspec_risk_diff.csv");
    CHECK(count_lines(lines) == 1 + 1 * 3 * 3);

    // With model == data every risk column is a plain posterior trace, so
    // risk_diff must equal the difference of nominal risks.
    std::istringstream ss(lines);
    std::string line;
    std::getline(ss, line);  // header
    while (std::getline(ss, line)) {
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 7);
      const double rc = std::stod(cells[4]);
      const double rn = std::stod(cells[5]);
      const double diff = std::stod(cells[6]);
      CHECK(diff == doctest::Approx(rc - rn).epsilon(1e-12));
      CHECK(rc > 0.0);
      CHECK(rn > 0.0);
    }
  }
}

TEST_CASE("misspec sweep over source locations uses the design subset for consensus") {
  auto doc = tiny_config("misspec-sweep");
  doc["source_cloud"] = {{"half_width_m", 200.0}, {"count", 4}, {"use_first", 2},
                         {"depth", 500.0}};
  doc["misspec"] = {{"kind", "source"}};
  doc["k"] = 2;
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto root = temp_root("misspec_src");
  const auto result = run_experiment(cfg, root);

  // consensus + one greedy per cloud location.
  REQUIRE(result.designs.size() == 5);
  const auto csv = slurp(result.run_dir / "misspec_risk_diff.csv");
  // 12 ordered pairs x 4 greedy networks x 2 k values.
  CHECK(count_lines(csv) == 1 + 12 * 4 * 2);
}

TEST_CASE("imported greens reproduce the analytic pipeline") {
  const auto root = temp_root("import");
  auto doc = tiny_config("greedy");
  const auto cfg = ExperimentConfig::from_json(doc);

  const auto manifest = export_greens(cfg, root / "greens" / "manifest.json");

  auto doc2 = doc;
  doc2["greens"] = {{"provider", "import"}, {"manifest", manifest.string()}};
  const auto cfg2 = ExperimentConfig::from_json(doc2);

  const auto a = run_experiment(cfg, root / "analytic");
  const auto b = run_experiment(cfg2, root / "imported");
  CHECK(a.designs[0].selected_ids() == b.designs[0].selected_ids());
  for (std::size_t i = 0; i < a.designs[0].steps.size(); ++i) {
    CHECK(a.designs[0].steps[i].eig_increment ==
          doctest::Approx(b.designs[0].steps[i].eig_increment).epsilon(1e-12));
  }
}

TEST_CASE("scenario construction matches the mode") {
  auto doc = tiny_config("greedy");
  const auto scenarios = make_scenarios(ExperimentConfig::from_json(doc));
  REQUIRE(scenarios.size() == 1);
  CHECK(scenarios[0].kind == "nominal");

  auto depth_doc = tiny_config("depth-study");
  depth_doc["depths"] = {500.0, 900.0, 1300.0};
  const auto depth_scenarios = make_scenarios(ExperimentConfig::from_json(depth_doc));
  REQUIRE(depth_scenarios.size() == 3);
  CHECK(depth_scenarios[2].source.depth == 1300.0);
}
