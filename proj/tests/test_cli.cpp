#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path temp_root(const char* tag) {
  auto dir = fs::temp_directory_path() / (std::string("oedmt_cli_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& work) {
  const fs::path out = work / "stdout.txt";
  const fs::path err = work / "stderr.txt";
  const std::string cmd = std::string(OEDMT_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json tiny_config() {
  return {
      {"mode", "greedy"},
      {"grid",
       {{"east_min", -1000.0}, {"east_max", 1000.0}, {"north_min", -1000.0},
        {"north_max", 1000.0}, {"spacing", 500.0}}},
      {"time", {{"n_t", 200}, {"dt", 0.005}}},
      {"medium", {{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}}},
      {"source", {{"east", 0.0}, {"north", 0.0}, {"depth", 500.0}}},
      {"k", 5},
      {"seed", 2024},
  };
}

fs::path write_config(const fs::path& dir, const json& doc, const char* name = "config.json") {
  const auto path = dir / name;
  std::ofstream out(path);
  out << doc.dump(2);
  return path;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("design prints the per-step table and writes artifacts") {
  const auto dir = temp_root("design");
  const auto cfg = write_config(dir, tiny_config());
  const auto r = run_cli("design --config " + cfg.string() + " --out " + (dir / "runs").string(), dir);
  REQUIRE(r.exit_code == 0);
  const auto rows = lines_of(r.out);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == "rank,station_id,east_m,north_m,eig_increment,cum_eig");

  double prev_cum = 0.0;
  for (int i = 1; i <= 5; ++i) {
    std::istringstream ls(rows[i]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 6);
    CHECK(std::stoi(cells[0]) == i);
    const double cum = std::stod(cells[5]);
    CHECK(cum > prev_cum);
    prev_cum = cum;
  }
}

TEST_CASE("override k=1 yields a single-row table") {
  const auto dir = temp_root("override");
  const auto cfg = write_config(dir, tiny_config());
  const auto r = run_cli("design --config " + cfg.string() + " --out " + (dir / "runs").string() +
                             " --override k=1",
                         dir);
  REQUIRE(r.exit_code == 0);
  CHECK(lines_of(r.out).size() == 2);
}

TEST_CASE("missing config file exits 2") {
  const auto dir = temp_root("missing");
  const auto r = run_cli("design --config " + (dir / "nope.json").string(), dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("validate-config accepts every shipped config") {
  const auto dir = temp_root("validate");
  for (const auto& entry : fs::directory_iterator(OEDMT_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const auto r = run_cli("validate-config " + entry.path().string(), dir);
    CHECK_MESSAGE(r.exit_code == 0, entry.path().filename().string(), ": ", r.err);
    CHECK(r.out.find("hash: ") != std::string::npos);
  }
}

TEST_CASE("thread cap does not change the output") {
  const auto dir = temp_root("threads");
  const auto cfg = write_config(dir, tiny_config());
  const auto base = run_cli("design --config " + cfg.string() + " --out " + (dir / "a").string(),
                            dir);
  const auto capped = run_cli("design --config " + cfg.string() + " --out " + (dir / "b").string() +
                                  " --threads 3",
                              dir);
  REQUIRE(base.exit_code == 0);
  REQUIRE(capped.exit_code == 0);
  CHECK(base.out == capped.out);
}

TEST_CASE("seed flag overrides the config seed") {
  const auto dir = temp_root("seedflag");
  auto doc = tiny_config();
  doc["mode"] = "random-baseline";
  doc["random_networks"] = 2;
  doc["k"] = 3;
  const auto cfg = write_config(dir, doc);
  const auto a = run_cli("compare --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
  const auto b = run_cli("compare --config " + cfg.string() + " --out " + (dir / "b").string() +
                             " --seed 999",
                         dir);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.out != b.out);  // random columns move with the seed
}

TEST_CASE("validate-config rejects a negative prior sigma naming the field") {
  const auto dir = temp_root("validate_bad");
  auto doc = tiny_config();
  doc["prior_sigma_p"] = -1.0;
  const auto cfg = write_config(dir, doc);
  const auto r = run_cli("validate-config " + cfg.string(), dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("prior_sigma_p") != std::string::npos);
}

TEST_CASE("validate-config rejects duplicate station ids in an imported manifest") {
  const auto dir = temp_root("validate_dup");

  json manifest = {{"n_t", 2}, {"dt", 0.005}, {"stations", json::array()}};
  std::vector<double> payload(2 * 3 * 6, 0.5);
  std::ofstream bin(dir / "st.f64", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(double));
  bin.close();
  for (int i = 0; i < 2; ++i) {
    manifest["stations"].push_back(
        {{"id", 7}, {"east_m", 0.0}, {"north_m", 0.0}, {"file", "st.f64"}});
  }
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump();
  mf.close();

  auto doc = tiny_config();
  doc["time"] = {{"n_t", 2}, {"dt", 0.005}};
  doc["greens"] = {{"provider", "import"}, {"manifest", (dir / "manifest.json").string()}};
  const auto cfg = write_config(dir, doc);
  const auto r = run_cli("validate-config " + cfg.string(), dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("duplicate") != std::string::npos);
}

TEST_CASE("compare emits the comparison table") {
  const auto dir = temp_root("compare");
  auto doc = tiny_config();
  doc["mode"] = "random-baseline";
  doc["random_networks"] = 5;
  doc["k"] = 3;
  const auto cfg = write_config(dir, doc);
  const auto r = run_cli("compare --config " + cfg.string() + " --out " + (dir / "runs").string(), dir);
  REQUIRE(r.exit_code == 0);
  const auto rows = lines_of(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "k,greedy_cum_eig,random_min,random_mean,random_max");
}

TEST_CASE("misspec sweep row schema") {
  const auto dir = temp_root("misspec");
  auto doc = tiny_config();
  doc["mode"] = "misspec-sweep";
  doc.erase("medium");
  doc["media"] = {{{"vp", 4000.0}, {"vs", 2300.0}, {"rho", 2000.0}},
                  {{"vp", 4200.0}, {"vs", 2400.0}, {"rho", 2000.0}},
                  {{"vp", 3800.0}, {"vs", 2200.0}, {"rho", 2000.0}}};
  doc["misspec"] = {{"kind", "velocity"}};
  doc["k"] = 2;
  const auto cfg = write_config(dir, doc);
  const auto r = run_cli("misspec --config " + cfg.string() + " --out " + (dir / "runs").string(), dir);
  REQUIRE(r.exit_code == 0);
  const auto rows = lines_of(r.out);
  // header + 6 ordered pairs x 3 networks x 2 k values.
  CHECK(rows.size() == 1 + 6 * 3 * 2);
  CHECK(rows[0] == "k,model_scenario,data_scenario,network,risk_consensus,risk_network,risk_diff");
}

TEST_CASE("subcommand and mode must agree") {
  const auto dir = temp_root("modecheck");
  const auto cfg = write_config(dir, tiny_config());  // mode greedy
  const auto r = run_cli("consensus --config " + cfg.string(), dir);
  CHECK(r.exit_code == 2);
}

TEST_CASE("gen-greens produces an importable manifest") {
  const auto dir = temp_root("gen");
  auto doc = tiny_config();
  doc["k"] = 2;
  const auto cfg = write_config(dir, doc);
  const auto r = run_cli("gen-greens --config " + cfg.string() + " --out " + (dir / "out").string(),
                         dir);
  REQUIRE(r.exit_code == 0);
  const auto manifest = dir / "out" / "greens" / "manifest.json";
  REQUIRE(fs::exists(manifest));

  auto doc2 = tiny_config();
  doc2["k"] = 2;
  doc2["greens"] = {{"provider", "import"}, {"manifest", manifest.string()}};
  const auto cfg2 = write_config(dir, doc2, "imported.json");
  const auto r2 = run_cli("design --config " + cfg2.string() + " --out " + (dir / "runs").string(),
                          dir);
  CHECK(r2.exit_code == 0);
}

TEST_CASE("cli and library produce identical artifacts") {
  const auto dir = temp_root("parity");
  const auto cfg = write_config(dir, tiny_config());
  const auto r = run_cli("design --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
  REQUIRE(r.exit_code == 0);
  const auto r2 = run_cli("evaluate --config " + cfg.string() + " --out " + (dir / "b").string(), dir);
  REQUIRE(r2.exit_code == 0);

  // Same config hash, same bytes for the shared artifacts.
  fs::path run_a, run_b;
  for (const auto& e : fs::directory_iterator(dir / "a")) run_a = e.path();
  for (const auto& e : fs::directory_iterator(dir / "b")) run_b = e.path();
  CHECK(run_a.filename() == run_b.filename());
  for (const char* name : {"design.json", "scores.csv", "config.json"}) {
    CHECK(slurp(run_a / name) == slurp(run_b / name));
  }
}
