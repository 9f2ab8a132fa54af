#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oedmt/config.hpp"
#include "oedmt/io_util.hpp"
#include "oedmt/kernels.hpp"
#include "oedmt/scenario.hpp"

namespace {

using namespace oedmt;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "runs";
  std::vector<std::string> overrides;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  if (need_config) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory root");
  cmd->add_option("--override", args.overrides, "KEY=VALUE config override (dotted keys)");
  cmd->add_option("--threads", args.threads, "worker thread cap");
  cmd->add_option("--seed", args.seed, "root seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw ConfigError("cannot open config: " + args.config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be KEY=VALUE: " + kv);
    apply_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto cfg = ExperimentConfig::from_json(doc);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

void apply_threads(const CommonArgs& args) {
  if (args.threads > 0) {
    setenv("OEDMT_THREADS", std::to_string(args.threads).c_str(), 1);
  }
}

void require_mode(const ExperimentConfig& cfg, const std::vector<std::string>& allowed,
                  const std::string& subcommand) {
  for (const auto& m : allowed) {
    if (cfg.mode == m) return;
  }
  std::string list;
  for (const auto& m : allowed) list += (list.empty() ? "" : ", ") + m;
  throw ConfigError("subcommand '" + subcommand + "' requires mode in {" + list + "}, got '" +
                    cfg.mode + "'");
}

void print_design_table(const DesignRecord& rec) {
  std::printf("rank,station_id,east_m,north_m,eig_increment,cum_eig\n");
  int rank = 1;
  for (const auto& s : rec.steps) {
    std::printf("%d,%d,%s,%s,%s,%s\n", rank++, s.station_id, format_number(s.east).c_str(),
                format_number(s.north).c_str(), format_number(s.eig_increment).c_str(),
                format_number(s.cum_eig).c_str());
  }
}

void print_score_table(const ScoreReport& report) {
  std::printf("k,trace_risk,logdet_pos,crps_m1,crps_m2,crps_m3,crps_m4,crps_m5,crps_m6\n");
  for (const auto& r : report.rows) {
    std::printf("%d,%s,%s", r.k, format_number(r.trace_risk).c_str(),
                format_number(r.logdet_pos).c_str());
    for (double c : r.crps) std::printf(",%s", format_number(c).c_str());
    std::printf("\n");
  }
}

void print_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing artifact: " + path.string());
  std::cout << in.rdbuf();
}

int dispatch(const std::string& sub, const CommonArgs& args) {
  apply_threads(args);
  auto cfg = load_with_overrides(args);

  if (sub == "design") {
    require_mode(cfg, {"greedy", "random-baseline", "depth-study"}, sub);
    auto result = run_experiment(cfg, args.out_dir);
    print_design_table(result.designs.front());
    std::fprintf(stderr, "artifacts: %s\n", result.run_dir.c_str());
    return 0;
  }
  if (sub == "consensus") {
    require_mode(cfg, {"consensus-velocity", "consensus-source"}, sub);
    auto result = run_experiment(cfg, args.out_dir);
    print_design_table(result.designs.front());
    std::fprintf(stderr, "artifacts: %s\n", result.run_dir.c_str());
    return 0;
  }
  if (sub == "evaluate") {
    require_mode(cfg, {"greedy", "consensus-velocity", "consensus-source", "depth-study"}, sub);
    auto result = run_experiment(cfg, args.out_dir);
    if (result.scores.empty()) throw ConfigError("mode produced no score report");
    print_score_table(result.scores.front());
    std::fprintf(stderr, "artifacts: %s\n", result.run_dir.c_str());
    return 0;
  }
  if (sub == "compare") {
    require_mode(cfg, {"random-baseline"}, sub);
    auto result = run_experiment(cfg, args.out_dir);
    print_file(result.run_dir / "comparison.csv");
    std::fprintf(stderr, "artifacts: %s\n", result.run_dir.c_str());
    return 0;
  }
  if (sub == "misspec") {
    require_mode(cfg, {"misspec-sweep"}, sub);
    auto result = run_experiment(cfg, args.out_dir);
    print_file(result.run_dir / "misspec_risk_diff.csv");
    std::fprintf(stderr, "artifacts: %s\n", result.run_dir.c_str());
    return 0;
  }
  throw ConfigError("unknown subcommand " + sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedy-optimal seismic network design for moment-tensor inversion"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string manifest_out = "greens/manifest.json";
  std::string validate_path;

  auto* design = app.add_subcommand("design", "greedy / random-baseline / depth-study designs");
  add_common(design, args);
  auto* consensus = app.add_subcommand("consensus", "consensus designs over scenario sets");
  add_common(consensus, args);
  auto* evaluate = app.add_subcommand("evaluate", "design + posterior-quality scores");
  add_common(evaluate, args);
  auto* compare = app.add_subcommand("compare", "greedy vs random-network comparison");
  add_common(compare, args);
  auto* misspec = app.add_subcommand("misspec", "misspecified Bayes-risk sweep");
  add_common(misspec, args);
  auto* gen = app.add_subcommand("gen-greens", "export analytic Green matrices to a manifest");
  add_common(gen, args);
  gen->add_option("--manifest", manifest_out, "manifest output path");
  auto* validate = app.add_subcommand("validate-config", "parse and validate a config");
  validate->add_option("path", validate_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      auto cfg = load_config(validate_path);
      if (cfg.greens.provider == "import") {
        const auto set = green_import(cfg.greens.manifest);
        std::fprintf(stderr, "manifest ok: %zu stations\n", set.stations.size());
      }
      std::cout << cfg.to_json().dump(2) << "\n";
      std::cout << "hash: " << cfg.hash() << "\n";
      return 0;
    }
    if (gen->parsed()) {
      apply_threads(args);
      auto cfg = load_with_overrides(args);
      const auto path = export_greens(cfg, std::filesystem::path(args.out_dir) / manifest_out);
      std::cout << "manifest: " << path.string() << "\n";
      return 0;
    }
    for (auto* cmd : {design, consensus, evaluate, compare, misspec}) {
      if (cmd->parsed()) return dispatch(cmd->get_name(), args);
    }
    std::fprintf(stderr, "no subcommand\n");
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::Config: return 2;
      case ErrorKind::Numerical: return 3;
      case ErrorKind::Io: return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
