#include "oedmt/config.hpp"

#include <fstream>
#include <set>

#include "oedmt/rng.hpp"

namespace oedmt {

using nlohmann::json;

namespace {

const std::set<std::string> kModes = {"greedy",        "consensus-velocity", "consensus-source",
                                      "depth-study",   "misspec-sweep",      "random-baseline"};

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + std::string(key) + "': " + e.what());
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + std::string(key) + "': " + e.what());
  }
}

MediumSpec medium_from(const json& obj, const std::string& where) {
  require_keys(obj, where, {"vp", "vs", "rho"});
  MediumSpec m;
  m.vp = get_or(obj, "vp", m.vp);
  m.vs = get_or(obj, "vs", m.vs);
  m.rho = get_or(obj, "rho", m.rho);
  return m;
}

json medium_to(const MediumSpec& m) { return {{"vp", m.vp}, {"vs", m.vs}, {"rho", m.rho}}; }

}  // namespace

MomentTensor ExperimentConfig::default_true_mt() {
  Vec6 m;
  m << 0.269, 0.700, -0.969, -0.454, -0.195, 0.0592;
  return MomentTensor(m);
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  require_keys(doc, "config root",
               {"mode", "grid", "time", "medium", "media", "source", "source_cloud", "depths",
                "stf_corner_hz", "prior_sigma_p", "noise", "true_mt", "k", "seed",
                "random_networks", "export_eig_field", "greens", "misspec"});

  ExperimentConfig cfg;
  cfg.mode = get_or<std::string>(doc, "mode", cfg.mode);

  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    require_keys(g, "grid",
                 {"east_min", "east_max", "north_min", "north_max", "spacing", "count_east",
                  "count_north"});
    cfg.grid.east_min = get_or(g, "east_min", cfg.grid.east_min);
    cfg.grid.east_max = get_or(g, "east_max", cfg.grid.east_max);
    cfg.grid.north_min = get_or(g, "north_min", cfg.grid.north_min);
    cfg.grid.north_max = get_or(g, "north_max", cfg.grid.north_max);
    cfg.grid.spacing = get_opt<double>(g, "spacing");
    cfg.grid.count_east = get_opt<int>(g, "count_east");
    cfg.grid.count_north = get_opt<int>(g, "count_north");
  }

  if (doc.contains("time")) {
    const auto& t = doc["time"];
    require_keys(t, "time", {"n_t", "dt"});
    cfg.time = TimeGrid(get_or(t, "n_t", cfg.time.n_t), get_or(t, "dt", cfg.time.dt));
  }

  if (doc.contains("medium") && doc.contains("media")) {
    throw ConfigError("give either 'medium' or 'media', not both");
  }
  if (doc.contains("medium")) cfg.media = {medium_from(doc["medium"], "medium")};
  if (doc.contains("media")) {
    cfg.media.clear();
    int i = 0;
    for (const auto& m : doc["media"]) {
      cfg.media.push_back(medium_from(m, "media[" + std::to_string(i++) + "]"));
    }
    if (cfg.media.empty()) throw ConfigError("media list is empty");
  }

  if (doc.contains("source")) {
    const auto& s = doc["source"];
    require_keys(s, "source", {"east", "north", "depth"});
    cfg.source.east = get_or(s, "east", cfg.source.east);
    cfg.source.north = get_or(s, "north", cfg.source.north);
    cfg.source.depth = get_or(s, "depth", cfg.source.depth);
  }

  if (doc.contains("source_cloud") && !doc["source_cloud"].is_null()) {
    const auto& s = doc["source_cloud"];
    require_keys(s, "source_cloud", {"half_width_m", "count", "use_first", "depth"});
    SourceCloudConfig c;
    c.half_width_m = get_or(s, "half_width_m", c.half_width_m);
    c.count = get_or(s, "count", c.count);
    c.use_first = get_or(s, "use_first", c.use_first);
    c.depth = get_or(s, "depth", c.depth);
    cfg.source_cloud = c;
  }

  cfg.depths = get_or<std::vector<double>>(doc, "depths", {});
  cfg.source.stf.corner_hz = get_or(doc, "stf_corner_hz", cfg.source.stf.corner_hz);
  cfg.prior_sigma_p = get_or(doc, "prior_sigma_p", cfg.prior_sigma_p);

  if (doc.contains("noise")) {
    const auto& nz = doc["noise"];
    require_keys(nz, "noise", {"rel", "corr_time", "sigma_floor"});
    cfg.noise.rel = get_or(nz, "rel", cfg.noise.rel);
    cfg.noise.corr_time = get_opt<double>(nz, "corr_time");
    cfg.noise.sigma_floor = get_opt<double>(nz, "sigma_floor");
  }

  if (doc.contains("true_mt")) {
    const auto v = doc["true_mt"].get<std::vector<double>>();
    if (v.size() != 6) throw ConfigError("true_mt must have exactly 6 entries");
    cfg.true_mt = MomentTensor(Vec6(v.data()));
  }

  cfg.k = get_or(doc, "k", cfg.k);
  cfg.seed = get_or(doc, "seed", cfg.seed);
  cfg.random_networks = get_or(doc, "random_networks", cfg.random_networks);
  cfg.export_eig_field = get_or(doc, "export_eig_field", cfg.export_eig_field);

  if (doc.contains("greens")) {
    const auto& g = doc["greens"];
    require_keys(g, "greens", {"provider", "manifest"});
    cfg.greens.provider = get_or<std::string>(g, "provider", cfg.greens.provider);
    cfg.greens.manifest = get_or<std::string>(g, "manifest", cfg.greens.manifest);
  }

  if (doc.contains("misspec") && !doc["misspec"].is_null()) {
    const auto& m = doc["misspec"];
    require_keys(m, "misspec", {"kind", "pairs"});
    MisspecSweepConfig ms;
    ms.kind = get_or<std::string>(m, "kind", ms.kind);
    if (m.contains("pairs") && !m["pairs"].is_null()) {
      for (const auto& p : m["pairs"]) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("misspec pair must be [model, data]");
        ms.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    }
    cfg.misspec = ms;
  }

  cfg.validate();
  return cfg;
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["mode"] = mode;
  doc["grid"] = {{"east_min", grid.east_min},
                 {"east_max", grid.east_max},
                 {"north_min", grid.north_min},
                 {"north_max", grid.north_max}};
  if (grid.spacing) doc["grid"]["spacing"] = *grid.spacing;
  if (grid.count_east) doc["grid"]["count_east"] = *grid.count_east;
  if (grid.count_north) doc["grid"]["count_north"] = *grid.count_north;
  doc["time"] = {{"n_t", time.n_t}, {"dt", time.dt}};
  if (media.size() == 1) {
    doc["medium"] = medium_to(media[0]);
  } else {
    doc["media"] = json::array();
    for (const auto& m : media) doc["media"].push_back(medium_to(m));
  }
  doc["source"] = {{"east", source.east}, {"north", source.north}, {"depth", source.depth}};
  if (source_cloud) {
    doc["source_cloud"] = {{"half_width_m", source_cloud->half_width_m},
                           {"count", source_cloud->count},
                           {"use_first", source_cloud->use_first},
                           {"depth", source_cloud->depth}};
  }
  if (!depths.empty()) doc["depths"] = depths;
  doc["stf_corner_hz"] = source.stf.corner_hz;
  doc["prior_sigma_p"] = prior_sigma_p;
  doc["noise"] = {{"rel", noise.rel}};
  if (noise.corr_time) doc["noise"]["corr_time"] = *noise.corr_time;
  if (noise.sigma_floor) doc["noise"]["sigma_floor"] = *noise.sigma_floor;
  doc["true_mt"] = std::vector<double>(true_mt.m.data(), true_mt.m.data() + 6);
  doc["k"] = k;
  doc["seed"] = seed;
  doc["random_networks"] = random_networks;
  doc["export_eig_field"] = export_eig_field;
  doc["greens"] = {{"provider", greens.provider}};
  if (!greens.manifest.empty()) doc["greens"]["manifest"] = greens.manifest;
  if (misspec) {
    doc["misspec"] = {{"kind", misspec->kind}};
    if (!misspec->pairs.empty()) {
      json pairs = json::array();
      for (const auto& [a, b] : misspec->pairs) pairs.push_back({a, b});
      doc["misspec"]["pairs"] = pairs;
    }
  }
  return doc;
}

void ExperimentConfig::validate() const {
  if (!kModes.count(mode)) throw ConfigError("unknown mode '" + mode + "'");
  if (!(prior_sigma_p > 0.0)) throw ConfigError("prior_sigma_p must be positive");
  if (!(noise.rel > 0.0 && noise.rel <= 1.0)) throw ConfigError("noise.rel must lie in (0, 1]");
  if (noise.corr_time && !(*noise.corr_time >= 0.0)) {
    throw ConfigError("noise.corr_time must be nonnegative");
  }
  if (noise.sigma_floor && !(*noise.sigma_floor >= 0.0)) {
    throw ConfigError("noise.sigma_floor must be nonnegative");
  }
  if (k < 1) throw ConfigError("k must be at least 1");
  for (const auto& m : media) m.validate();
  source.validate();
  if (!(source.stf.corner_hz > 0.0)) throw ConfigError("stf_corner_hz must be positive");

  if (greens.provider != "analytic" && greens.provider != "import") {
    throw ConfigError("greens.provider must be 'analytic' or 'import'");
  }
  if (greens.provider == "import" && greens.manifest.empty()) {
    throw ConfigError("greens.provider 'import' requires greens.manifest");
  }
  if (greens.provider == "import" && mode != "greedy" && mode != "random-baseline") {
    throw ConfigError("imported greens support only greedy and random-baseline modes");
  }

  if (mode == "consensus-velocity" && media.size() < 2) {
    throw ConfigError("consensus-velocity requires a media list with at least 2 entries");
  }
  if (mode == "consensus-source") {
    if (!source_cloud) throw ConfigError("consensus-source requires source_cloud");
    if (source_cloud->count < 1 || source_cloud->use_first < 1 ||
        source_cloud->use_first > source_cloud->count) {
      throw ConfigError("source_cloud requires 1 <= use_first <= count");
    }
    if (!(source_cloud->depth > 0.0)) throw ConfigError("source_cloud.depth must be positive");
  }
  if (mode == "depth-study") {
    if (depths.empty()) throw ConfigError("depth-study requires a nonempty depths list");
    for (double d : depths) {
      if (!(d > 0.0)) throw ConfigError("depth-study depths must be positive");
    }
  }
  if (mode == "misspec-sweep") {
    if (!misspec) throw ConfigError("misspec-sweep requires the misspec block");
    if (misspec->kind != "velocity" && misspec->kind != "source") {
      throw ConfigError("misspec.kind must be 'velocity' or 'source'");
    }
    if (misspec->kind == "velocity" && media.size() < 2) {
      throw ConfigError("misspec velocity sweep requires a media list");
    }
    if (misspec->kind == "source" && !source_cloud) {
      throw ConfigError("misspec source sweep requires source_cloud");
    }
  }
  if (mode == "random-baseline" && random_networks < 1) {
    throw ConfigError("random-baseline requires random_networks >= 1");
  }
}

std::string ExperimentConfig::hash() const {
  const std::string canonical = to_json().dump();
  const std::uint64_t h = seed::fnv1a(canonical);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad override key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace oedmt
