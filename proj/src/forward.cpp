#include "oedmt/forward.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "oedmt/io_util.hpp"
#include "oedmt/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "station files are little-endian float64; big-endian hosts are unsupported");

namespace oedmt {

using nlohmann::json;

double SourceTimeFunction::value(double t) const {
  const double s = sigma();
  if (t <= 0.0 || t >= support()) return 0.0;
  const double tau = (t - onset_delay()) / s;
  return -tau * std::exp(0.5 - 0.5 * tau * tau);
}

double SourceTimeFunction::derivative(double t) const {
  const double s = sigma();
  if (t <= 0.0 || t >= support()) return 0.0;
  const double tau = (t - onset_delay()) / s;
  return (tau * tau - 1.0) / s * std::exp(0.5 - 0.5 * tau * tau);
}

GreenMatrix green_analytic(const SourceSpec& src, const MediumSpec& medium,
                           const Receiver& receiver, const TimeGrid& grid, int station_id) {
  src.validate();
  medium.validate();

  // Positions in (east, north, up); the source sits depth meters below the
  // free surface, receivers on it.
  const Eigen::Vector3d dx(receiver.east - src.east, receiver.north - src.north, src.depth);
  const double r = dx.norm();
  if (r < medium.vp * grid.dt) {
    throw DegenerateGeometry("receiver within one grid cell of the source");
  }
  const Eigen::Vector3d gamma = dx / r;

  // A unit normalized moment component corresponds to a reference scalar
  // moment of 1e13 N*m (about Mw 2.6), keeping displacements at physical
  // microseismic scales instead of the 1e-18 m of a literal 1 N*m source.
  constexpr double kRefMoment = 1e13;

  const double t_p = r / medium.vp;
  const double t_s = r / medium.vs;
  const double amp_p = kRefMoment / (4.0 * M_PI * medium.rho * std::pow(medium.vp, 3) * r);
  const double amp_s = kRefMoment / (4.0 * M_PI * medium.rho * std::pow(medium.vs, 3) * r);

  GreenMatrix out;
  out.station_id = station_id;
  out.samples.setZero(3 * grid.n_t, 6);

  // Basis tensors for the six moment components; each off-diagonal pair
  // carries total weight one, split across the two symmetric slots.
  static const std::array<std::array<int, 2>, 6> idx = {{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
  for (int q = 0; q < 6; ++q) {
    const int j = idx[q][0];
    const int k = idx[q][1];
    Eigen::Matrix3d basis = Eigen::Matrix3d::Zero();
    if (j == k) {
      basis(j, j) = 1.0;
    } else {
      basis(j, k) = 0.5;
      basis(k, j) = 0.5;
    }
    const Eigen::Vector3d w = basis * gamma;
    const double contraction = gamma.dot(w);
    const Eigen::Vector3d coeff_p = amp_p * contraction * gamma;
    const Eigen::Vector3d coeff_s = amp_s * (w - contraction * gamma);

    for (int l = 0; l < grid.n_t; ++l) {
      const double t = l * grid.dt;
      const double sp = src.stf.derivative(t - t_p);
      const double ss = src.stf.derivative(t - t_s);
      if (sp == 0.0 && ss == 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        out.samples(c * grid.n_t + l, q) = coeff_p[c] * sp + coeff_s[c] * ss;
      }
    }
  }
  return out;
}

Eigen::VectorXd NoiseModel::apply_precision(const Eigen::VectorXd& x) const {
  const int n = grid.n_t;
  if (x.size() != 3 * n) throw ShapeMismatch("apply_precision: waveform length != 3 n_t");
  const double inv_scale = 1.0 / (sigma_eps * sigma_eps);
  Eigen::VectorXd out(3 * n);
  for (int c = 0; c < 3; ++c) {
    kernels::ou_precision_apply(x.data() + c * n, out.data() + c * n, n, rho(), inv_scale);
  }
  return out;
}

Eigen::MatrixXd NoiseModel::dense_kernel() const {
  const int n = grid.n_t;
  Eigen::MatrixXd k(n, n);
  const double s2 = sigma_eps * sigma_eps;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k(i, j) = s2 * (corr_time > 0.0 ? std::exp(-std::abs(i - j) * grid.dt / corr_time)
                                      : (i == j ? 1.0 : 0.0));
    }
  }
  return k;
}

Eigen::VectorXd NoiseModel::sample(Rng& rng) const {
  const int n = grid.n_t;
  const double r = rho();
  const double innov = sigma_eps * std::sqrt(1.0 - r * r);
  Eigen::VectorXd eps(3 * n);
  for (int c = 0; c < 3; ++c) {
    double* e = eps.data() + c * n;
    e[0] = sigma_eps * rng.gaussian();
    for (int i = 1; i < n; ++i) e[i] = r * e[i - 1] + innov * rng.gaussian();
  }
  return eps;
}

NoiseModel calibrate_noise(const GreenMatrix& g, const TimeGrid& grid,
                           const MomentTensor& reference_mt, double rel, double corr_time,
                           double sigma_floor) {
  if (!(rel > 0.0 && rel <= 1.0)) throw ConfigError("noise rel must lie in (0, 1]");
  if (!(sigma_floor >= 0.0)) throw ConfigError("sigma_floor must be nonnegative");
  const int rows = static_cast<int>(g.samples.rows());
  if (rows != 3 * grid.n_t) throw ShapeMismatch("green matrix rows != 3 n_t");

  NoiseModel model;
  model.grid = grid;
  model.corr_time = corr_time;

  const double unorm = (g.samples * reference_mt.m).norm();
  const double root = std::sqrt(static_cast<double>(rows));
  if (unorm < sigma_floor * root) {
    model.sigma_eps = sigma_floor;
    model.zero_signal = true;
  } else {
    model.sigma_eps = std::max(rel * unorm / root, sigma_floor);
  }
  return model;
}

PrecisionSummary precision_summary(const GreenMatrix& g, const NoiseModel& noise,
                                   const Eigen::VectorXd* y) {
  const int n = noise.grid.n_t;
  if (g.samples.rows() != 3 * n || g.samples.cols() != 6) {
    throw ShapeMismatch("precision_summary: green matrix shape inconsistent with noise grid");
  }
  if (y && y->size() != 3 * n) throw ShapeMismatch("precision_summary: data length != 3 n_t");

  const double inv_scale = 1.0 / (noise.sigma_eps * noise.sigma_eps);
  const double r = noise.rho();

  PrecisionSummary out;
  Eigen::MatrixXd weighted(n, 6);
  Mat6 h = Mat6::Zero();
  for (int c = 0; c < 3; ++c) {
    for (int q = 0; q < 6; ++q) {
      kernels::ou_precision_apply(g.samples.col(q).data() + c * n, weighted.col(q).data(),
                                  n, r, inv_scale);
    }
    kernels::gram6(g.samples.data() + c * n, static_cast<std::size_t>(3 * n), weighted.data(),
                   static_cast<std::size_t>(n), static_cast<std::size_t>(n), h.data());
    if (y) {
      for (int q = 0; q < 6; ++q) {
        out.b[q] += kernels::dot(y->data() + c * n, weighted.col(q).data(), n);
      }
    }
  }
  out.H = 0.5 * (h + h.transpose());
  out.has_data = (y != nullptr);
  return out;
}

Eigen::VectorXd synthesize_observation(const GreenMatrix& g, const MomentTensor& true_mt,
                                       const NoiseModel& noise, std::uint64_t seed) {
  if (g.samples.rows() != 3 * noise.grid.n_t) {
    throw ShapeMismatch("synthesize_observation: shape mismatch");
  }
  Eigen::VectorXd y = g.samples * true_mt.m;
  if (noise.sigma_eps > 0.0) {
    Rng rng(seed);
    const Eigen::VectorXd eps = noise.sample(rng);
    kernels::axpy(1.0, eps.data(), y.data(), static_cast<std::size_t>(y.size()));
  }
  return y;
}

GreenSet green_import(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestParseError(std::string("manifest parse error: ") + e.what());
  }

  GreenSet set;
  try {
    set.grid = TimeGrid(doc.at("n_t").get<int>(), doc.at("dt").get<double>());
  } catch (const json::exception& e) {
    throw ManifestParseError(std::string("manifest missing n_t/dt: ") + e.what());
  }
  if (!doc.contains("stations") || !doc["stations"].is_array()) {
    throw ManifestParseError("manifest missing stations array");
  }

  const auto dir = manifest_path.parent_path();
  std::vector<int> ids;
  for (const auto& st : doc["stations"]) {
    int id;
    std::string file;
    StationGreen sg;
    try {
      id = st.at("id").get<int>();
      sg.east = st.at("east_m").get<double>();
      sg.north = st.at("north_m").get<double>();
      file = st.at("file").get<std::string>();
    } catch (const json::exception& e) {
      throw ManifestParseError(std::string("bad station entry: ") + e.what());
    }
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) {
      throw ManifestParseError("duplicate station id " + std::to_string(id));
    }
    ids.push_back(id);

    const auto path = dir / file;
    std::ifstream bin(path, std::ios::binary | std::ios::ate);
    if (!bin) throw IoError("cannot open station file: " + path.string());
    const auto bytes = static_cast<std::size_t>(bin.tellg());
    const std::size_t expected = static_cast<std::size_t>(3 * set.grid.n_t) * 6 * sizeof(double);
    if (bytes != expected) {
      throw ShapeMismatch("station " + std::to_string(id) + ": file size " + std::to_string(bytes) +
                          " != expected " + std::to_string(expected));
    }
    bin.seekg(0);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rowmajor(3 * set.grid.n_t, 6);
    bin.read(reinterpret_cast<char*>(rowmajor.data()), static_cast<std::streamsize>(bytes));
    if (!bin) throw IoError("short read on station file: " + path.string());

    for (int rrow = 0; rrow < rowmajor.rows(); ++rrow) {
      for (int ccol = 0; ccol < 6; ++ccol) {
        if (!std::isfinite(rowmajor(rrow, ccol))) {
          throw NonFiniteSample("station " + std::to_string(id) + " row " + std::to_string(rrow) +
                                ": non-finite sample");
        }
      }
    }
    sg.green.station_id = id;
    sg.green.samples = rowmajor;
    set.stations.push_back(std::move(sg));
  }
  return set;
}

void green_export(const std::filesystem::path& manifest_path, const GreenSet& set) {
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  json doc;
  doc["n_t"] = set.grid.n_t;
  doc["dt"] = set.grid.dt;
  doc["stations"] = json::array();
  for (const auto& sg : set.stations) {
    char name[32];
    std::snprintf(name, sizeof(name), "st%06d.f64", sg.green.station_id);
    const auto path = dir / name;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rowmajor = sg.green.samples;
    std::ofstream bin(path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot write station file: " + path.string());
    bin.write(reinterpret_cast<const char*>(rowmajor.data()),
              static_cast<std::streamsize>(sizeof(double) * rowmajor.size()));
    doc["stations"].push_back({{"id", sg.green.station_id},
                               {"east_m", sg.east},
                               {"north_m", sg.north},
                               {"file", std::string(name)}});
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + manifest_path.string());
  out << doc.dump(2) << "\n";
}

void write_waveform_csv(const std::filesystem::path& path, const TimeGrid& grid,
                        const Eigen::VectorXd& u) {
  if (u.size() != 3 * grid.n_t) throw ShapeMismatch("waveform length != 3 n_t");
  CsvWriter csv(path);
  csv.row("t", "u1", "u2", "u3");
  for (int l = 0; l < grid.n_t; ++l) {
    csv.row(l * grid.dt, u[l], u[grid.n_t + l], u[2 * grid.n_t + l]);
  }
}

}  // namespace oedmt
