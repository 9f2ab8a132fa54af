#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <vector>

#include "oedmt/rng.hpp"
#include "oedmt/types.hpp"

namespace oedmt {

struct MediumSpec {
  double vp = 4000.0;  // m/s
  double vs = 2300.0;  // m/s
  double rho = 2000.0; // kg/m^3

  void validate() const {
    if (!(vp > vs && vs > 0.0 && rho > 0.0)) {
      throw ConfigError("medium requires vp > vs > 0 and rho > 0");
    }
  }
};

// Derivative-of-Gaussian pulse, onset delayed four standard deviations and
// truncated to exact zero outside [0, 8 sigma] so responses are causal to the
// sample. Peak |s| is normalized to 1.
struct SourceTimeFunction {
  double corner_hz = 10.0;

  double sigma() const { return 1.0 / (2.0 * M_PI * corner_hz); }
  double onset_delay() const { return 4.0 * sigma(); }
  double support() const { return 8.0 * sigma(); }

  double value(double t) const;
  double derivative(double t) const;
};

struct SourceSpec {
  double east = 0.0;
  double north = 0.0;
  double depth = 2000.0;  // m, below the free surface
  SourceTimeFunction stf;

  void validate() const {
    if (!(depth > 0.0)) throw ConfigError("source depth must be positive");
  }
};

struct Receiver {
  double east = 0.0;
  double north = 0.0;
};

struct GreenMatrix {
  int station_id = -1;
  // (3 n_t x 6), column order matching the moment-tensor ordering. Rows are
  // component-major blocks: all samples for component 1, then 2, then 3.
  Eigen::MatrixXd samples;
};

// Far-field P + S radiation of a point moment tensor in a homogeneous full
// space, sampled on the grid. Substitute for an external reflectivity solver;
// file import (green_import) covers high-fidelity use.
GreenMatrix green_analytic(const SourceSpec& src, const MediumSpec& medium,
                           const Receiver& receiver, const TimeGrid& grid,
                           int station_id = -1);

// Per-station observational noise: independent components, each with the
// exponential time-correlation kernel sigma^2 exp(-|ti-tj|/T). Stored through
// its tridiagonal inverse; rho = exp(-dt/T), with T <= 0 treated as the
// white-noise limit rho = 0.
struct NoiseModel {
  double sigma_eps = 1.0;
  double corr_time = 0.0;
  TimeGrid grid;
  bool zero_signal = false;

  double rho() const { return corr_time > 0.0 ? std::exp(-grid.dt / corr_time) : 0.0; }

  // out = Sigma_eps^{-1} x for a stacked (3 n_t) waveform.
  Eigen::VectorXd apply_precision(const Eigen::VectorXd& x) const;

  // Dense per-component kernel (n_t x n_t); test and oracle use only.
  Eigen::MatrixXd dense_kernel() const;

  // Stationary AR(1) draw with exactly the exponential-kernel covariance.
  Eigen::VectorXd sample(Rng& rng) const;
};

// sigma_eps = rel * ||g m_ref||_2 / sqrt(3 n_t), floored at sigma_floor.
// When the reference waveform is below the floor the zero_signal flag is set.
NoiseModel calibrate_noise(const GreenMatrix& g, const TimeGrid& grid,
                           const MomentTensor& reference_mt, double rel, double corr_time,
                           double sigma_floor);

// H = G^T Sigma_eps^{-1} G via the factored inverse; b = G^T Sigma_eps^{-1} y
// when y is given.
PrecisionSummary precision_summary(const GreenMatrix& g, const NoiseModel& noise,
                                   const Eigen::VectorXd* y = nullptr);

// y = g m + eps, deterministic given seed.
Eigen::VectorXd synthesize_observation(const GreenMatrix& g, const MomentTensor& true_mt,
                                       const NoiseModel& noise, std::uint64_t seed);

struct StationGreen {
  GreenMatrix green;
  double east = 0.0;
  double north = 0.0;
};

struct GreenSet {
  TimeGrid grid;
  std::vector<StationGreen> stations;
};

// Manifest: JSON {n_t, dt, stations: [{id, east_m, north_m, file}]}, each
// station file little-endian float64, row-major (3 n_t x 6).
GreenSet green_import(const std::filesystem::path& manifest_path);
void green_export(const std::filesystem::path& manifest_path, const GreenSet& set);

void write_waveform_csv(const std::filesystem::path& path, const TimeGrid& grid,
                        const Eigen::VectorXd& u);

}  // namespace oedmt
