#pragma once

#include <Eigen/Dense>

#include "oedmt/errors.hpp"

namespace oedmt {

// The moment tensor lives in R^6 throughout: m1=M11, m2=M22, m3=M33,
// m4=M12, m5=M13, m6=M23.
inline constexpr int kMtDim = 6;

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct MomentTensor {
  Vec6 m = Vec6::Zero();

  MomentTensor() = default;
  explicit MomentTensor(const Vec6& v) : m(v) {
    if (!m.allFinite()) throw ConfigError("moment tensor has non-finite entries");
  }

  double operator[](int i) const { return m[i]; }
};

// Mean/covariance pair for a Gaussian over the moment tensor. Covariance must
// be symmetric (1e-12 relative) and strictly positive definite.
struct GaussianBelief {
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Identity();

  GaussianBelief() = default;
  GaussianBelief(const Vec6& mu, const Mat6& sigma) : mean(mu), cov(sigma) {}

  static GaussianBelief isotropic(double sigma_p) {
    return GaussianBelief(Vec6::Zero(), sigma_p * sigma_p * Mat6::Identity());
  }
};

// Projected information carried by one station or a whole network:
// H = G^T Sigma_eps^{-1} G, and when data y is attached, b = G^T Sigma_eps^{-1} y.
// Network information is the plain sum of per-station summaries.
struct PrecisionSummary {
  Mat6 H = Mat6::Zero();
  Vec6 b = Vec6::Zero();
  bool has_data = false;

  PrecisionSummary& operator+=(const PrecisionSummary& other) {
    H += other.H;
    b += other.b;
    has_data = has_data || other.has_data;
    return *this;
  }
};

struct TimeGrid {
  int n_t = 900;
  double dt = 0.005;

  TimeGrid() = default;
  TimeGrid(int n, double step) : n_t(n), dt(step) {
    if (n_t < 2 || !(dt > 0.0)) throw ConfigError("time grid requires n_t >= 2 and dt > 0");
  }

  double duration() const { return n_t * dt; }

  bool operator==(const TimeGrid& o) const { return n_t == o.n_t && dt == o.dt; }
};

}  // namespace oedmt
