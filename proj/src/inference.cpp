#include "oedmt/inference.hpp"

#include <cmath>

namespace oedmt {

namespace {

constexpr double kAsymTol = 1e-10;

void check_symmetric(const Mat6& a, const char* what) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > kAsymTol * scale) {
    throw NumericalBreakdown(std::string(what) + ": matrix asymmetric beyond tolerance");
  }
}

Eigen::LLT<Mat6> llt_of(const Mat6& a, const char* what, bool prior) {
  Eigen::LLT<Mat6> llt(symmetrized(a));
  if (llt.info() != Eigen::Success) {
    if (prior) throw NonSPDPrior(std::string(what) + ": Cholesky failed, matrix not SPD");
    throw NumericalBreakdown(std::string(what) + ": Cholesky failed, matrix not SPD");
  }
  return llt;
}

double logdet_from_llt(const Eigen::LLT<Mat6>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

Mat6 symmetrized(const Mat6& a) { return 0.5 * (a + a.transpose()); }

double logdet_spd(const Mat6& a) {
  check_symmetric(a, "logdet");
  return logdet_from_llt(llt_of(a, "logdet", false));
}

Mat6 spd_inverse(const Mat6& a) {
  check_symmetric(a, "inverse");
  return llt_of(a, "inverse", false).solve(Mat6::Identity());
}

GaussianBelief posterior_update(const GaussianBelief& prior, const PrecisionSummary& info) {
  check_symmetric(prior.cov, "posterior_update prior");
  auto prior_llt = llt_of(prior.cov, "posterior_update prior", true);
  if (info.H.isZero(0.0) && info.b.isZero(0.0)) return prior;  // no data
  const Mat6 prior_prec = prior_llt.solve(Mat6::Identity());

  const Mat6 post_prec = symmetrized(info.H) + prior_prec;
  auto post_llt = llt_of(post_prec, "posterior_update posterior", false);

  GaussianBelief post;
  post.cov = symmetrized(post_llt.solve(Mat6::Identity()));
  post.mean = post_llt.solve(prior_prec * prior.mean + info.b);
  return post;
}

double eig(const Mat6& H, const Mat6& prior_cov) {
  check_symmetric(H, "eig H");
  check_symmetric(prior_cov, "eig prior");
  auto prior_llt = llt_of(prior_cov, "eig prior", true);
  const Mat6 L = prior_llt.matrixL();
  // det(H Sigma_pr + I) = det(L^T H L + I); the congruent form stays symmetric.
  const Mat6 inner = symmetrized(L.transpose() * symmetrized(H) * L) + Mat6::Identity();
  auto inner_llt = llt_of(inner, "eig", false);
  const double val = 0.5 * logdet_from_llt(inner_llt);
  return val < 0.0 ? 0.0 : val;
}

double eig_network(std::span<const PrecisionSummary> stations, const Mat6& prior_cov) {
  if (stations.empty()) throw EmptyCandidates("eig_network: empty station list");
  Mat6 H = Mat6::Zero();
  for (const auto& s : stations) H += s.H;
  return eig(H, prior_cov);
}

EigSweep::EigSweep(const Mat6& prior_cov) {
  check_symmetric(prior_cov, "eig prior");
  chol_lower_ = llt_of(prior_cov, "eig prior", true).matrixL();
}

double EigSweep::operator()(const Mat6& H) const {
  const Mat6 inner =
      symmetrized(chol_lower_.transpose() * H * chol_lower_) + Mat6::Identity();
  Eigen::LLT<Mat6> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw NumericalBreakdown("eig: Cholesky failed on congruent form");
  }
  const double val = logdet_from_llt(llt);
  return val < 0.0 ? 0.0 : 0.5 * val;
}

double kl_gaussian(const GaussianBelief& p, const GaussianBelief& q) {
  auto q_llt = llt_of(q.cov, "kl q", true);
  auto p_llt = llt_of(p.cov, "kl p", true);
  const Vec6 dm = q.mean - p.mean;
  const double trace_term = q_llt.solve(p.cov).trace();
  const double maha = dm.dot(q_llt.solve(dm));
  const double logdet_ratio = logdet_from_llt(q_llt) - logdet_from_llt(p_llt);
  const double val = 0.5 * (trace_term + maha - kMtDim + logdet_ratio);
  return val < 0.0 ? 0.0 : val;
}

}  // namespace oedmt
