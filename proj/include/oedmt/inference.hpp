#pragma once

#include <span>

#include "oedmt/types.hpp"

namespace oedmt {

// Symmetrize, Cholesky-factor, and reject matrices that are asymmetric beyond
// 1e-10 relative or not positive definite. All log-dets and inverses in the
// library go through these.
Mat6 symmetrized(const Mat6& a);
double logdet_spd(const Mat6& a);
Mat6 spd_inverse(const Mat6& a);

// Conjugate update: cov = (H + prior.cov^-1)^-1,
// mean = cov * (prior.cov^-1 * prior.mean + b).
GaussianBelief posterior_update(const GaussianBelief& prior, const PrecisionSummary& info);

// Expected information gain 1/2 logdet(H * Sigma_pr + I), evaluated through
// the Cholesky of the congruent symmetric form L^T H L + I with Sigma_pr = L L^T.
double eig(const Mat6& H, const Mat6& prior_cov);

// Network EIG: block-diagonal noise makes the network H the sum of the
// per-station summaries.
double eig_network(std::span<const PrecisionSummary> stations, const Mat6& prior_cov);

double kl_gaussian(const GaussianBelief& p, const GaussianBelief& q);

// Factors the prior covariance once so a candidate sweep pays one Cholesky
// per 6x6 H instead of two.
class EigSweep {
public:
  explicit EigSweep(const Mat6& prior_cov);
  double operator()(const Mat6& H) const;

private:
  Mat6 chol_lower_;
};

}  // namespace oedmt
