#pragma once

#include <cstdint>
#include <vector>

#include "ctxnorm/batch.hpp"

namespace ctxnorm {

// Smallest variance any component may report. Keeps EM away from
// single-point collapse and log densities finite.
inline constexpr double kVarFloor = 1e-6;

// Diagonal-Gaussian mixture: weights[k] is the prior of component k,
// means/vars are K x D.
struct GmmModel {
  std::vector<double> weights;
  Matrix means;
  Matrix vars;

  int k() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.cols; }
};

struct EmDiag {
  std::vector<double> log_likelihood_trace;
};

// Posterior p(k|x) per point, rows sum to 1. Log-space with per-row
// max-subtraction before exponentiation.
Matrix gmm_posterior(const GmmModel& model, const Matrix& points);

// EM fit of a K-component diagonal mixture. Means start from k-means,
// weights uniform, variances at the global per-dimension variance.
GmmModel gmm_fit_em(const Matrix& points, int k, int max_iter, double tol,
                    std::uint64_t seed, EmDiag* diag = nullptr);

// Sum over points of log sum_k w_k N(x; mean_k, diag var_k), logsumexp
// stabilized.
double gmm_log_likelihood(const GmmModel& model, const Matrix& points);

}  // namespace ctxnorm
