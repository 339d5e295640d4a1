#include "ctxnorm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxnorm/context.hpp"
#include "ctxnorm/error.hpp"

namespace ctxnorm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_model_points(const GmmModel& model, const Matrix& points) {
  const int k = model.k();
  if (k < 1 || model.means.rows != k || model.vars.rows != k ||
      model.means.cols != model.vars.cols)
    fail("shape-mismatch", "inconsistent mixture model");
  if (points.cols != model.dim())
    fail("shape-mismatch", "point dimension does not match mixture dimension");
}

// log(w_k * N(x_i; mean_k, diag var_k)) for every point/component pair.
Matrix log_joint(const GmmModel& model, const Matrix& points) {
  const int n = points.rows, k = model.k(), dim = model.dim();
  std::vector<double> logw(k), logdet(k);
  for (int c = 0; c < k; ++c) {
    logw[c] = std::log(model.weights[c]);
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += std::log(model.vars.at(c, d));
    logdet[c] = s;
  }

  Matrix lj(n, k);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* x = points.row(i);
    for (int c = 0; c < k; ++c) {
      double quad = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = x[d] - model.means.at(c, d);
        quad += diff * diff / model.vars.at(c, d);
      }
      lj.at(i, c) = logw[c] - 0.5 * (dim * kLog2Pi + logdet[c] + quad);
    }
  }
  return lj;
}

}  // namespace

Matrix gmm_posterior(const GmmModel& model, const Matrix& points) {
  check_model_points(model, points);
  Matrix post = log_joint(model, points);
  const int n = points.rows, k = model.k();

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* row = post.row(i);
    double mx = row[0];
    for (int c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int c = 0; c < k; ++c) row[c] /= sum;
  }
  return post;
}

double gmm_log_likelihood(const GmmModel& model, const Matrix& points) {
  check_model_points(model, points);
  const Matrix lj = log_joint(model, points);
  const int n = points.rows, k = model.k();
  long double total = 0.0L;
  for (int i = 0; i < n; ++i) {
    const double* row = lj.row(i);
    double mx = row[0];
    for (int c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(row[c] - mx);
    total += mx + std::log(sum);
  }
  return static_cast<double>(total);
}

GmmModel gmm_fit_em(const Matrix& points, int k, int max_iter, double tol,
                    std::uint64_t seed, EmDiag* diag) {
  const int n = points.rows, dim = points.cols;
  if (k < 1 || n < k) fail("too-few-points", "need at least k points (k >= 1)");
  if (tol < 0.0) fail("bad-config", "tol must be >= 0");

  GmmModel model;
  model.weights.assign(k, 1.0 / k);
  model.means = kmeans_fit(points, k, 50, 1e-6, seed).centroids;
  model.vars = Matrix(k, dim);

  // Shared starting variance: global per-dimension biased variance.
  for (int d = 0; d < dim; ++d) {
    long double mean = 0.0L;
    for (int i = 0; i < n; ++i) mean += points.at(i, d);
    mean /= n;
    long double var = 0.0L;
    for (int i = 0; i < n; ++i) {
      const long double diff = points.at(i, d) - mean;
      var += diff * diff;
    }
    const double v = std::max(static_cast<double>(var / n), kVarFloor);
    for (int c = 0; c < k; ++c) model.vars.at(c, d) = v;
  }

  if (diag) diag->log_likelihood_trace.clear();
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iter; ++iter) {
    const Matrix resp = gmm_posterior(model, points);
    const double ll = gmm_log_likelihood(model, points);
    if (diag) diag->log_likelihood_trace.push_back(ll);
    if (iter > 0 && ll - prev_ll < tol) break;
    prev_ll = ll;

    // M-step with soft counts.
    std::vector<long double> count(k, 0.0L);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) count[c] += resp.at(i, c);
    long double count_total = 0.0L;
    for (int c = 0; c < k; ++c) count_total += count[c];

    for (int c = 0; c < k; ++c) {
      model.weights[c] = static_cast<double>(count[c] / count_total);
      if (count[c] < 1e-12) continue;  // starved component keeps its params
      for (int d = 0; d < dim; ++d) {
        long double m = 0.0L;
        for (int i = 0; i < n; ++i) m += resp.at(i, c) * points.at(i, d);
        const double mean = static_cast<double>(m / count[c]);
        long double v = 0.0L;
        for (int i = 0; i < n; ++i) {
          const long double diff = points.at(i, d) - mean;
          v += resp.at(i, c) * diff * diff;
        }
        model.means.at(c, d) = mean;
        model.vars.at(c, d) = std::max(static_cast<double>(v / count[c]), kVarFloor);
      }
    }
  }
  return model;
}

}  // namespace ctxnorm
