#include "ctxnorm/context.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "ctxnorm/error.hpp"

namespace ctxnorm {

namespace {

double sq_dist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

// k-means++ seeding: first centroid uniform, then proportional to the
// squared distance to the nearest chosen centroid.
Matrix seed_centroids(const Matrix& points, int k, std::mt19937_64& rng) {
  const int n = points.rows, dim = points.cols;
  Matrix centroids(k, dim);
  std::uniform_int_distribution<int> uniform(0, n - 1);
  int first = uniform(rng);
  std::copy_n(points.row(first), dim, centroids.row(0));

  std::vector<double> best(n, std::numeric_limits<double>::max());
  for (int chosen = 1; chosen < k; ++chosen) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(points.row(i), centroids.row(chosen - 1), dim));
      total += best[i];
    }
    int pick;
    if (total <= 0.0) {
      pick = uniform(rng);  // all remaining points coincide with a centroid
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += best[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(points.row(pick), dim, centroids.row(chosen));
  }
  return centroids;
}

}  // namespace

ContextAssignment contexts_from_labels(const std::vector<int>& labels) {
  if (labels.empty()) fail("empty-selection", "no labels given");
  ContextAssignment out;
  out.indices.reserve(labels.size());
  std::unordered_map<int, int> dense;
  for (int label : labels) {
    auto [it, inserted] = dense.try_emplace(label, static_cast<int>(dense.size()));
    out.indices.push_back(it->second);
  }
  out.context_count = static_cast<int>(dense.size());
  out.lambda = context_proportions(out.indices, out.context_count);
  return out;
}

std::vector<double> context_proportions(const std::vector<int>& indices, int context_count) {
  if (context_count < 1) fail("empty-context", "context count must be >= 1");
  std::vector<std::size_t> counts(context_count, 0);
  for (int idx : indices) {
    if (idx < 0 || idx >= context_count)
      fail("bad-context", "context index out of range");
    ++counts[idx];
  }
  std::vector<double> lambda(context_count);
  for (int k = 0; k < context_count; ++k) {
    if (counts[k] == 0)
      fail("empty-context", "context " + std::to_string(k) + " has no samples");
    lambda[k] = static_cast<double>(counts[k]) / static_cast<double>(indices.size());
  }
  return lambda;
}

KMeansModel kmeans_fit(const Matrix& points, int k, int max_iter, double tol,
                       std::uint64_t seed, KMeansDiag* diag) {
  const int n = points.rows, dim = points.cols;
  if (k < 1 || n < k) fail("too-few-points", "need at least k points (k >= 1)");
  if (max_iter < 1) fail("bad-config", "max_iter must be >= 1");
  if (tol < 0.0) fail("bad-config", "tol must be >= 0");

  std::mt19937_64 rng(seed);
  KMeansModel model;
  model.centroids = seed_centroids(points, k, rng);

  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  if (diag) diag->inertia_trace.clear();

  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step; each point is independent.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      int best_k = 0;
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points.row(i), model.centroids.row(c), dim);
        if (d < best) {
          best = d;
          best_k = c;
        }
      }
      assign[i] = best_k;
      dist[i] = best;
    }

    // Empty-cluster repair: hand the point farthest from its centroid to the
    // empty cluster, which keeps K stable.
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) ++counts[assign[i]];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int worst = -1;
      double worst_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;
        if (dist[i] > worst_d) {
          worst_d = dist[i];
          worst = i;
        }
      }
      if (worst < 0) fail("too-few-points", "cannot repair empty cluster");
      --counts[assign[worst]];
      assign[worst] = c;
      ++counts[c];
      std::copy_n(points.row(worst), dim, model.centroids.row(c));
      dist[worst] = 0.0;
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += dist[i];
    model.inertia = inertia;
    if (diag) diag->inertia_trace.push_back(inertia);
    model.iterations_run = iter + 1;

    // Update step (serial accumulation keeps the fit reproducible).
    Matrix next(k, dim);
    for (int i = 0; i < n; ++i) {
      const double* p = points.row(i);
      double* cr = next.row(assign[i]);
      for (int d = 0; d < dim; ++d) cr[d] += p[d];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      double* cr = next.row(c);
      for (int d = 0; d < dim; ++d) cr[d] /= counts[c];
      shift = std::max(shift, std::sqrt(sq_dist(cr, model.centroids.row(c), dim)));
    }
    model.centroids = std::move(next);
    if (shift < tol) break;
  }
  return model;
}

std::vector<int> nearest_centroids(const KMeansModel& model, const Matrix& points) {
  if (points.cols != model.dim())
    fail("shape-mismatch", "point dimension does not match centroid dimension");
  const int n = points.rows, k = model.k(), dim = model.dim();
  std::vector<int> assign(n, 0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::max();
    int best_k = 0;
    for (int c = 0; c < k; ++c) {
      const double d = sq_dist(points.row(i), model.centroids.row(c), dim);
      if (d < best) {
        best = d;
        best_k = c;
      }
    }
    assign[i] = best_k;
  }
  return assign;
}

ContextAssignment kmeans_assign(const KMeansModel& model, const Matrix& points) {
  ContextAssignment out;
  out.indices = nearest_centroids(model, points);
  out.context_count = model.k();
  out.lambda = context_proportions(out.indices, out.context_count);
  return out;
}

}  // namespace ctxnorm
