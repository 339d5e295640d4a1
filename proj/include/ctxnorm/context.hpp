#pragma once

#include <cstdint>
#include <vector>

#include "ctxnorm/batch.hpp"

namespace ctxnorm {

// Per-sample context membership plus the dataset-level proportions lambda.
struct ContextAssignment {
  std::vector<int> indices;    // values in [0, context_count)
  int context_count = 1;
  std::vector<double> lambda;  // sums to 1, every entry > 0
};

struct KMeansModel {
  Matrix centroids;        // K rows of dimension D
  double inertia = 0.0;
  int iterations_run = 0;

  int k() const { return centroids.rows; }
  int dim() const { return centroids.cols; }
};

// Per-iteration inertia, for convergence checks.
struct KMeansDiag {
  std::vector<double> inertia_trace;
};

// Maps distinct label values to dense indices 0..K-1 in order of first
// appearance; lambda[k] = count_k / N.
ContextAssignment contexts_from_labels(const std::vector<int>& labels);

// lambda[k] = count_k / N over the given indices. Every context must be
// represented ("empty-context" otherwise).
std::vector<double> context_proportions(const std::vector<int>& indices, int context_count);

// Lloyd iterations from a k-means++ start (seeded). Stops when the largest
// centroid shift drops below tol or after max_iter iterations.
KMeansModel kmeans_fit(const Matrix& points, int k, int max_iter, double tol,
                       std::uint64_t seed, KMeansDiag* diag = nullptr);

// Nearest centroid per point, ties to the lowest index. No lambda computed.
std::vector<int> nearest_centroids(const KMeansModel& model, const Matrix& points);

// nearest_centroids plus proportions over these points.
ContextAssignment kmeans_assign(const KMeansModel& model, const Matrix& points);

}  // namespace ctxnorm
