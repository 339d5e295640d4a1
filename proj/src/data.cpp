#include "ctxnorm/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

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

// Rejection-packs `count` points into [-box, box]^dim at pairwise distance
// >= min_dist: up to 1000 draws per point and 100 full restarts.
Matrix pack_points(int count, int dim, double box, double min_dist,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-box, box);
  const double min_sq = min_dist * min_dist;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix pts(count, dim);
    bool ok = true;
    for (int i = 0; i < count && ok; ++i) {
      bool placed = false;
      for (int trial = 0; trial < 1000 && !placed; ++trial) {
        for (int d = 0; d < dim; ++d) pts.at(i, d) = u(rng);
        placed = true;
        for (int j = 0; j < i; ++j)
          if (sq_dist(pts.row(i), pts.row(j), dim) < min_sq) {
            placed = false;
            break;
          }
      }
      ok = placed;
    }
    if (ok) return pts;
  }
  fail("packing-failed", "cannot place " + std::to_string(count) +
                             " points at the requested separation in " +
                             std::to_string(dim) + " dimensions");
}

}  // namespace

Dataset gen_mixture_classification(int k, int classes, int n_per_context, int dim,
                                   double context_shift, double class_margin,
                                   std::uint64_t seed) {
  if (k < 1 || classes < 1 || n_per_context < 1 || dim < 1)
    fail("bad-config", "counts must be >= 1");
  if (!(context_shift > 0.0) || !(class_margin > 0.0))
    fail("bad-config", "shift and margin must be > 0");

  std::mt19937_64 rng(seed);
  const Matrix centers = pack_points(k, dim, 5.0 * context_shift, context_shift, rng);

  // Independent class offsets per context: the heterogeneity under test.
  std::vector<Matrix> offsets;
  offsets.reserve(k);
  for (int g = 0; g < k; ++g)
    offsets.push_back(pack_points(classes, dim, 2.5 * class_margin, class_margin, rng));

  const int n = k * n_per_context;
  Dataset ds;
  ds.features = Matrix(n, dim);
  ds.class_labels.resize(n);
  ds.context_labels.resize(n);
  ds.classes = classes;
  ds.meta = {"mixture", k, seed};

  std::normal_distribution<double> noise(0.0, 1.0);
  int row = 0;
  for (int g = 0; g < k; ++g)
    for (int i = 0; i < n_per_context; ++i, ++row) {
      const int cls = i % classes;
      ds.class_labels[row] = cls;
      ds.context_labels[row] = g;
      for (int d = 0; d < dim; ++d)
        ds.features.at(row, d) =
            centers.at(g, d) + offsets[g].at(cls, d) + noise(rng);
    }
  return ds;
}

std::pair<Dataset, Dataset> gen_domain_shift(int classes, int n_source, int n_target,
                                             int dim, double scale_shift,
                                             double mean_shift, std::uint64_t seed) {
  if (classes < 1 || n_source < 1 || n_target < 1 || dim < 1)
    fail("bad-config", "counts must be >= 1");

  std::mt19937_64 rng(seed);
  // Means sit in a compact box so features stay O(1) per channel and the
  // affine domain shift is large relative to the class layout. The box
  // shrinks with dimension so typical pairwise distances stay near the
  // packing floor instead of growing with sqrt(dim).
  const double separation = 2.5;
  const double box = 1.4 * separation * std::sqrt(3.0 / (2.0 * dim));
  const Matrix class_means = pack_points(classes, dim, box, separation, rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto generate = [&](int per_class, bool target, int context) {
    const int n = per_class * classes;
    Dataset ds;
    ds.features = Matrix(n, dim);
    ds.class_labels.resize(n);
    ds.context_labels.assign(n, context);
    ds.classes = classes;
    ds.meta = {"domain-shift", 2, seed};
    int row = 0;
    for (int cls = 0; cls < classes; ++cls)
      for (int i = 0; i < per_class; ++i, ++row) {
        ds.class_labels[row] = cls;
        for (int d = 0; d < dim; ++d) {
          const double x = class_means.at(cls, d) + noise(rng);
          ds.features.at(row, d) = target ? scale_shift * x + mean_shift : x;
        }
      }
    return ds;
  };

  Dataset source = generate(n_source, false, 0);
  Dataset target = generate(n_target, true, 1);
  return {std::move(source), std::move(target)};
}

Dataset merge_domains(const Dataset& source, const Dataset& target) {
  if (source.dim() != target.dim() || source.classes != target.classes)
    fail("shape-mismatch", "domains disagree on dimension or class count");
  if (!source.has_contexts() || !target.has_contexts())
    fail("missing-contexts", "both domains need context labels to merge");

  Dataset out;
  const int n = source.n() + target.n();
  out.features = Matrix(n, source.dim());
  std::copy(source.features.v.begin(), source.features.v.end(), out.features.v.begin());
  std::copy(target.features.v.begin(), target.features.v.end(),
            out.features.v.begin() + source.features.v.size());
  out.class_labels = source.class_labels;
  out.class_labels.insert(out.class_labels.end(), target.class_labels.begin(),
                          target.class_labels.end());
  out.context_labels = source.context_labels;
  out.context_labels.insert(out.context_labels.end(), target.context_labels.begin(),
                            target.context_labels.end());
  out.classes = source.classes;
  out.meta = source.meta;
  return out;
}

}  // namespace ctxnorm
