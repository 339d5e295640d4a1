#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxnorm/batch.hpp"

namespace ctxnorm {

struct DatasetMeta {
  std::string generator;
  int k_true = 1;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix features;                  // N x D
  std::vector<int> class_labels;    // N, dense in [0, classes)
  std::vector<int> context_labels;  // N ground-truth contexts, empty if unknown
  int classes = 0;
  DatasetMeta meta;

  int n() const { return features.rows; }
  int dim() const { return features.cols; }
  bool has_contexts() const { return !context_labels.empty(); }
};

// K context centers at pairwise distance >= context_shift; within each
// context the class means sit at pairwise distance >= class_margin; unit
// isotropic noise. The same class therefore has different statistics in
// different contexts. n_per_context samples per context, classes assigned
// round-robin.
Dataset gen_mixture_classification(int k, int classes, int n_per_context, int dim,
                                   double context_shift, double class_margin,
                                   std::uint64_t seed);

// Two domains sharing class-conditional structure; the target domain is
// the source transformed by x -> scale_shift * x + mean_shift. n_source
// and n_target are per-class sample counts, so class proportions match
// across domains exactly. Context labels carry the domain id (0 source,
// 1 target).
std::pair<Dataset, Dataset> gen_domain_shift(int classes, int n_source, int n_target,
                                             int dim, double scale_shift,
                                             double mean_shift, std::uint64_t seed);

// Concatenation of two compatible datasets, keeping their context labels.
Dataset merge_domains(const Dataset& source, const Dataset& target);

// Single-document JSON with a mandatory version field; lossless at double
// precision.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ctxnorm
