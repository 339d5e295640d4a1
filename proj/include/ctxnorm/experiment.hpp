#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ctxnorm/context.hpp"
#include "ctxnorm/data.hpp"
#include "ctxnorm/model.hpp"

namespace ctxnorm {

// Where the experiment's samples come from: an existing file when path is
// set, otherwise one of the generators with its parameters.
struct DataSpec {
  std::string path;
  std::string generator = "mixture";  // "mixture" | "domain-shift"
  int k_true = 4;
  int classes = 4;
  int n_per_context = 500;
  int dim = 16;
  double context_shift = 20.0;
  double class_margin = 3.0;
  int n_source = 500;  // per class
  int n_target = 500;  // per class
  double scale_shift = 3.0;
  double mean_shift = 5.0;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  DataSpec data;
  std::string context_source = "ground-truth";  // "ground-truth" | "labels" | "kmeans"
  int context_k = 4;                            // cluster count for "kmeans"
  std::vector<std::string> methods;             // subset of {bn, ln, in, mn, sbn}
  std::vector<int> hidden;
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double momentum_alpha = 0.9;
  double eps = 1e-5;
  std::vector<std::uint64_t> seeds;
};

ExperimentConfig config_from_json(const std::string& text);
DataSpec data_spec_from_json(const std::string& text);

// Raises "bad-config" naming the offending field.
void validate_config(const ExperimentConfig& cfg);

// Loads or generates; "domain-shift" yields the merged two-domain set.
Dataset realize_dataset(const DataSpec& spec);

struct EpochRow {
  std::string method;
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_loss = 0.0, train_acc = 0.0, eval_acc = 0.0;
};

struct FinalRow {
  std::string method;
  std::uint64_t seed = 0;
  double acc = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
};

struct MethodSummary {
  std::string method;
  double acc_mean = 0.0, acc_std = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
  double wall_s = 0.0;
};

struct MetricsReport {
  std::vector<EpochRow> rows;
  std::vector<FinalRow> finals;
  std::vector<std::pair<std::string, double>> wall;  // measured seconds per method
};

struct MacroMetrics {
  double acc = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
};

// Macro averages over a square class-by-class confusion matrix
// (rows = truth, cols = prediction); empty classes score 0.
MacroMetrics macro_metrics(const Matrix& confusion);

// 80/20-style split with per-class proportions preserved; deterministic in
// (dataset, seed).
struct SplitResult {
  std::vector<int> train_ids, eval_ids;
};
SplitResult stratified_split(const Dataset& ds, double eval_fraction, std::uint64_t seed);

Batch gather_features(const Dataset& ds, const std::vector<int>& ids);
std::vector<int> gather(const std::vector<int>& values, const std::vector<int>& ids);
ContextAssignment subset_assignment(const std::vector<int>& context_of,
                                    const std::vector<int>& ids, int k,
                                    const std::vector<double>& lambda);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
NormKind norm_kind_for(const std::string& method);

// Two-stage mixture setup: walks the net over the full training set,
// fitting one GMM per kMixture layer on that layer's pre-normalization
// activations, freezing it there and adopting its weights as lambda.
void attach_mixtures(Mlp& model, const Batch& train_features, int k, std::uint64_t seed);

// Everything one (method, seed) training run produces, with enough
// plumbing retained to evaluate the model on arbitrary subsets afterward.
struct RunArtifacts {
  Mlp model;
  std::vector<int> train_ids, eval_ids;
  std::vector<int> context_of;  // per dataset row
  int context_k = 1;
  std::vector<double> lambda;
  std::vector<EpochRow> rows;
  FinalRow final;
  double wall_s = 0.0;
};

RunArtifacts run_single_method(const Dataset& ds, const ExperimentConfig& cfg,
                               const std::string& method, std::uint64_t seed,
                               const std::function<void(const EpochRow&)>& on_row = {});

// Runs every (method, seed) pair. With a non-empty out_dir, rows.csv and
// finals.csv stream to disk as they are produced and summary.csv /
// timings.csv are written at the end.
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "");

struct CompareTable {
  std::string text;         // human-readable, includes measured wall time
  std::string summary_csv;  // deterministic: the wall_s column is zeroed
  std::vector<MethodSummary> summaries;
};

CompareTable compare_table(const MetricsReport& report);

// Rebuilds a report from a run directory's rows.csv and finals.csv.
MetricsReport report_from_dir(const std::string& dir);

}  // namespace ctxnorm
