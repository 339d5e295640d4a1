#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ctxnorm/batch.hpp"
#include "ctxnorm/context.hpp"
#include "ctxnorm/gmm.hpp"

namespace ctxnorm {

enum class Mode { kTrain, kEval };

// Learnable affine plus per-context running statistics for one
// normalization layer. K = 1 is plain batch normalization; K > 1 keeps an
// independent running mean/variance per context. alpha is the retention
// factor of the exponential update: new = alpha * old + (1 - alpha) * batch.
struct NormState {
  ChannelVector gamma, beta;
  double eps = 1e-5;
  double alpha = 0.9;
  std::vector<double> lambda;
  std::vector<ChannelVector> running_mean;
  std::vector<ChannelVector> running_var;
  std::int64_t batches_seen = 0;

  int k() const { return static_cast<int>(lambda.size()); }
  int channels() const { return static_cast<int>(gamma.size()); }

  static NormState single(int channels, double eps = 1e-5, double alpha = 0.9);
  static NormState with_contexts(int channels, std::vector<double> lambda,
                                 double eps = 1e-5, double alpha = 0.9);
};

// Captured during a groupwise forward pass (BN or per-context). xhat_pre
// holds the standardized activations including the 1/sqrt(lambda_k) factor,
// before gamma/beta. mean/var are the moments the forward actually used,
// one row per context; counts[k] is the number of batch samples in context
// k (0 for contexts absent from the batch).
struct ForwardCache {
  bool train = false;
  Batch xhat_pre;
  std::vector<int> context_of;
  Matrix mean, var;
  std::vector<int> counts;
  double eps = 0.0;
  std::vector<double> lambda;
};

struct NormGrads {
  Batch input;
  ChannelVector gamma;
  ChannelVector beta;
};

// Batch normalization over (N, H, W) per channel. Train mode normalizes
// with the current batch moments and folds them into the running stats;
// Eval normalizes with the running stats and mutates nothing. Requires a
// single-context state ("wrong-arity" otherwise).
std::pair<Batch, ForwardCache> bn_forward(const Batch& batch, NormState& state, Mode mode);

// Analytic gradient through a Train-mode bn_forward, treating the batch
// moments as functions of the input.
NormGrads bn_backward(const ForwardCache& cache, const Batch& grad_out,
                      const NormState& state);

// Per-sample / per-plane standardization cache for layer and instance norm.
struct GroupStdCache {
  Batch zhat;               // standardized values before the affine
  std::vector<double> inv;  // 1/sqrt(var + eps) per group
};

// Layer normalization: moments per sample over (C, H, W).
Batch ln_forward(const Batch& batch, const ChannelVector& gamma,
                 const ChannelVector& beta, double eps);
std::pair<Batch, GroupStdCache> ln_forward_cached(const Batch& batch,
                                                  const ChannelVector& gamma,
                                                  const ChannelVector& beta, double eps);
NormGrads ln_backward(const GroupStdCache& cache, const Batch& grad_out,
                      const ChannelVector& gamma);

// Instance normalization: moments per (sample, channel) over (H, W).
// H = W = 1 degenerates to constant output beta.
Batch in_forward(const Batch& batch, const ChannelVector& gamma,
                 const ChannelVector& beta, double eps);
std::pair<Batch, GroupStdCache> in_forward_cached(const Batch& batch,
                                                  const ChannelVector& gamma,
                                                  const ChannelVector& beta, double eps);
NormGrads in_backward(const GroupStdCache& cache, const Batch& grad_out,
                      const ChannelVector& gamma);

// Context-grouped batch normalization. Each sample is standardized with
// its own context's moments and scaled by 1/sqrt(lambda_k). Train uses the
// batch's per-context moments and updates that context's running stats;
// Eval uses the running stats. Contexts absent from the batch are skipped.
std::pair<Batch, ForwardCache> sbn_forward(const Batch& batch,
                                           const ContextAssignment& assignment,
                                           NormState& state, Mode mode);

// Eval-mode variant for unknown contexts: each sample aggregates all K
// context standardizations (from running stats) weighted by its posterior
// row. Rows must sum to 1 within 1e-6.
Batch sbn_forward_eval_unknown(const Batch& batch, const NormState& state,
                               const Matrix& posteriors);

NormGrads sbn_backward(const ForwardCache& cache, const Batch& grad_out,
                       const NormState& state);

// Mixture normalization cache. Unlike ForwardCache this keeps the raw
// input: the backward pass rebuilds each component's standardization from
// (input, mean, var) instead of storing K standardized copies.
struct MixtureCache {
  bool train = false;
  Batch input;
  Batch xhat_pre;
  Matrix resp;        // N x K responsibilities, treated as constants
  Matrix mean, var;   // K x C weighted moments the forward used
  std::vector<double> soft_count;  // per component, over samples and positions
  double eps = 0.0;
  std::vector<double> lambda;
};

// Mixture normalization: every sample aggregates all K component
// standardizations weighted by its GMM posterior. Posteriors are evaluated
// on each sample's spatially averaged channel vector. Train computes
// soft-count weighted moments from the batch and updates running stats;
// Eval uses running stats. state.lambda carries the component priors.
std::pair<Batch, MixtureCache> mn_forward(const Batch& batch, const GmmModel& gmm,
                                          NormState& state, Mode mode);

// Gradient through a Train-mode mn_forward with responsibilities held
// constant; exact in the one-hot limit where it matches sbn_backward.
NormGrads mn_backward(const MixtureCache& cache, const Batch& grad_out,
                      const NormState& state);

// Exponential running-stat update for context k; other contexts untouched.
// Callers maintain batches_seen.
void update_running(NormState& state, int k, const ChannelVector& mean,
                    const ChannelVector& var);

// Diagonal Gaussians from the running stats with priors lambda, for
// posterior computation when contexts are unknown at inference.
GmmModel gmm_from_running_stats(const NormState& state);

}  // namespace ctxnorm
