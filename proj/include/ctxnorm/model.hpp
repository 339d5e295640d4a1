#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ctxnorm/batch.hpp"
#include "ctxnorm/norm.hpp"

namespace ctxnorm {

enum class NormKind { kNone, kBatch, kLayer, kInstance, kMixture, kContext };

// One block: affine (out x in), optional normalization, optional ReLU.
// state holds gamma/beta for every normalized kind; running stats are only
// meaningful for kBatch/kMixture/kContext. mixture is the frozen GMM an
// kMixture layer normalizes against, attached after fitting.
struct MlpLayer {
  Matrix weight;
  ChannelVector bias;
  NormKind norm = NormKind::kNone;
  NormState state;
  GmmModel mixture;
  bool relu = false;

  int in_dim() const { return weight.cols; }
  int out_dim() const { return weight.rows; }
};

struct Mlp {
  std::vector<MlpLayer> layers;
  int class_count = 0;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
};

// Hidden layers get (affine, norm, ReLU); the output layer is a bare
// affine down to `classes`. Weights are He-initialized from the seed,
// biases zero, gamma 1, beta 0. lambda sets the context count of every
// normalized layer ({1} for the single-context kinds).
Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int classes,
             NormKind norm, const std::vector<double>& lambda, double eps,
             double alpha, std::uint64_t seed);

// One layer's affine map: y = W x + b on (N, in_dim, 1, 1) inputs.
Batch affine_forward(const MlpLayer& layer, const Batch& x);

struct LayerCache {
  Batch input;       // what the affine consumed
  Batch pre_relu;    // post-norm activation before ReLU
  ForwardCache norm_cache;
  GroupStdCache group_cache;
  MixtureCache mix_cache;
};

struct ModelCaches {
  std::vector<LayerCache> layers;
};

// Logits as an (N, classes, 1, 1) batch. The assignment is required when
// any layer is kContext and ignored otherwise. Train mode updates running
// stats and fills caches for the backward pass.
std::pair<Batch, ModelCaches> model_forward(Mlp& model, const Batch& batch,
                                            const ContextAssignment* assignment,
                                            Mode mode);

struct LayerGrads {
  Matrix weight;
  ChannelVector bias;
  ChannelVector gamma;
  ChannelVector beta;
};

struct ModelGrads {
  std::vector<LayerGrads> layers;
};

// Mean softmax cross-entropy over the batch plus gradients for every
// parameter. Weight decay is the optimizer's job, not the loss.
std::pair<double, ModelGrads> loss_and_backprop(Mlp& model, const Batch& batch,
                                                const std::vector<int>& labels,
                                                const ContextAssignment* assignment);

// Loss only, on a throwaway copy of the model: repeated calls see
// identical running stats, which keeps finite differencing honest.
double model_loss(const Mlp& model, const Batch& batch, const std::vector<int>& labels,
                  const ContextAssignment* assignment);

// Accuracy of argmax(logits) in Eval mode (known contexts when given).
double model_accuracy(Mlp& model, const Batch& batch, const std::vector<int>& labels,
                      const ContextAssignment* assignment);

// A view into one parameter block of a model, in optimizer order.
struct ParamBlock {
  std::string name;
  double* data = nullptr;
  std::size_t len = 0;
  bool decay = false;  // gamma/beta are never decayed
};

std::vector<ParamBlock> collect_param_blocks(Mlp& model);

// Gradients flattened to match collect_param_blocks order.
std::vector<std::vector<double>> flatten_grads(const Mlp& model, const ModelGrads& grads);

struct OptState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m, v;  // sized on first use
};

// Decoupled-weight-decay adaptive step with bias correction. Decay applies
// only to blocks flagged for it.
void adamw_step(OptState& opt, const std::vector<ParamBlock>& params,
                const std::vector<std::vector<double>>& grads);

struct GradCheckBlock {
  std::string name;
  double max_rel = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double worst = 0.0;
  bool ok = true;
};

// Central-difference audit of analytic gradients. Per block, the reported
// error is max_i |fd_i - analytic_i| scaled by the largest gradient
// magnitude seen in that block (floored at 1e-6). loss_fn must be a pure
// function of the referenced parameters; two baseline evaluations guard
// against hidden state ("nondeterministic-loss").
GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  const std::vector<ParamBlock>& params,
                                  const std::vector<std::vector<double>>& analytic,
                                  double step, double tol);

}  // namespace ctxnorm
