#include "ctxnorm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ctxnorm/error.hpp"

namespace ctxnorm {

Batch affine_forward(const MlpLayer& layer, const Batch& x) {
  const int n = x.n, in = layer.in_dim(), out = layer.out_dim();
  if (x.c != in) fail("shape-mismatch", "layer input width mismatch");
  Batch y(n, out, 1, 1);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out; ++o) {
      const double* w = layer.weight.row(o);
      const double* xv = x.data.data() + static_cast<std::size_t>(i) * in;
      double acc = layer.bias[o];
      for (int j = 0; j < in; ++j) acc += w[j] * xv[j];
      y.data[static_cast<std::size_t>(i) * out + o] = acc;
    }
  return y;
}

namespace {

void affine_backward(const MlpLayer& layer, const Batch& x, const Batch& dy,
                     LayerGrads& grads, Batch& dx) {
  const int n = x.n, in = layer.in_dim(), out = layer.out_dim();
  grads.weight = Matrix(out, in);
  grads.bias.assign(out, 0.0);
  dx = Batch(n, in, 1, 1);

#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    double* wrow = grads.weight.row(o);
    long double db = 0.0L;
    for (int i = 0; i < n; ++i) {
      const double g = dy.data[static_cast<std::size_t>(i) * out + o];
      db += g;
      const double* xv = x.data.data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) wrow[j] += g * xv[j];
    }
    grads.bias[o] = static_cast<double>(db);
  }

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* g = dy.data.data() + static_cast<std::size_t>(i) * out;
    double* d = dx.data.data() + static_cast<std::size_t>(i) * in;
    for (int o = 0; o < out; ++o) {
      const double* w = layer.weight.row(o);
      for (int j = 0; j < in; ++j) d[j] += g[o] * w[j];
    }
  }
}

bool uses_contexts(const Mlp& model) {
  for (const MlpLayer& layer : model.layers)
    if (layer.norm == NormKind::kContext) return true;
  return false;
}

void check_labels(const std::vector<int>& labels, int n, int classes) {
  if (static_cast<int>(labels.size()) != n)
    fail("shape-mismatch", "one label per sample required");
  for (int y : labels)
    if (y < 0 || y >= classes) fail("bad-label", "label out of range");
}

// Mean cross-entropy; optionally the gradient wrt logits.
double softmax_ce(const Batch& logits, const std::vector<int>& labels, Batch* dlogits) {
  const int n = logits.n, classes = logits.c;
  if (dlogits) *dlogits = Batch(n, classes, 1, 1);
  long double total = 0.0L;
  for (int i = 0; i < n; ++i) {
    const double* z = logits.data.data() + static_cast<std::size_t>(i) * classes;
    double mx = z[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, z[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(z[c] - mx);
    const double logsum = mx + std::log(sum);
    total += logsum - z[labels[i]];
    if (dlogits) {
      double* d = dlogits->data.data() + static_cast<std::size_t>(i) * classes;
      for (int c = 0; c < classes; ++c) {
        const double p = std::exp(z[c] - logsum);
        d[c] = (p - (c == labels[i] ? 1.0 : 0.0)) / n;
      }
    }
  }
  return static_cast<double>(total / n);
}

}  // namespace

Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int classes,
             NormKind norm, const std::vector<double>& lambda, double eps,
             double alpha, std::uint64_t seed) {
  if (input_dim < 1) fail("bad-config", "input_dim must be >= 1");
  if (classes < 2) fail("bad-config", "classes must be >= 2");
  for (int h : hidden)
    if (h < 1) fail("bad-config", "hidden widths must be >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mlp model;
  model.class_count = classes;

  int in = input_dim;
  for (int h : hidden) {
    MlpLayer layer;
    layer.weight = Matrix(h, in);
    const double scale = std::sqrt(2.0 / in);
    for (double& w : layer.weight.v) w = scale * normal(rng);
    layer.bias.assign(h, 0.0);
    layer.norm = norm;
    if (norm != NormKind::kNone)
      layer.state = NormState::with_contexts(h, lambda, eps, alpha);
    layer.relu = true;
    model.layers.push_back(std::move(layer));
    in = h;
  }

  MlpLayer head;
  head.weight = Matrix(classes, in);
  const double scale = std::sqrt(2.0 / in);
  for (double& w : head.weight.v) w = scale * normal(rng);
  head.bias.assign(classes, 0.0);
  model.layers.push_back(std::move(head));
  return model;
}

std::pair<Batch, ModelCaches> model_forward(Mlp& model, const Batch& batch,
                                            const ContextAssignment* assignment,
                                            Mode mode) {
  if (model.layers.empty()) fail("bad-config", "model has no layers");
  if (batch.h != 1 || batch.w != 1)
    fail("shape-mismatch", "model input must be vector-shaped (H = W = 1)");
  if (batch.c != model.input_dim())
    fail("shape-mismatch", "input width does not match first layer");
  if (uses_contexts(model) && assignment == nullptr)
    fail("missing-contexts", "context assignment required by a context-norm layer");

  ModelCaches caches;
  caches.layers.resize(model.layers.size());
  Batch cur = batch;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    MlpLayer& layer = model.layers[l];
    LayerCache& cache = caches.layers[l];
    cache.input = cur;
    Batch z = affine_forward(layer, cur);
    switch (layer.norm) {
      case NormKind::kNone:
        break;
      case NormKind::kBatch: {
        auto [out, fc] = bn_forward(z, layer.state, mode);
        z = std::move(out);
        cache.norm_cache = std::move(fc);
        break;
      }
      case NormKind::kContext: {
        auto [out, fc] = sbn_forward(z, *assignment, layer.state, mode);
        z = std::move(out);
        cache.norm_cache = std::move(fc);
        break;
      }
      case NormKind::kLayer: {
        auto [out, gc] =
            ln_forward_cached(z, layer.state.gamma, layer.state.beta, layer.state.eps);
        z = std::move(out);
        cache.group_cache = std::move(gc);
        break;
      }
      case NormKind::kInstance: {
        auto [out, gc] =
            in_forward_cached(z, layer.state.gamma, layer.state.beta, layer.state.eps);
        z = std::move(out);
        cache.group_cache = std::move(gc);
        break;
      }
      case NormKind::kMixture: {
        if (layer.mixture.k() == 0)
          fail("bad-config", "mixture layer used before attaching a fitted mixture");
        auto [out, mc] = mn_forward(z, layer.mixture, layer.state, mode);
        z = std::move(out);
        cache.mix_cache = std::move(mc);
        break;
      }
    }
    if (layer.relu) {
      cache.pre_relu = z;
      for (double& v : z.data) v = std::max(v, 0.0);
    }
    cur = std::move(z);
  }
  return {std::move(cur), std::move(caches)};
}

std::pair<double, ModelGrads> loss_and_backprop(Mlp& model, const Batch& batch,
                                                const std::vector<int>& labels,
                                                const ContextAssignment* assignment) {
  check_labels(labels, batch.n, model.class_count);
  auto [logits, caches] = model_forward(model, batch, assignment, Mode::kTrain);

  Batch grad;
  const double loss = softmax_ce(logits, labels, &grad);

  ModelGrads grads;
  grads.layers.resize(model.layers.size());
  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    MlpLayer& layer = model.layers[l];
    LayerCache& cache = caches.layers[l];
    LayerGrads& lg = grads.layers[l];

    if (layer.relu) {
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (cache.pre_relu.data[i] <= 0.0) grad.data[i] = 0.0;
    }
    switch (layer.norm) {
      case NormKind::kNone:
        break;
      case NormKind::kBatch: {
        NormGrads ng = bn_backward(cache.norm_cache, grad, layer.state);
        lg.gamma = std::move(ng.gamma);
        lg.beta = std::move(ng.beta);
        grad = std::move(ng.input);
        break;
      }
      case NormKind::kContext: {
        NormGrads ng = sbn_backward(cache.norm_cache, grad, layer.state);
        lg.gamma = std::move(ng.gamma);
        lg.beta = std::move(ng.beta);
        grad = std::move(ng.input);
        break;
      }
      case NormKind::kLayer: {
        NormGrads ng = ln_backward(cache.group_cache, grad, layer.state.gamma);
        lg.gamma = std::move(ng.gamma);
        lg.beta = std::move(ng.beta);
        grad = std::move(ng.input);
        break;
      }
      case NormKind::kInstance: {
        NormGrads ng = in_backward(cache.group_cache, grad, layer.state.gamma);
        lg.gamma = std::move(ng.gamma);
        lg.beta = std::move(ng.beta);
        grad = std::move(ng.input);
        break;
      }
      case NormKind::kMixture: {
        NormGrads ng = mn_backward(cache.mix_cache, grad, layer.state);
        lg.gamma = std::move(ng.gamma);
        lg.beta = std::move(ng.beta);
        grad = std::move(ng.input);
        break;
      }
    }
    Batch dx;
    affine_backward(layer, cache.input, grad, lg, dx);
    grad = std::move(dx);
  }
  return {loss, std::move(grads)};
}

double model_loss(const Mlp& model, const Batch& batch, const std::vector<int>& labels,
                  const ContextAssignment* assignment) {
  Mlp copy = model;
  check_labels(labels, batch.n, copy.class_count);
  auto result = model_forward(copy, batch, assignment, Mode::kTrain);
  return softmax_ce(result.first, labels, nullptr);
}

double model_accuracy(Mlp& model, const Batch& batch, const std::vector<int>& labels,
                      const ContextAssignment* assignment) {
  check_labels(labels, batch.n, model.class_count);
  auto result = model_forward(model, batch, assignment, Mode::kEval);
  const Batch& logits = result.first;
  int hits = 0;
  const int classes = model.class_count;
  for (int i = 0; i < batch.n; ++i) {
    const double* z = logits.data.data() + static_cast<std::size_t>(i) * classes;
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (z[c] > z[best]) best = c;
    if (best == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / batch.n;
}

std::vector<ParamBlock> collect_param_blocks(Mlp& model) {
  std::vector<ParamBlock> blocks;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    MlpLayer& layer = model.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    blocks.push_back({prefix + "weight", layer.weight.v.data(), layer.weight.v.size(), true});
    blocks.push_back({prefix + "bias", layer.bias.data(), layer.bias.size(), true});
    if (layer.norm != NormKind::kNone) {
      blocks.push_back(
          {prefix + "gamma", layer.state.gamma.data(), layer.state.gamma.size(), false});
      blocks.push_back(
          {prefix + "beta", layer.state.beta.data(), layer.state.beta.size(), false});
    }
  }
  return blocks;
}

std::vector<std::vector<double>> flatten_grads(const Mlp& model, const ModelGrads& grads) {
  if (grads.layers.size() != model.layers.size())
    fail("shape-mismatch", "gradient layer count does not match model");
  std::vector<std::vector<double>> out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerGrads& lg = grads.layers[l];
    out.push_back(lg.weight.v);
    out.push_back(lg.bias);
    if (model.layers[l].norm != NormKind::kNone) {
      out.push_back(lg.gamma);
      out.push_back(lg.beta);
    }
  }
  return out;
}

void adamw_step(OptState& opt, const std::vector<ParamBlock>& params,
                const std::vector<std::vector<double>>& grads) {
  if (params.size() != grads.size())
    fail("shape-mismatch", "one gradient block per parameter block required");
  if (opt.m.empty()) {
    opt.m.resize(params.size());
    opt.v.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      opt.m[b].assign(params[b].len, 0.0);
      opt.v[b].assign(params[b].len, 0.0);
    }
  }
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

  for (std::size_t b = 0; b < params.size(); ++b) {
    if (grads[b].size() != params[b].len || opt.m[b].size() != params[b].len)
      fail("shape-mismatch", "gradient block size does not match parameters");
    double* p = params[b].data;
    const double* g = grads[b].data();
    for (std::size_t i = 0; i < params[b].len; ++i) {
      opt.m[b][i] = opt.beta1 * opt.m[b][i] + (1.0 - opt.beta1) * g[i];
      opt.v[b][i] = opt.beta2 * opt.v[b][i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double mhat = opt.m[b][i] / bc1;
      const double vhat = opt.v[b][i] / bc2;
      double delta = opt.lr * mhat / (std::sqrt(vhat) + opt.eps_opt);
      if (params[b].decay) delta += opt.lr * opt.weight_decay * p[i];
      p[i] -= delta;
    }
  }
}

GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  const std::vector<ParamBlock>& params,
                                  const std::vector<std::vector<double>>& analytic,
                                  double step, double tol) {
  if (!(step > 0.0)) fail("bad-config", "step must be > 0");
  if (params.size() != analytic.size())
    fail("shape-mismatch", "one analytic block per parameter block required");
  const double base1 = loss_fn();
  const double base2 = loss_fn();
  if (base1 != base2) fail("nondeterministic-loss", "loss function is not repeatable");

  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (analytic[b].size() != params[b].len)
      fail("shape-mismatch", "analytic block size does not match parameters");
    double* p = params[b].data;
    double scale = 1e-6;
    double max_err = 0.0;
    for (std::size_t i = 0; i < params[b].len; ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss_fn();
      p[i] = saved - step;
      const double down = loss_fn();
      p[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      scale = std::max({scale, std::abs(fd), std::abs(analytic[b][i])});
      max_err = std::max(max_err, std::abs(fd - analytic[b][i]));
    }
    GradCheckBlock block;
    block.name = params[b].name;
    block.max_rel = max_err / scale;
    block.ok = block.max_rel <= tol;
    report.worst = std::max(report.worst, block.max_rel);
    report.ok = report.ok && block.ok;
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace ctxnorm
