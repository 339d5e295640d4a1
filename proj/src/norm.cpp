#include "ctxnorm/norm.hpp"

#include <algorithm>
#include <cmath>

#include "ctxnorm/error.hpp"
#include "ctxnorm/kernels.hpp"

namespace ctxnorm {

namespace {

void check_state(const NormState& state, int channels) {
  const int c = state.channels();
  const int k = state.k();
  if (c != channels || static_cast<int>(state.beta.size()) != c)
    fail("shape-mismatch", "state channel width does not match batch");
  if (!(state.eps > 0.0)) fail("bad-epsilon", "eps must be > 0");
  if (state.alpha < 0.0 || state.alpha >= 1.0)
    fail("bad-config", "alpha must be in [0,1)");
  if (k < 1 || static_cast<int>(state.running_mean.size()) != k ||
      static_cast<int>(state.running_var.size()) != k)
    fail("shape-mismatch", "running stats do not match context count");
  for (int i = 0; i < k; ++i)
    if (static_cast<int>(state.running_mean[i].size()) != c ||
        static_cast<int>(state.running_var[i].size()) != c)
      fail("shape-mismatch", "running stats do not match channel width");
}

std::vector<double> inverse_scales(const std::vector<double>& lambda) {
  std::vector<double> s(lambda.size());
  for (std::size_t k = 0; k < lambda.size(); ++k) s[k] = 1.0 / std::sqrt(lambda[k]);
  return s;
}

// Moments per context actually used by a forward pass, as K x C matrices.
struct GroupStats {
  Matrix mean, var;
  std::vector<int> counts;
};

GroupStats train_group_stats(const Batch& batch, const std::vector<int>& context_of,
                             NormState& state) {
  const int k = state.k(), c = batch.c;
  GroupStats gs{Matrix(k, c), Matrix(k, c), std::vector<int>(k, 0)};
  std::vector<std::vector<int>> groups(k);
  for (int n = 0; n < batch.n; ++n) groups[context_of[n]].push_back(n);
  for (int g = 0; g < k; ++g) {
    gs.counts[g] = static_cast<int>(groups[g].size());
    if (groups[g].empty()) {
      for (int ch = 0; ch < c; ++ch) {
        gs.mean.at(g, ch) = 0.0;
        gs.var.at(g, ch) = 1.0;
      }
      continue;
    }
    const Moments mo = group_channel_moments(batch, groups[g]);
    for (int ch = 0; ch < c; ++ch) {
      gs.mean.at(g, ch) = mo.mean[ch];
      gs.var.at(g, ch) = mo.var[ch];
    }
    update_running(state, g, mo.mean, mo.var);
  }
  return gs;
}

GroupStats running_group_stats(const Batch& batch, const std::vector<int>& context_of,
                               const NormState& state) {
  const int k = state.k(), c = batch.c;
  GroupStats gs{Matrix(k, c), Matrix(k, c), std::vector<int>(k, 0)};
  for (int n = 0; n < batch.n; ++n) ++gs.counts[context_of[n]];
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch) {
      gs.mean.at(g, ch) = state.running_mean[g][ch];
      gs.var.at(g, ch) = state.running_var[g][ch];
    }
  return gs;
}

// xhat[n,c,h,w] = (x - mean[k,c]) * inv[k,c] * scale[k], k = context_of[n].
Batch group_standardize(const Batch& batch, const std::vector<int>& context_of,
                        const GroupStats& gs, const std::vector<double>& scale,
                        double eps) {
  const int k = gs.mean.rows, c = batch.c;
  Matrix inv(k, c);
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch) inv.at(g, ch) = 1.0 / std::sqrt(gs.var.at(g, ch) + eps);

  Batch out(batch.n, batch.c, batch.h, batch.w);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch.n; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const int g = context_of[n];
      const double m = gs.mean.at(g, ch), iv = inv.at(g, ch), s = scale[g];
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw)
          out.at(n, ch, ih, iw) = s * ((batch.at(n, ch, ih, iw) - m) * iv);
    }
  return out;
}

// Shared BN/SBN backward: each context group is an independent
// standardization gradient over its members, with the constant
// 1/sqrt(lambda_k) folded into the upstream factor.
NormGrads groupwise_backward(const ForwardCache& cache, const Batch& grad_out,
                             const NormState& state) {
  if (!cache.train) fail("bad-cache", "backward needs a Train-mode cache");
  if (!grad_out.same_shape(cache.xhat_pre))
    fail("shape-mismatch", "gradient shape does not match forward shape");
  grad_out.require_finite();
  const int n = grad_out.n, c = grad_out.c;
  const int k = static_cast<int>(cache.lambda.size());
  if (state.channels() != c) fail("shape-mismatch", "state width mismatch");

  NormGrads out;
  out.input = Batch(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  out.gamma.assign(c, 0.0);
  out.beta.assign(c, 0.0);

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    long double dg = 0.0L, db = 0.0L;
    for (int in = 0; in < n; ++in)
      for (int ih = 0; ih < grad_out.h; ++ih)
        for (int iw = 0; iw < grad_out.w; ++iw) {
          const double g = grad_out.at(in, ch, ih, iw);
          dg += g * cache.xhat_pre.at(in, ch, ih, iw);
          db += g;
        }
    out.gamma[ch] = static_cast<double>(dg);
    out.beta[ch] = static_cast<double>(db);
  }

  std::vector<std::vector<int>> groups(k);
  for (int in = 0; in < n; ++in) groups[cache.context_of[in]].push_back(in);

  for (int g = 0; g < k; ++g) {
    if (groups[g].empty()) continue;
    const double s = 1.0 / std::sqrt(cache.lambda[g]);
    const double root_lambda = std::sqrt(cache.lambda[g]);
    const double m = static_cast<double>(groups[g].size()) * grad_out.spatial();
    const std::vector<int>& members = groups[g];

#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
      const double inv = 1.0 / std::sqrt(cache.var.at(g, ch) + cache.eps);
      long double sum_g = 0.0L, sum_gz = 0.0L;
      for (int in : members)
        for (int ih = 0; ih < grad_out.h; ++ih)
          for (int iw = 0; iw < grad_out.w; ++iw) {
            const double gv = grad_out.at(in, ch, ih, iw);
            const double z = cache.xhat_pre.at(in, ch, ih, iw) * root_lambda;
            sum_g += gv;
            sum_gz += gv * z;
          }
      const double mean_g = static_cast<double>(sum_g / m);
      const double mean_gz = static_cast<double>(sum_gz / m);
      const double coeff = state.gamma[ch] * s * inv;
      for (int in : members)
        for (int ih = 0; ih < grad_out.h; ++ih)
          for (int iw = 0; iw < grad_out.w; ++iw) {
            const double gv = grad_out.at(in, ch, ih, iw);
            const double z = cache.xhat_pre.at(in, ch, ih, iw) * root_lambda;
            out.input.at(in, ch, ih, iw) = coeff * (gv - mean_g - z * mean_gz);
          }
    }
  }
  return out;
}

}  // namespace

NormState NormState::single(int channels, double eps, double alpha) {
  return with_contexts(channels, {1.0}, eps, alpha);
}

NormState NormState::with_contexts(int channels, std::vector<double> lambda,
                                   double eps, double alpha) {
  if (channels < 1) fail("shape-mismatch", "channels must be >= 1");
  if (!(eps > 0.0)) fail("bad-epsilon", "eps must be > 0");
  if (alpha < 0.0 || alpha >= 1.0) fail("bad-config", "alpha must be in [0,1)");
  if (lambda.empty()) fail("bad-config", "lambda must be non-empty");
  double sum = 0.0;
  for (double l : lambda) {
    if (!(l > 0.0)) fail("bad-config", "lambda entries must be > 0");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("bad-config", "lambda must sum to 1");

  NormState state;
  state.gamma.assign(channels, 1.0);
  state.beta.assign(channels, 0.0);
  state.eps = eps;
  state.alpha = alpha;
  const int k = static_cast<int>(lambda.size());
  state.lambda = std::move(lambda);
  state.running_mean.assign(k, ChannelVector(channels, 0.0));
  state.running_var.assign(k, ChannelVector(channels, 1.0));
  return state;
}

void update_running(NormState& state, int k, const ChannelVector& mean,
                    const ChannelVector& var) {
  if (k < 0 || k >= state.k()) fail("bad-context", "context index out of range");
  const int c = state.channels();
  if (static_cast<int>(mean.size()) != c || static_cast<int>(var.size()) != c)
    fail("shape-mismatch", "moment width does not match state");
  const double a = state.alpha;
  for (int ch = 0; ch < c; ++ch) {
    state.running_mean[k][ch] = a * state.running_mean[k][ch] + (1.0 - a) * mean[ch];
    state.running_var[k][ch] = a * state.running_var[k][ch] + (1.0 - a) * var[ch];
  }
}

std::pair<Batch, ForwardCache> bn_forward(const Batch& batch, NormState& state, Mode mode) {
  check_state(state, batch.c);
  if (state.k() != 1) fail("wrong-arity", "plain batch norm needs a single context");
  batch.require_finite();

  ChannelVector mean, var;
  if (mode == Mode::kTrain) {
    Moments mo = channel_moments(batch);
    mean = std::move(mo.mean);
    var = std::move(mo.var);
    update_running(state, 0, mean, var);
    ++state.batches_seen;
  } else {
    mean = state.running_mean[0];
    var = state.running_var[0];
  }

  Batch xhat = standardize(batch, mean, var, state.eps);
  Batch out = affine(xhat, state.gamma, state.beta);

  ForwardCache cache;
  cache.train = (mode == Mode::kTrain);
  cache.xhat_pre = std::move(xhat);
  cache.context_of.assign(batch.n, 0);
  cache.mean = Matrix(1, batch.c, std::move(mean));
  cache.var = Matrix(1, batch.c, std::move(var));
  cache.counts = {batch.n};
  cache.eps = state.eps;
  cache.lambda = state.lambda;
  return {std::move(out), std::move(cache)};
}

NormGrads bn_backward(const ForwardCache& cache, const Batch& grad_out,
                      const NormState& state) {
  return groupwise_backward(cache, grad_out, state);
}

std::pair<Batch, ForwardCache> sbn_forward(const Batch& batch,
                                           const ContextAssignment& assignment,
                                           NormState& state, Mode mode) {
  check_state(state, batch.c);
  if (assignment.context_count != state.k())
    fail("wrong-arity", "assignment context count does not match state");
  if (static_cast<int>(assignment.indices.size()) != batch.n)
    fail("shape-mismatch", "assignment does not cover the batch");
  for (int idx : assignment.indices)
    if (idx < 0 || idx >= state.k()) fail("bad-context", "context index out of range");
  batch.require_finite();

  GroupStats gs = (mode == Mode::kTrain)
                      ? train_group_stats(batch, assignment.indices, state)
                      : running_group_stats(batch, assignment.indices, state);
  if (mode == Mode::kTrain) ++state.batches_seen;

  Batch xhat = group_standardize(batch, assignment.indices, gs,
                                 inverse_scales(state.lambda), state.eps);
  Batch out = affine(xhat, state.gamma, state.beta);

  ForwardCache cache;
  cache.train = (mode == Mode::kTrain);
  cache.xhat_pre = std::move(xhat);
  cache.context_of = assignment.indices;
  cache.mean = std::move(gs.mean);
  cache.var = std::move(gs.var);
  cache.counts = std::move(gs.counts);
  cache.eps = state.eps;
  cache.lambda = state.lambda;
  return {std::move(out), std::move(cache)};
}

NormGrads sbn_backward(const ForwardCache& cache, const Batch& grad_out,
                       const NormState& state) {
  return groupwise_backward(cache, grad_out, state);
}

Batch sbn_forward_eval_unknown(const Batch& batch, const NormState& state,
                               const Matrix& posteriors) {
  check_state(state, batch.c);
  if (posteriors.rows != batch.n)
    fail("shape-mismatch", "one posterior row per sample required");
  if (posteriors.cols != state.k())
    fail("wrong-arity", "posterior width does not match context count");
  batch.require_finite();
  const int k = state.k(), c = batch.c;
  for (int in = 0; in < batch.n; ++in) {
    double sum = 0.0;
    for (int g = 0; g < k; ++g) sum += posteriors.at(in, g);
    if (std::abs(sum - 1.0) > 1e-6) fail("bad-posterior", "posterior row must sum to 1");
  }

  const std::vector<double> scale = inverse_scales(state.lambda);
  Matrix inv(k, c);
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch)
      inv.at(g, ch) = 1.0 / std::sqrt(state.running_var[g][ch] + state.eps);

  Batch agg(batch.n, batch.c, batch.h, batch.w);
#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < batch.n; ++in)
    for (int ch = 0; ch < c; ++ch)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw) {
          double acc = 0.0;
          for (int g = 0; g < k; ++g)
            acc += posteriors.at(in, g) *
                   (scale[g] * ((batch.at(in, ch, ih, iw) - state.running_mean[g][ch]) *
                                inv.at(g, ch)));
          agg.at(in, ch, ih, iw) = acc;
        }
  return affine(agg, state.gamma, state.beta);
}

Batch ln_forward(const Batch& batch, const ChannelVector& gamma,
                 const ChannelVector& beta, double eps) {
  return ln_forward_cached(batch, gamma, beta, eps).first;
}

std::pair<Batch, GroupStdCache> ln_forward_cached(const Batch& batch,
                                                  const ChannelVector& gamma,
                                                  const ChannelVector& beta, double eps) {
  if (static_cast<int>(gamma.size()) != batch.c ||
      static_cast<int>(beta.size()) != batch.c)
    fail("shape-mismatch", "gamma/beta width does not match batch");
  if (!(eps > 0.0)) fail("bad-epsilon", "eps must be > 0");
  batch.require_finite();

  const int n = batch.n;
  const std::size_t stride = batch.size() / std::max(n, 1);
  GroupStdCache cache;
  cache.zhat = Batch(batch.n, batch.c, batch.h, batch.w);
  cache.inv.assign(n, 0.0);
  Batch out(batch.n, batch.c, batch.h, batch.w);

#pragma omp parallel for schedule(static)
  for (int in = 0; in < n; ++in) {
    const double* x = batch.data.data() + in * stride;
    long double sum = 0.0L;
    for (std::size_t i = 0; i < stride; ++i) sum += x[i];
    const double mean = static_cast<double>(sum / stride);
    long double sq = 0.0L;
    for (std::size_t i = 0; i < stride; ++i) {
      const long double diff = x[i] - mean;
      sq += diff * diff;
    }
    const double var = static_cast<double>(sq / stride);
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv[in] = inv;

    double* z = cache.zhat.data.data() + in * stride;
    double* y = out.data.data() + in * stride;
    const std::size_t plane = static_cast<std::size_t>(batch.h) * batch.w;
    for (std::size_t i = 0; i < stride; ++i) {
      z[i] = (x[i] - mean) * inv;
      const int ch = static_cast<int>(i / plane);
      y[i] = gamma[ch] * z[i] + beta[ch];
    }
  }
  return {std::move(out), std::move(cache)};
}

NormGrads ln_backward(const GroupStdCache& cache, const Batch& grad_out,
                      const ChannelVector& gamma) {
  if (!grad_out.same_shape(cache.zhat))
    fail("shape-mismatch", "gradient shape does not match forward shape");
  grad_out.require_finite();
  const int n = grad_out.n, c = grad_out.c;
  const std::size_t stride = grad_out.size() / std::max(n, 1);
  const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;

  NormGrads out;
  out.input = Batch(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  out.gamma.assign(c, 0.0);
  out.beta.assign(c, 0.0);

#pragma omp parallel for schedule(static)
  for (int in = 0; in < n; ++in) {
    const double* g = grad_out.data.data() + in * stride;
    const double* z = cache.zhat.data.data() + in * stride;
    double* dx = out.input.data.data() + in * stride;
    long double sum_g = 0.0L, sum_gz = 0.0L;
    for (std::size_t i = 0; i < stride; ++i) {
      const double gh = g[i] * gamma[i / plane];
      sum_g += gh;
      sum_gz += gh * z[i];
    }
    const double mean_g = static_cast<double>(sum_g / stride);
    const double mean_gz = static_cast<double>(sum_gz / stride);
    for (std::size_t i = 0; i < stride; ++i) {
      const double gh = g[i] * gamma[i / plane];
      dx[i] = cache.inv[in] * (gh - mean_g - z[i] * mean_gz);
    }
  }

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    long double dg = 0.0L, db = 0.0L;
    for (int in = 0; in < n; ++in)
      for (int ih = 0; ih < grad_out.h; ++ih)
        for (int iw = 0; iw < grad_out.w; ++iw) {
          const double gv = grad_out.at(in, ch, ih, iw);
          dg += gv * cache.zhat.at(in, ch, ih, iw);
          db += gv;
        }
    out.gamma[ch] = static_cast<double>(dg);
    out.beta[ch] = static_cast<double>(db);
  }
  return out;
}

Batch in_forward(const Batch& batch, const ChannelVector& gamma,
                 const ChannelVector& beta, double eps) {
  return in_forward_cached(batch, gamma, beta, eps).first;
}

std::pair<Batch, GroupStdCache> in_forward_cached(const Batch& batch,
                                                  const ChannelVector& gamma,
                                                  const ChannelVector& beta, double eps) {
  if (static_cast<int>(gamma.size()) != batch.c ||
      static_cast<int>(beta.size()) != batch.c)
    fail("shape-mismatch", "gamma/beta width does not match batch");
  if (!(eps > 0.0)) fail("bad-epsilon", "eps must be > 0");
  batch.require_finite();

  const int n = batch.n, c = batch.c;
  const std::size_t plane = static_cast<std::size_t>(batch.h) * batch.w;
  GroupStdCache cache;
  cache.zhat = Batch(batch.n, batch.c, batch.h, batch.w);
  cache.inv.assign(static_cast<std::size_t>(n) * c, 0.0);
  Batch out(batch.n, batch.c, batch.h, batch.w);

#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(in) * c + ch) * plane;
      const double* x = batch.data.data() + base;
      long double sum = 0.0L;
      for (std::size_t i = 0; i < plane; ++i) sum += x[i];
      const double mean = static_cast<double>(sum / plane);
      long double sq = 0.0L;
      for (std::size_t i = 0; i < plane; ++i) {
        const long double diff = x[i] - mean;
        sq += diff * diff;
      }
      const double var = static_cast<double>(sq / plane);
      const double inv = 1.0 / std::sqrt(var + eps);
      cache.inv[static_cast<std::size_t>(in) * c + ch] = inv;

      double* z = cache.zhat.data.data() + base;
      double* y = out.data.data() + base;
      for (std::size_t i = 0; i < plane; ++i) {
        z[i] = (x[i] - mean) * inv;
        y[i] = gamma[ch] * z[i] + beta[ch];
      }
    }
  return {std::move(out), std::move(cache)};
}

NormGrads in_backward(const GroupStdCache& cache, const Batch& grad_out,
                      const ChannelVector& gamma) {
  if (!grad_out.same_shape(cache.zhat))
    fail("shape-mismatch", "gradient shape does not match forward shape");
  grad_out.require_finite();
  const int n = grad_out.n, c = grad_out.c;
  const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;

  NormGrads out;
  out.input = Batch(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  out.gamma.assign(c, 0.0);
  out.beta.assign(c, 0.0);

#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(in) * c + ch) * plane;
      const double* g = grad_out.data.data() + base;
      const double* z = cache.zhat.data.data() + base;
      double* dx = out.input.data.data() + base;
      const double inv = cache.inv[static_cast<std::size_t>(in) * c + ch];
      long double sum_g = 0.0L, sum_gz = 0.0L;
      for (std::size_t i = 0; i < plane; ++i) {
        const double gh = g[i] * gamma[ch];
        sum_g += gh;
        sum_gz += gh * z[i];
      }
      const double mean_g = static_cast<double>(sum_g / plane);
      const double mean_gz = static_cast<double>(sum_gz / plane);
      for (std::size_t i = 0; i < plane; ++i) {
        const double gh = g[i] * gamma[ch];
        dx[i] = inv * (gh - mean_g - z[i] * mean_gz);
      }
    }

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    long double dg = 0.0L, db = 0.0L;
    for (int in = 0; in < n; ++in)
      for (int ih = 0; ih < grad_out.h; ++ih)
        for (int iw = 0; iw < grad_out.w; ++iw) {
          const double gv = grad_out.at(in, ch, ih, iw);
          dg += gv * cache.zhat.at(in, ch, ih, iw);
          db += gv;
        }
    out.gamma[ch] = static_cast<double>(dg);
    out.beta[ch] = static_cast<double>(db);
  }
  return out;
}

namespace {

// One posterior evaluation point per sample: the channel vector averaged
// over spatial positions (the identity when H = W = 1).
Matrix posterior_points(const Batch& batch) {
  Matrix pts(batch.n, batch.c);
  const double spatial = batch.spatial();
#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < batch.n; ++in)
    for (int ch = 0; ch < batch.c; ++ch) {
      long double sum = 0.0L;
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw) sum += batch.at(in, ch, ih, iw);
      pts.at(in, ch) = static_cast<double>(sum / spatial);
    }
  return pts;
}

}  // namespace

std::pair<Batch, MixtureCache> mn_forward(const Batch& batch, const GmmModel& gmm,
                                          NormState& state, Mode mode) {
  check_state(state, batch.c);
  if (gmm.k() != state.k()) fail("wrong-arity", "mixture size does not match state");
  if (gmm.dim() != batch.c) fail("shape-mismatch", "mixture dimension does not match batch");
  batch.require_finite();

  const int n = batch.n, c = batch.c, k = state.k();
  const int spatial = batch.spatial();
  Matrix resp = gmm_posterior(gmm, posterior_points(batch));

  Matrix mean(k, c), var(k, c);
  std::vector<double> soft_count(k, 0.0);
  if (mode == Mode::kTrain) {
    for (int g = 0; g < k; ++g) {
      long double count = 0.0L;
      for (int in = 0; in < n; ++in) count += resp.at(in, g);
      soft_count[g] = static_cast<double>(count) * spatial;
      if (soft_count[g] < 1e-12) {
        // Starved component: responsibilities are ~0 everywhere, so the
        // identity stats contribute nothing; skip the running update.
        for (int ch = 0; ch < c; ++ch) {
          mean.at(g, ch) = 0.0;
          var.at(g, ch) = 1.0;
        }
        continue;
      }
#pragma omp parallel for schedule(static)
      for (int ch = 0; ch < c; ++ch) {
        long double wsum = 0.0L;
        for (int in = 0; in < n; ++in) {
          const double r = resp.at(in, g);
          for (int ih = 0; ih < batch.h; ++ih)
            for (int iw = 0; iw < batch.w; ++iw) wsum += r * batch.at(in, ch, ih, iw);
        }
        const double m = static_cast<double>(wsum / soft_count[g]);
        long double vsum = 0.0L;
        for (int in = 0; in < n; ++in) {
          const double r = resp.at(in, g);
          for (int ih = 0; ih < batch.h; ++ih)
            for (int iw = 0; iw < batch.w; ++iw) {
              const long double diff = batch.at(in, ch, ih, iw) - m;
              vsum += r * diff * diff;
            }
        }
        mean.at(g, ch) = m;
        var.at(g, ch) = static_cast<double>(vsum / soft_count[g]);
      }
      ChannelVector mrow(mean.row(g), mean.row(g) + c);
      ChannelVector vrow(var.row(g), var.row(g) + c);
      update_running(state, g, mrow, vrow);
    }
    ++state.batches_seen;
  } else {
    for (int g = 0; g < k; ++g)
      for (int ch = 0; ch < c; ++ch) {
        mean.at(g, ch) = state.running_mean[g][ch];
        var.at(g, ch) = state.running_var[g][ch];
      }
  }

  const std::vector<double> scale = inverse_scales(state.lambda);
  Matrix inv(k, c);
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch) inv.at(g, ch) = 1.0 / std::sqrt(var.at(g, ch) + state.eps);

  Batch xhat(batch.n, batch.c, batch.h, batch.w);
#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw) {
          double acc = 0.0;
          for (int g = 0; g < k; ++g)
            acc += resp.at(in, g) *
                   (scale[g] * ((batch.at(in, ch, ih, iw) - mean.at(g, ch)) * inv.at(g, ch)));
          xhat.at(in, ch, ih, iw) = acc;
        }
  Batch out = affine(xhat, state.gamma, state.beta);

  MixtureCache cache;
  cache.train = (mode == Mode::kTrain);
  cache.input = batch;
  cache.xhat_pre = std::move(xhat);
  cache.resp = std::move(resp);
  cache.mean = std::move(mean);
  cache.var = std::move(var);
  cache.soft_count = std::move(soft_count);
  cache.eps = state.eps;
  cache.lambda = state.lambda;
  return {std::move(out), std::move(cache)};
}

NormGrads mn_backward(const MixtureCache& cache, const Batch& grad_out,
                      const NormState& state) {
  if (!cache.train) fail("bad-cache", "backward needs a Train-mode cache");
  if (!grad_out.same_shape(cache.input))
    fail("shape-mismatch", "gradient shape does not match forward shape");
  grad_out.require_finite();
  const int n = grad_out.n, c = grad_out.c;
  const int k = static_cast<int>(cache.lambda.size());
  if (state.channels() != c) fail("shape-mismatch", "state width mismatch");

  NormGrads out;
  out.input = Batch(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  out.gamma.assign(c, 0.0);
  out.beta.assign(c, 0.0);

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    long double dg = 0.0L, db = 0.0L;
    for (int in = 0; in < n; ++in)
      for (int ih = 0; ih < grad_out.h; ++ih)
        for (int iw = 0; iw < grad_out.w; ++iw) {
          const double gv = grad_out.at(in, ch, ih, iw);
          dg += gv * cache.xhat_pre.at(in, ch, ih, iw);
          db += gv;
        }
    out.gamma[ch] = static_cast<double>(dg);
    out.beta[ch] = static_cast<double>(db);
  }

  const std::vector<double> scale = inverse_scales(cache.lambda);
  Matrix inv(k, c);
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch)
      inv.at(g, ch) = 1.0 / std::sqrt(cache.var.at(g, ch) + cache.eps);

  // Responsibility-weighted means of g and g*z per (component, channel),
  // then dx accumulates each component's standardization gradient.
  Matrix mean_g(k, c), mean_gz(k, c);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch)
    for (int g = 0; g < k; ++g) {
      if (cache.soft_count[g] < 1e-12) continue;
      long double sum_g = 0.0L, sum_gz = 0.0L;
      for (int in = 0; in < n; ++in) {
        const double r = cache.resp.at(in, g);
        for (int ih = 0; ih < grad_out.h; ++ih)
          for (int iw = 0; iw < grad_out.w; ++iw) {
            const double gv = grad_out.at(in, ch, ih, iw);
            const double z = (cache.input.at(in, ch, ih, iw) - cache.mean.at(g, ch)) *
                             inv.at(g, ch);
            sum_g += r * gv;
            sum_gz += r * gv * z;
          }
      }
      mean_g.at(g, ch) = static_cast<double>(sum_g / cache.soft_count[g]);
      mean_gz.at(g, ch) = static_cast<double>(sum_gz / cache.soft_count[g]);
    }

#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch)
      for (int ih = 0; ih < grad_out.h; ++ih)
        for (int iw = 0; iw < grad_out.w; ++iw) {
          const double gv = grad_out.at(in, ch, ih, iw);
          double acc = 0.0;
          for (int g = 0; g < k; ++g) {
            if (cache.soft_count[g] < 1e-12) continue;
            const double z = (cache.input.at(in, ch, ih, iw) - cache.mean.at(g, ch)) *
                             inv.at(g, ch);
            acc += cache.resp.at(in, g) * state.gamma[ch] * scale[g] * inv.at(g, ch) *
                   (gv - mean_g.at(g, ch) - z * mean_gz.at(g, ch));
          }
          out.input.at(in, ch, ih, iw) = acc;
        }
  return out;
}

GmmModel gmm_from_running_stats(const NormState& state) {
  const int k = state.k(), c = state.channels();
  GmmModel gmm;
  gmm.weights = state.lambda;
  gmm.means = Matrix(k, c);
  gmm.vars = Matrix(k, c);
  for (int g = 0; g < k; ++g)
    for (int ch = 0; ch < c; ++ch) {
      gmm.means.at(g, ch) = state.running_mean[g][ch];
      gmm.vars.at(g, ch) = std::max(state.running_var[g][ch], kVarFloor);
    }
  return gmm;
}

}  // namespace ctxnorm
