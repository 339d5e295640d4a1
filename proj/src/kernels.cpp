#include "ctxnorm/kernels.hpp"

#include <cmath>
#include <numeric>

#include "ctxnorm/error.hpp"

namespace ctxnorm {

namespace {

std::vector<int> all_samples(int n) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace

Moments group_channel_moments(const Batch& batch, std::span<const int> samples) {
  if (samples.empty())
    fail("empty-selection", "channel moments over an empty sample selection");
  Moments out;
  out.mean.assign(batch.c, 0.0);
  out.var.assign(batch.c, 0.0);
  const int hw = batch.spatial();
  const double count = static_cast<double>(samples.size()) * hw;
  int bad = 0;

#pragma omp parallel for reduction(+ : bad) schedule(static)
  for (int c = 0; c < batch.c; ++c) {
    // Two passes, accumulated in the widest float type. The inner order is
    // fixed (samples as given, then spatial), keeping results thread-count
    // independent.
    long double acc = 0.0L;
    for (int id : samples) {
      const double* p = batch.data.data() + batch.index(id, c, 0, 0);
      for (int i = 0; i < hw; ++i) {
        if (!std::isfinite(p[i])) ++bad;
        acc += p[i];
      }
    }
    const double mean = static_cast<double>(acc / count);
    long double sq = 0.0L;
    for (int id : samples) {
      const double* p = batch.data.data() + batch.index(id, c, 0, 0);
      for (int i = 0; i < hw; ++i) {
        const long double d = p[i] - mean;
        sq += d * d;
      }
    }
    out.mean[c] = mean;
    out.var[c] = static_cast<double>(sq / count);
  }
  if (bad > 0) fail("non-finite", "channel moments over non-finite values");
  return out;
}

Moments channel_moments(const Batch& batch) {
  const auto ids = all_samples(batch.n);
  return group_channel_moments(batch, ids);
}

Moments channel_moments(const Batch& batch, const std::vector<bool>& mask) {
  if (static_cast<int>(mask.size()) != batch.n)
    fail("shape-mismatch", "sample mask length does not match batch size");
  std::vector<int> ids;
  ids.reserve(batch.n);
  for (int i = 0; i < batch.n; ++i)
    if (mask[i]) ids.push_back(i);
  return group_channel_moments(batch, ids);
}

Batch standardize(const Batch& batch, const ChannelVector& mean,
                  const ChannelVector& var, double eps) {
  if (eps <= 0.0) fail("bad-epsilon", "eps must be > 0");
  if (static_cast<int>(mean.size()) != batch.c || static_cast<int>(var.size()) != batch.c)
    fail("shape-mismatch", "mean/var length does not match channel count");
  Batch out(batch.n, batch.c, batch.h, batch.w);
  const int hw = batch.spatial();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch.n; ++n)
    for (int c = 0; c < batch.c; ++c) {
      const double m = mean[c];
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      const double* in = batch.data.data() + batch.index(n, c, 0, 0);
      double* o = out.data.data() + out.index(n, c, 0, 0);
      for (int i = 0; i < hw; ++i) o[i] = (in[i] - m) * inv;
    }
  return out;
}

Batch affine(const Batch& batch, const ChannelVector& scale, const ChannelVector& shift) {
  if (static_cast<int>(scale.size()) != batch.c || static_cast<int>(shift.size()) != batch.c)
    fail("shape-mismatch", "scale/shift length does not match channel count");
  Batch out(batch.n, batch.c, batch.h, batch.w);
  const int hw = batch.spatial();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch.n; ++n)
    for (int c = 0; c < batch.c; ++c) {
      const double s = scale[c];
      const double t = shift[c];
      const double* in = batch.data.data() + batch.index(n, c, 0, 0);
      double* o = out.data.data() + out.index(n, c, 0, 0);
      for (int i = 0; i < hw; ++i) o[i] = s * in[i] + t;
    }
  return out;
}

}  // namespace ctxnorm
