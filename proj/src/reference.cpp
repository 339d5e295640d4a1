#include "ctxnorm/reference.hpp"

#include <cmath>
#include <numeric>

namespace ctxnorm::ref {

Moments group_channel_moments(const Batch& batch, std::span<const int> samples) {
  Moments out;
  out.mean.assign(batch.c, 0.0);
  out.var.assign(batch.c, 0.0);
  const double count = static_cast<double>(samples.size()) * batch.spatial();
  for (int c = 0; c < batch.c; ++c) {
    double sum = 0.0;
    for (int id : samples)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw) sum += batch.at(id, c, ih, iw);
    const double mean = sum / count;
    double sq = 0.0;
    for (int id : samples)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw) {
          const double d = batch.at(id, c, ih, iw) - mean;
          sq += d * d;
        }
    out.mean[c] = mean;
    out.var[c] = sq / count;
  }
  return out;
}

Moments channel_moments(const Batch& batch) {
  std::vector<int> ids(batch.n);
  std::iota(ids.begin(), ids.end(), 0);
  return ref::group_channel_moments(batch, ids);
}

Moments channel_moments(const Batch& batch, const std::vector<bool>& mask) {
  std::vector<int> ids;
  for (int i = 0; i < batch.n; ++i)
    if (mask[i]) ids.push_back(i);
  return ref::group_channel_moments(batch, ids);
}

Batch standardize(const Batch& batch, const ChannelVector& mean,
                  const ChannelVector& var, double eps) {
  Batch out(batch.n, batch.c, batch.h, batch.w);
  for (int n = 0; n < batch.n; ++n)
    for (int c = 0; c < batch.c; ++c)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw)
          out.at(n, c, ih, iw) = (batch.at(n, c, ih, iw) - mean[c]) / std::sqrt(var[c] + eps);
  return out;
}

Batch affine(const Batch& batch, const ChannelVector& scale, const ChannelVector& shift) {
  Batch out(batch.n, batch.c, batch.h, batch.w);
  for (int n = 0; n < batch.n; ++n)
    for (int c = 0; c < batch.c; ++c)
      for (int ih = 0; ih < batch.h; ++ih)
        for (int iw = 0; iw < batch.w; ++iw)
          out.at(n, c, ih, iw) = scale[c] * batch.at(n, c, ih, iw) + shift[c];
  return out;
}

}  // namespace ctxnorm::ref
