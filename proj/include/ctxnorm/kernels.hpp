#pragma once

#include <span>
#include <vector>

#include "ctxnorm/batch.hpp"

namespace ctxnorm {

struct Moments {
  ChannelVector mean;
  ChannelVector var;  // biased: divide by count, not count-1
};

// Per-channel mean and biased variance pooled over samples and spatial
// positions. The masked overload restricts the pool to the selected samples.
// OpenMP-parallel across channels; each channel is accumulated by a single
// thread in index order, so results do not depend on the thread count.
Moments channel_moments(const Batch& batch);
Moments channel_moments(const Batch& batch, const std::vector<bool>& mask);

// Same statistic over an explicit sample subset, in the order given.
Moments group_channel_moments(const Batch& batch, std::span<const int> samples);

// out[n,c,h,w] = (in[n,c,h,w] - mean[c]) / sqrt(var[c] + eps)
Batch standardize(const Batch& batch, const ChannelVector& mean,
                  const ChannelVector& var, double eps);

// out[n,c,h,w] = scale[c] * in[n,c,h,w] + shift[c]
Batch affine(const Batch& batch, const ChannelVector& scale, const ChannelVector& shift);

}  // namespace ctxnorm
