#pragma once

#include <span>
#include <vector>

#include "ctxnorm/kernels.hpp"

namespace ctxnorm::ref {

// Serial, double-precision scalar-loop implementations of the core kernels.
// Kept as the ground truth the test suite checks the parallel kernels
// against, and as the baseline in the kernel benchmark. Inputs are assumed
// valid; no error handling here.

Moments channel_moments(const Batch& batch);
Moments channel_moments(const Batch& batch, const std::vector<bool>& mask);
Moments group_channel_moments(const Batch& batch, std::span<const int> samples);

Batch standardize(const Batch& batch, const ChannelVector& mean,
                  const ChannelVector& var, double eps);

Batch affine(const Batch& batch, const ChannelVector& scale, const ChannelVector& shift);

}  // namespace ctxnorm::ref
