#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ctxnorm {

// C-dimensional per-channel quantity (mean, variance, gamma, beta, ...).
using ChannelVector = std::vector<double>;

// Dense activation block of shape (N, C, H, W), row-major.
// H = W = 1 encodes plain vector data of dimension C.
struct Batch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Batch() = default;
  Batch(int n, int c, int h, int w);                             // zero-filled
  Batch(int n, int c, int h, int w, std::vector<double> values); // checks finiteness

  std::size_t size() const { return data.size(); }
  int spatial() const { return h * w; }

  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  double at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }
  double& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }

  bool same_shape(const Batch& other) const {
    return n == other.n && c == other.c && h == other.h && w == other.w;
  }

  // Throws Error("non-finite") if any value is NaN or Inf.
  void require_finite() const;
};

// Row-major dense matrix used for point sets, responsibilities and centroids.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int rows, int cols)
      : rows(rows), cols(cols), v(static_cast<std::size_t>(rows) * cols, 0.0) {}
  Matrix(int rows, int cols, std::vector<double> values);

  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
};

}  // namespace ctxnorm
