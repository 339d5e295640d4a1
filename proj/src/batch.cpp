#include "ctxnorm/batch.hpp"

#include <cmath>

#include "ctxnorm/error.hpp"

namespace ctxnorm {

namespace {

void check_dims(int n, int c, int h, int w) {
  if (n < 1 || c < 1 || h < 1 || w < 1)
    fail("shape-mismatch", "batch dimensions must all be >= 1");
}

}  // namespace

Batch::Batch(int n, int c, int h, int w) : n(n), c(c), h(h), w(w) {
  check_dims(n, c, h, w);
  data.assign(static_cast<std::size_t>(n) * c * h * w, 0.0);
}

Batch::Batch(int n, int c, int h, int w, std::vector<double> values)
    : n(n), c(c), h(h), w(w), data(std::move(values)) {
  check_dims(n, c, h, w);
  if (data.size() != static_cast<std::size_t>(n) * c * h * w)
    fail("shape-mismatch", "data length does not match N*C*H*W");
  require_finite();
}

void Batch::require_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) fail("non-finite", "batch contains NaN or Inf");
}

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows(rows), cols(cols), v(std::move(values)) {
  if (v.size() != static_cast<std::size_t>(rows) * cols)
    fail("shape-mismatch", "matrix data length does not match rows*cols");
}

}  // namespace ctxnorm
