#include <algorithm>
#include <cmath>

#include "maskexplain/core.hpp"

namespace maskexplain {

namespace {

// Row-normalized weights mapping `cells` coarse cells onto `out` pixels.
std::vector<double> axis_weights(int cells, int out, int scale, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(out) * cells, 0.0);
  const double offset = 0.5 * (scale - 1);
  for (int v = 0; v < out; ++v) {
    double* row = &w[static_cast<std::size_t>(v) * cells];
    if (sigma == 0.0) {
      row[std::min(v / scale, cells - 1)] = 1.0;
      continue;
    }
    double total = 0.0;
    for (int u = 0; u < cells; ++u) {
      const double d = v - (scale * u + offset);
      row[u] = std::exp(-0.5 * d * d / (sigma * sigma));
      total += row[u];
    }
    for (int u = 0; u < cells; ++u) row[u] /= total;
  }
  return w;
}

}  // namespace

Upsampler::Upsampler(int mask_h, int mask_w, int scale, double sigma_m, int out_h, int out_w)
    : mask_h_(mask_h), mask_w_(mask_w), out_h_(out_h), out_w_(out_w) {
  if (scale < 1) throw InvalidParameter("upsampling scale must be >= 1");
  if (!std::isfinite(sigma_m) || sigma_m < 0.0) throw InvalidParameter("mask blur sigma must be >= 0");
  if (mask_h < 1 || mask_w < 1 || out_h < 1 || out_w < 1) throw InvalidParameter("empty upsampling grid");
  if (out_h > mask_h * scale || out_w > mask_w * scale)
    throw InvalidParameter("output larger than mask dims times scale");
  rows_ = axis_weights(mask_h, out_h, scale, sigma_m);
  cols_ = axis_weights(mask_w, out_w, scale, sigma_m);
}

Mask Upsampler::apply(const Mask& m) const {
  if (m.height != mask_h_ || m.width != mask_w_) throw ShapeMismatch("mask shape does not match upsampler");
  // tmp = m * cols^T  (mask_h x out_w), then out = rows * tmp
  std::vector<double> tmp(static_cast<std::size_t>(mask_h_) * out_w_, 0.0);
  for (int i = 0; i < mask_h_; ++i)
    for (int x = 0; x < out_w_; ++x) {
      double acc = 0.0;
      for (int j = 0; j < mask_w_; ++j) acc += m(i, j) * cols_[static_cast<std::size_t>(x) * mask_w_ + j];
      tmp[static_cast<std::size_t>(i) * out_w_ + x] = acc;
    }
  Mask out(out_h_, out_w_);
  for (int y = 0; y < out_h_; ++y)
    for (int x = 0; x < out_w_; ++x) {
      double acc = 0.0;
      for (int i = 0; i < mask_h_; ++i)
        acc += rows_[static_cast<std::size_t>(y) * mask_h_ + i] * tmp[static_cast<std::size_t>(i) * out_w_ + x];
      out(y, x) = std::clamp(acc, 0.0, 1.0);  // rounding can overshoot by an ulp
    }
  return out;
}

Field Upsampler::adjoint(const Field& g) const {
  if (g.height != out_h_ || g.width != out_w_) throw ShapeMismatch("gradient shape does not match upsampler");
  // out = rows^T * g * cols
  std::vector<double> tmp(static_cast<std::size_t>(mask_h_) * out_w_, 0.0);
  for (int y = 0; y < out_h_; ++y)
    for (int i = 0; i < mask_h_; ++i) {
      const double r = rows_[static_cast<std::size_t>(y) * mask_h_ + i];
      if (r == 0.0) continue;
      for (int x = 0; x < out_w_; ++x) tmp[static_cast<std::size_t>(i) * out_w_ + x] += r * g(y, x);
    }
  Field out(mask_h_, mask_w_, 0.0);
  for (int i = 0; i < mask_h_; ++i)
    for (int j = 0; j < mask_w_; ++j) {
      double acc = 0.0;
      for (int x = 0; x < out_w_; ++x)
        acc += tmp[static_cast<std::size_t>(i) * out_w_ + x] * cols_[static_cast<std::size_t>(x) * mask_w_ + j];
      out(i, j) = acc;
    }
  return out;
}

Mask upsample_mask(const Mask& mask, int scale, double sigma_m, int out_h, int out_w) {
  return Upsampler(mask.height, mask.width, scale, sigma_m, out_h, out_w).apply(mask);
}

}  // namespace maskexplain
