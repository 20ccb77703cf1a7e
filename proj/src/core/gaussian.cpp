#include <algorithm>
#include <cmath>

#include "maskexplain/core.hpp"

namespace maskexplain {

GaussianKernel gaussian_kernel(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidParameter("gaussian sigma must be finite and >= 0");
  GaussianKernel k;
  k.sigma = sigma;
  if (sigma == 0.0) {
    k.weights = {1.0};
    return k;
  }
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  k.weights.resize(2 * k.radius + 1);
  double total = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    k.weights[i + k.radius] = w;
    total += w;
  }
  for (double& w : k.weights) w /= total;
  return k;
}

namespace {

// Convolves `count` interleaved 1-D signals of length n with stride `step`
// (element i of signal s lives at base(s) + i*step), replicating edges.
void convolve_lines(std::vector<double>& data, int lines, int n, std::size_t line_stride,
                    std::size_t step, int inner, const GaussianKernel& k) {
  std::vector<double> line(n);
  for (int l = 0; l < lines; ++l) {
    for (int c = 0; c < inner; ++c) {
      const std::size_t base = l * line_stride + c;
      for (int i = 0; i < n; ++i) line[i] = data[base + i * step];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = -k.radius; t <= k.radius; ++t) {
          const int j = std::clamp(i + t, 0, n - 1);
          acc += k.weights[t + k.radius] * line[j];
        }
        data[base + i * step] = acc;
      }
    }
  }
}

void blur_buffer(std::vector<double>& data, int h, int w, int ch, double sigma) {
  const GaussianKernel k = gaussian_kernel(sigma);
  if (k.radius == 0 || h == 0 || w == 0) return;
  // horizontal: one line per row, elements spaced by `ch`
  convolve_lines(data, h, w, static_cast<std::size_t>(w) * ch, ch, ch, k);
  // vertical: one line per column
  convolve_lines(data, w, h, ch, static_cast<std::size_t>(w) * ch, ch, k);
}

}  // namespace

Image blur(const Image& image, double sigma) {
  Image out = image;
  blur_buffer(out.data, out.height, out.width, out.channels, sigma);
  return out;
}

Field blur(const Field& field, double sigma) {
  Field out = field;
  blur_buffer(out.data, out.height, out.width, 1, sigma);
  return out;
}

Heatmap normalize_heatmap(const Heatmap& h) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double v : h.data) {
    if (!std::isfinite(v)) continue;
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!any) throw InvalidInput("heatmap has no finite values");
  Heatmap out(h.height, h.width, 0.0);
  if (hi == lo) return out;
  const double span = hi - lo;
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    const double v = h.data[i];
    out.data[i] = std::isfinite(v) ? (v - lo) / span : 0.0;
  }
  return out;
}

}  // namespace maskexplain
