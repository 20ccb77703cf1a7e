#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "maskexplain/grid.hpp"

namespace oracle {

using maskexplain::Image;
using maskexplain::Mask;

inline Mask random_mask(int h, int w, std::mt19937_64& rng, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mask m(h, w);
  for (double& v : m.data) v = u(rng);
  return m;
}

inline Image random_image(int h, int w, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image x(h, w, c);
  for (double& v : x.data) v = u(rng);
  return x;
}

/// Central differences of f over every coordinate of `point`.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> point, double step) {
  std::vector<double> g(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double keep = point[i];
    point[i] = keep + step;
    const double up = f(point);
    point[i] = keep - step;
    const double down = f(point);
    point[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||b||, tiny).
inline double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double naive_tv(const Mask& m, double beta) {
  double e = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double right = x + 1 < m.width ? m(y, x + 1) - m(y, x) : 0.0;
      const double down = y + 1 < m.height ? m(y + 1, x) - m(y, x) : 0.0;
      e += std::pow(std::fabs(right), beta) + std::pow(std::fabs(down), beta);
    }
  return e;
}

/// exp(-k^2 / (2 sigma^2)) for |k| <= ceil(3 sigma), normalized.
inline std::vector<double> gaussian_taps(double sigma) {
  if (sigma == 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w;
  for (int k = -r; k <= r; ++k) w.push_back(std::exp(-(k * k) / (2.0 * sigma * sigma)));
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= z;
  return w;
}

/// Direct 2-D convolution with the outer-product kernel and edge replication.
inline Image direct_blur(const Image& x, double sigma) {
  const auto w = gaussian_taps(sigma);
  const int r = static_cast<int>(w.size() / 2);
  Image out(x.height, x.width, x.channels);
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx)
      for (int c = 0; c < x.channels; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int sy = std::clamp(y + dy, 0, x.height - 1);
            const int sx = std::clamp(xx + dx, 0, x.width - 1);
            acc += w[dy + r] * w[dx + r] * x.at(sy, sx, c);
          }
        out.at(y, xx, c) = acc;
      }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace oracle
