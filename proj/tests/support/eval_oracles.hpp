#pragma once

// Brute-force reference versions of the evaluation protocol, written
// independently of src/eval.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <random>
#include <vector>

#include "maskexplain/box.hpp"
#include "maskexplain/grid.hpp"

namespace oracle {

using maskexplain::BinaryMask;
using maskexplain::Box;
using maskexplain::Heatmap;

inline double normalized_score(double p, double p0, double pb) {
  if (std::fabs(p0 - pb) < 1e-12) return 0.0;
  return (p - p0) / (p0 - pb);
}

inline BinaryMask value_threshold(const Heatmap& h, double alpha) {
  double lo = h.data[0], hi = h.data[0];
  for (double v : h.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  BinaryMask out(h.height, h.width, 0);
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x) {
      const double n = hi == lo ? 0.0 : (h(y, x) - lo) / (hi - lo);
      out(y, x) = n > alpha ? 1 : 0;
    }
  return out;
}

// Repeatedly takes the largest remaining pixel (lowest index on ties) until
// the running sum reaches alpha * total.
inline BinaryMask energy_threshold(const Heatmap& h, double alpha) {
  const std::size_t n = h.data.size();
  std::vector<std::size_t> order;
  std::vector<bool> taken(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i] && (best == n || h.data[i] > h.data[best])) best = i;
    taken[best] = true;
    order.push_back(best);
  }
  double total = 0.0;
  for (std::size_t i : order) total += h.data[i];
  BinaryMask out(h.height, h.width, 0);
  double acc = 0.0;
  for (std::size_t i : order) {
    out.data[i] = 1;
    acc += h.data[i];
    if (acc >= alpha * total) break;
  }
  return out;
}

inline BinaryMask mean_threshold(const Heatmap& h, double alpha) {
  double s = 0.0;
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x) s += h(y, x);
  const double mean = s / (h.height * h.width);
  BinaryMask out(h.height, h.width, 0);
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x) out(y, x) = h(y, x) > alpha * mean ? 1 : 0;
  return out;
}

// Shrinks the full frame from each side while the removed line is empty.
inline std::optional<Box> tightest_box(const BinaryMask& m) {
  auto row_empty = [&](int y, int x0, int x1) {
    for (int x = x0; x < x1; ++x)
      if (m(y, x)) return false;
    return true;
  };
  auto col_empty = [&](int x, int y0, int y1) {
    for (int y = y0; y < y1; ++y)
      if (m(y, x)) return false;
    return true;
  };
  Box b{0, 0, m.width, m.height};
  while (b.y0 < b.y1 && row_empty(b.y0, b.x0, b.x1)) ++b.y0;
  if (b.y0 == b.y1) return std::nullopt;
  while (row_empty(b.y1 - 1, b.x0, b.x1)) --b.y1;
  while (col_empty(b.x0, b.y0, b.y1)) ++b.x0;
  while (col_empty(b.x1 - 1, b.y0, b.y1)) --b.x1;
  return b;
}

// Pixel counting over the union of both boxes.
inline double iou(const Box& a, const Box& b) {
  const int x0 = std::min(a.x0, b.x0), y0 = std::min(a.y0, b.y0);
  const int x1 = std::max(a.x1, b.x1), y1 = std::max(a.y1, b.y1);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = a.contains(x, y), in_b = b.contains(x, y);
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double localization_error(const std::vector<std::optional<Box>>& pred, const std::vector<Box>& truth) {
  int miss = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!pred[i] || !(iou(*pred[i], truth[i]) > 0.5)) ++miss;
  return static_cast<double>(miss) / static_cast<double>(truth.size());
}

inline bool pointing(const Heatmap& h, const BinaryMask& truth, int tol) {
  int bx = 0, by = 0;
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x)
      if (h(y, x) > h(by, bx)) {
        bx = x;
        by = y;
      }
  for (int y = 0; y < truth.height; ++y)
    for (int x = 0; x < truth.width; ++x)
      if (truth(y, x) && std::max(std::abs(x - bx), std::abs(y - by)) <= tol) return true;
  return false;
}

inline Heatmap random_heatmap(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Heatmap m(h, w);
  for (double& v : m.data) v = u(rng);
  return m;
}

inline Box random_box(int h, int w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  int a = ux(rng), b = ux(rng), c = uy(rng), d = uy(rng);
  return {std::min(a, b), std::min(c, d), std::max(a, b) + 1, std::max(c, d) + 1};
}

}  // namespace oracle
