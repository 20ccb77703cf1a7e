#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskexplain/explain.hpp"

namespace maskexplain {

namespace {

Heatmap channel_abs_max(const Image& g) {
  Heatmap h(g.height, g.width, 0.0);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      double best = 0.0;
      for (int c = 0; c < g.channels; ++c) best = std::max(best, std::abs(g.at(y, x, c)));
      h(y, x) = best;
    }
  return h;
}

}  // namespace

Heatmap gradient_saliency(const BlackBox& model, const Image& x0, int c) {
  return channel_abs_max(model.gradient(x0, c));
}

Heatmap gradient_times_input(const BlackBox& model, const Image& x0, int c) {
  Image g = model.gradient(x0, c);
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= x0.data[i];
  return channel_abs_max(g);
}

Heatmap occlusion_map(const BlackBox& model, const PerturbSpec& spec, const Image& x0, int c, int window,
                      int stride) {
  if (window < 1 || stride < 1) throw InvalidParameter("occlusion window and stride must be >= 1");
  if (window > x0.height || window > x0.width) throw InvalidParameter("occlusion window larger than the image");
  const Perturbation phi(spec, x0);
  const double p0 = model.score(x0, c);
  Field sum(x0.height, x0.width, 0.0);
  Field count(x0.height, x0.width, 0.0);
  Mask m(x0.height, x0.width, 1.0);
  for (int y0 = 0; y0 + window <= x0.height; y0 += stride) {
    for (int bx = 0; bx + window <= x0.width; bx += stride) {
      for (int y = y0; y < y0 + window; ++y)
        for (int x = bx; x < bx + window; ++x) m(y, x) = 0.0;
      const double drop = std::max(0.0, p0 - model.score(phi.apply(m), c));
      for (int y = y0; y < y0 + window; ++y)
        for (int x = bx; x < bx + window; ++x) {
          m(y, x) = 1.0;
          sum(y, x) += drop;
          count(y, x) += 1.0;
        }
    }
  }
  Heatmap h(x0.height, x0.width, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (count.data[i] > 0.0) h.data[i] = sum.data[i] / count.data[i];
  return h;
}

std::vector<int> top_classes(const std::vector<double>& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&scores](int a, int b) { return scores[a] > scores[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  return idx;
}

}  // namespace maskexplain
