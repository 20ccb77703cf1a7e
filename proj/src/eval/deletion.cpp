#include <cmath>

#include "maskexplain/eval.hpp"

namespace maskexplain {

std::vector<double> default_deletion_thresholds() { return alpha_grid(0.0, 0.1, 1.0); }

DeletionCurve deletion_curve(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                             std::span<const int> classes, const Heatmap& h, std::span<const double> thresholds,
                             std::span<const double> levels) {
  if (h.height != x0.height || h.width != x0.width) throw ShapeMismatch("heatmap does not match the image");
  const Perturbation phi(spec, x0);
  auto target = [&](const Image& x) {
    const auto s = model.score(x);
    double total = 0.0;
    for (int c : classes) {
      if (c < 0 || c >= model.num_classes()) throw InvalidClass("target class out of range");
      total += s[c];
    }
    return total;
  };
  const double p0 = target(x0);
  const double pb = target(phi.fully_perturbed());

  DeletionCurve curve;
  for (double a : thresholds) {
    DeletionPoint pt;
    pt.alpha = a;
    pt.box = tightest_box(value_threshold(h, a));
    if (pt.box) {
      const Mask m = deletion_mask(box_region(h.height, h.width, *pt.box));
      pt.pprime = normalized_score(target(phi.apply(m)), p0, pb);
    }
    curve.points.push_back(pt);
  }
  for (double level : levels) {
    SuppressionBox best;
    best.level = level;
    for (const DeletionPoint& pt : curve.points) {
      if (!pt.pprime || *pt.pprime > -level) continue;
      if (!best.area || pt.box->area() < *best.area) {
        best.area = pt.box->area();
        best.alpha = pt.alpha;
      }
    }
    curve.smallest.push_back(best);
  }
  return curve;
}

}  // namespace maskexplain
