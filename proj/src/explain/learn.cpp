#include <cmath>
#include <sstream>

#include "maskexplain/eval.hpp"
#include "maskexplain/explain.hpp"

namespace maskexplain {

namespace {

constexpr double kInitSuppression = 0.99;

Mask centred_disk(int h, int w, double radius, bool inside_value, bool outside_value) {
  Mask m(h, w);
  const double cy = 0.5 * h, cx = 0.5 * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      const bool inside = dy * dy + dx * dx <= radius * radius;
      m(y, x) = (inside ? inside_value : outside_value) ? 1.0 : 0.0;
    }
  return m;
}

}  // namespace

InitResult init_circular_mask(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                              const ObjectiveConfig& cfg, const OptimConfig& opt) {
  MaskObjective obj(model, spec, x0, cfg, opt);
  const int h = obj.mask_height(), w = obj.mask_width();
  const bool deletion = cfg.game == Game::kDeletion;
  const Mask fallback(h, w, deletion ? 0.0 : 1.0);

  const Perturbation& phi = obj.perturbation();
  const double p0 = obj.target_score(x0);
  const double pb = obj.target_score(phi.fully_perturbed());
  if (p0 - pb <= 1e-12) return {fallback, -1};

  const int max_radius = static_cast<int>(std::ceil(std::hypot(h, w)));
  for (int r = 0; r <= max_radius; ++r) {
    // deletion zeroes the disk; preservation keeps only the disk
    const Mask m = centred_disk(h, w, r, !deletion, deletion);
    const double p = obj.target_score(phi.apply(obj.full_resolution(m)));
    const bool ok = deletion ? p <= p0 - kInitSuppression * (p0 - pb) : p >= pb + kInitSuppression * (p0 - pb);
    if (ok) return {m, r};
  }
  return {fallback, -1};
}

ExplainResult learn_mask(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                         const ObjectiveConfig& cfg, const OptimConfig& opt) {
  if (!(opt.lr > 0.0)) throw InvalidParameter("learning rate must be positive");
  if (opt.iters < 0) throw InvalidParameter("iteration count must be >= 0");
  MaskObjective obj(model, spec, x0, cfg, opt);
  Rng rng(derive_seed(opt.seed, 0));

  ExplainResult res;
  const InitResult init = init_circular_mask(model, spec, x0, cfg, opt);
  res.init_mask = init.mask;
  res.init_radius = init.radius;

  Mask m = init.mask;
  AdamState adam;
  res.trace.reserve(opt.iters + 1);
  auto record = [&res](int iter, const ObjectiveValue& v) {
    if (!std::isfinite(v.value)) {
      std::ostringstream msg;
      msg << "objective became non-finite at iteration " << iter << " (l1=" << v.l1 << ", tv=" << v.tv
          << ", score=" << v.score << ")";
      throw NumericError(msg.str());
    }
    res.trace.push_back({iter, v.value, v.l1, v.tv, v.score});
  };
  for (int it = 0; it < opt.iters; ++it) {
    const ObjectiveValue v = obj.evaluate(m, rng);
    record(it, v);
    auto [next, state] = adam_step(adam, m, v.grad, opt);
    m = std::move(next);
    adam = std::move(state);
  }
  // the final entry is measured without jitter
  record(opt.iters, obj.evaluate_at(m, 0, 0));

  res.mask = m;
  res.upsampled_mask = obj.full_resolution(m);
  res.saliency = Heatmap(res.upsampled_mask.height, res.upsampled_mask.width);
  for (std::size_t i = 0; i < res.saliency.size(); ++i) {
    const double v = res.upsampled_mask.data[i];
    res.saliency.data[i] = cfg.game == Game::kDeletion ? 1.0 - v : v;
  }
  const Perturbation& phi = obj.perturbation();
  res.scores.p0 = obj.target_score(x0);
  res.scores.p_masked = obj.target_score(phi.apply(res.upsampled_mask));
  res.scores.pb = obj.target_score(phi.fully_perturbed());
  res.scores.pprime = normalized_score(res.scores.p_masked, res.scores.p0, res.scores.pb);
  return res;
}

}  // namespace maskexplain
