#include <cmath>

#include "maskexplain/explain.hpp"

namespace maskexplain {

std::string to_string(Game game) { return game == Game::kDeletion ? "deletion" : "preservation"; }

Game parse_game(const std::string& name) {
  if (name == "deletion") return Game::kDeletion;
  if (name == "preservation") return Game::kPreservation;
  throw InvalidParameter("unknown game '" + name + "'");
}

namespace {

Upsampler make_upsampler(const Image& x0, const ObjectiveConfig& cfg, const OptimConfig& opt) {
  if (!cfg.robust) return Upsampler(x0.height, x0.width, 1, 0.0, x0.height, x0.width);
  const int s = opt.upsample_scale;
  if (s < 1) throw InvalidParameter("upsample scale must be >= 1");
  const int mh = opt.mask_h > 0 ? opt.mask_h : (x0.height + s - 1) / s;
  const int mw = opt.mask_w > 0 ? opt.mask_w : (x0.width + s - 1) / s;
  return Upsampler(mh, mw, s, opt.mask_blur_sigma, x0.height, x0.width);
}

}  // namespace

MaskObjective::MaskObjective(const BlackBox& model, const PerturbSpec& spec, const Image& x0, ObjectiveConfig cfg,
                             OptimConfig opt)
    : model_(model), spec_(spec), x0_(x0), cfg_(std::move(cfg)), opt_(opt), upsampler_(make_upsampler(x0, cfg_, opt)) {
  if (cfg_.lambda1 < 0.0 || cfg_.lambda2 < 0.0) throw InvalidParameter("regularization weights must be >= 0");
  if (!(cfg_.beta > 1.0)) throw UnsupportedExponent("TV exponent must be > 1");
  if (cfg_.jitter_tau < 0 || cfg_.jitter_samples_per_step < 1) throw InvalidParameter("invalid jitter settings");
  if (cfg_.target_classes.empty()) throw InvalidParameter("no target class");
  for (int c : cfg_.target_classes)
    if (c < 0 || c >= model.num_classes()) throw InvalidClass("target class out of range");
  const InputShape s = model.input_shape();
  if (x0.height != s.height || x0.width != s.width || x0.channels != s.channels)
    throw ShapeMismatch("image does not match the model input");
}

const Perturbation& MaskObjective::perturbation(int dy, int dx) {
  auto& slot = cache_[{dy, dx}];
  if (!slot) slot = std::make_unique<Perturbation>(spec_, shift_image(x0_, dy, dx));
  return *slot;
}

Mask MaskObjective::full_resolution(const Mask& m) const { return upsampler_.apply(m); }

double MaskObjective::target_score(const Image& x) const {
  const auto s = model_.score(x);
  double total = 0.0;
  for (int c : cfg_.target_classes) total += s[c];
  if (!std::isfinite(total)) throw ModelFailure("model returned a non-finite score");
  return total;
}

ObjectiveValue MaskObjective::evaluate_at(const Mask& m, int dy, int dx) {
  if (m.height != upsampler_.mask_height() || m.width != upsampler_.mask_width())
    throw ShapeMismatch("mask shape does not match the objective");
  const bool deletion = cfg_.game == Game::kDeletion;
  ObjectiveValue out;
  for (double v : m.data) out.l1 += deletion ? 1.0 - v : v;
  out.tv = cfg_.lambda2 > 0.0 ? tv_energy(m, cfg_.beta) : 0.0;

  const Perturbation& phi = perturbation(dy, dx);
  const Mask full = upsampler_.apply(m);
  const Image perturbed = phi.apply(full);
  ScoreGradient sg = model_.backward_classes(perturbed, cfg_.target_classes);
  for (int c : cfg_.target_classes) out.score += sg.scores[c];
  if (!std::isfinite(out.score)) throw ModelFailure("model returned a non-finite score");
  for (double g : sg.gradient.data)
    if (!std::isfinite(g)) throw ModelFailure("model returned a non-finite gradient");

  const double sign = deletion ? 1.0 : -1.0;
  for (double& g : sg.gradient.data) g *= sign;
  out.grad = upsampler_.adjoint(phi.mask_gradient(full, sg.gradient));

  const double l1_slope = deletion ? -cfg_.lambda1 : cfg_.lambda1;
  for (double& g : out.grad.data) g += l1_slope;
  if (cfg_.lambda2 > 0.0) {
    const Field tv = tv_gradient(m, cfg_.beta);
    for (std::size_t i = 0; i < tv.size(); ++i) out.grad.data[i] += cfg_.lambda2 * tv.data[i];
  }
  out.value = cfg_.lambda1 * out.l1 + cfg_.lambda2 * out.tv + sign * out.score;
  return out;
}

ObjectiveValue MaskObjective::evaluate(const Mask& m, Rng& rng) {
  if (cfg_.jitter_tau <= 1) return evaluate_at(m, 0, 0);
  std::uniform_int_distribution<int> offset(0, cfg_.jitter_tau - 1);
  ObjectiveValue acc;
  const int n = cfg_.jitter_samples_per_step;
  for (int k = 0; k < n; ++k) {
    const int dy = offset(rng);
    const int dx = offset(rng);
    ObjectiveValue v = evaluate_at(m, dy, dx);
    if (k == 0) {
      acc = std::move(v);
      continue;
    }
    acc.value += v.value;
    acc.score += v.score;
    for (std::size_t i = 0; i < acc.grad.size(); ++i) acc.grad.data[i] += v.grad.data[i];
  }
  if (n > 1) {
    acc.value /= n;
    acc.score /= n;
    for (double& g : acc.grad.data) g /= n;
  }
  return acc;
}

ObjectiveValue objective(const ObjectiveConfig& cfg, const BlackBox& model, const PerturbSpec& spec,
                         const Image& x0, const Mask& m, const OptimConfig& opt, Rng& rng) {
  MaskObjective obj(model, spec, x0, cfg, opt);
  return obj.evaluate(m, rng);
}

std::pair<Mask, AdamState> adam_step(const AdamState& state, const Mask& m, const Field& grad,
                                     const OptimConfig& opt) {
  if (!grad.same_shape(m)) throw ShapeMismatch("gradient and mask shapes differ");
  AdamState next = state;
  if (next.first_moment.empty()) {
    next.first_moment.assign(m.size(), 0.0);
    next.second_moment.assign(m.size(), 0.0);
  }
  if (next.first_moment.size() != m.size()) throw ShapeMismatch("Adam state does not match the mask");
  ++next.step;
  const double b1 = opt.adam_beta1, b2 = opt.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, next.step);
  const double c2 = 1.0 - std::pow(b2, next.step);
  Mask out = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double g = grad.data[i];
    next.first_moment[i] = b1 * next.first_moment[i] + (1.0 - b1) * g;
    next.second_moment[i] = b2 * next.second_moment[i] + (1.0 - b2) * g * g;
    const double mhat = next.first_moment[i] / c1;
    const double vhat = next.second_moment[i] / c2;
    out.data[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.adam_eps);
  }
  clamp_unit(out);
  return {std::move(out), std::move(next)};
}

}  // namespace maskexplain
