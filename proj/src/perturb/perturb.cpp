#include "maskexplain/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "maskexplain/core.hpp"
#include "maskexplain/random.hpp"

namespace maskexplain {

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kConstant: return "constant";
    case PerturbKind::kNoise: return "noise";
    case PerturbKind::kBlur: return "blur";
  }
  return "unknown";
}

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "constant") return PerturbKind::kConstant;
  if (name == "noise") return PerturbKind::kNoise;
  if (name == "blur") return PerturbKind::kBlur;
  throw InvalidParameter("unknown perturbation '" + name + "'");
}

std::vector<double> channel_means(const Image& x) {
  std::vector<double> mu(x.channels, 0.0);
  const std::size_t pixels = static_cast<std::size_t>(x.height) * x.width;
  if (pixels == 0) return mu;
  for (std::size_t p = 0; p < pixels; ++p)
    for (int c = 0; c < x.channels; ++c) mu[c] += x.data[p * x.channels + c];
  for (double& v : mu) v /= static_cast<double>(pixels);
  return mu;
}

Perturbation::Perturbation(const PerturbSpec& spec, const Image& x0) : spec_(spec), source_(x0) {
  if (!std::isfinite(spec.sigma0) || spec.sigma0 < 0.0) throw InvalidParameter("sigma0 must be >= 0");
  if (spec.blur_levels < 1) throw InvalidParameter("blur pyramid needs at least one interval");
  if (!spec.mu0.empty() && static_cast<int>(spec.mu0.size()) != x0.channels)
    throw ShapeMismatch("mu0 needs one value per channel");
  const std::vector<double> mu = spec.mu0.empty() ? channel_means(x0) : spec.mu0;

  switch (spec.kind) {
    case PerturbKind::kConstant: {
      replacement_ = Image(x0.height, x0.width, x0.channels);
      for (std::size_t i = 0; i < replacement_.size(); ++i) replacement_.data[i] = mu[i % x0.channels];
      break;
    }
    case PerturbKind::kNoise: {
      if (!(spec.noise_sigma >= 0.0)) throw InvalidParameter("noise sigma must be >= 0");
      replacement_ = Image(x0.height, x0.width, x0.channels);
      Rng rng(spec.noise_seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t i = 0; i < replacement_.size(); ++i)
        replacement_.data[i] = mu[i % x0.channels] + spec.noise_sigma * normal(rng);
      break;
    }
    case PerturbKind::kBlur: {
      levels_.reserve(spec.blur_levels + 1);
      levels_.push_back(x0);
      for (int k = 1; k <= spec.blur_levels; ++k)
        levels_.push_back(blur(x0, spec.sigma0 * k / spec.blur_levels));
      break;
    }
  }
}

void Perturbation::check_mask_shape(const Mask& m) const {
  if (m.height != source_.height || m.width != source_.width)
    throw ShapeMismatch("mask does not match the image's spatial shape");
}

double Perturbation::level_of(double m) const {
  const double blur_fraction = spec_.flip_blur_convention ? m : 1.0 - m;
  return std::clamp(blur_fraction, 0.0, 1.0) * spec_.blur_levels;
}

double Perturbation::level_slope() const {
  return spec_.flip_blur_convention ? spec_.blur_levels : -spec_.blur_levels;
}

Image Perturbation::apply(const Mask& m) const {
  check_mask_shape(m);
  const int ch = source_.channels;
  Image out(source_.height, source_.width, ch);
  for (std::size_t p = 0; p < m.size(); ++p) {
    const double mv = m.data[p];
    if (spec_.kind == PerturbKind::kBlur) {
      const double t = level_of(mv);
      const int k = std::min(static_cast<int>(t), spec_.blur_levels - 1);
      const double frac = t - k;
      const Image& lo = levels_[k];
      const Image& hi = levels_[k + 1];
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = p * ch + c;
        out.data[i] = (1.0 - frac) * lo.data[i] + frac * hi.data[i];
      }
    } else {
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = p * ch + c;
        out.data[i] = mv * source_.data[i] + (1.0 - mv) * replacement_.data[i];
      }
    }
  }
  return out;
}

Field Perturbation::mask_gradient(const Mask& m, const Image& upstream) const {
  check_mask_shape(m);
  if (!upstream.same_shape(source_)) throw ShapeMismatch("upstream gradient does not match the image");
  const int ch = source_.channels;
  Field g(m.height, m.width, 0.0);
  for (std::size_t p = 0; p < m.size(); ++p) {
    double acc = 0.0;
    if (spec_.kind == PerturbKind::kBlur) {
      const double t = level_of(m.data[p]);
      const int k = std::min(static_cast<int>(t), spec_.blur_levels - 1);
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = p * ch + c;
        acc += upstream.data[i] * (levels_[k + 1].data[i] - levels_[k].data[i]);
      }
      acc *= level_slope();
    } else {
      for (int c = 0; c < ch; ++c) {
        const std::size_t i = p * ch + c;
        acc += upstream.data[i] * (source_.data[i] - replacement_.data[i]);
      }
    }
    g.data[p] = acc;
  }
  return g;
}

Image Perturbation::fully_perturbed() const { return apply(Mask(source_.height, source_.width, 0.0)); }

Image apply(const PerturbSpec& spec, const Image& x0, const Mask& m) { return Perturbation(spec, x0).apply(m); }

Field apply_with_input_gradient(const PerturbSpec& spec, const Image& x0, const Mask& m, const Image& upstream) {
  return Perturbation(spec, x0).mask_gradient(m, upstream);
}

Image fully_perturbed(const PerturbSpec& spec, const Image& x0) { return Perturbation(spec, x0).fully_perturbed(); }

}  // namespace maskexplain
