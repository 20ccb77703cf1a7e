#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maskexplain/grid.hpp"

namespace maskexplain {

enum class PerturbKind { kConstant, kNoise, kBlur };

std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& name);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::kBlur;
  /// Replacement colour per channel; empty means the channel means of x0.
  std::vector<double> mu0;
  /// Blur std at a fully perturbed pixel.
  double sigma0 = 10.0;
  /// Noise replacement is mu0 + noise_sigma * N(0, 1), drawn per pixel and channel.
  double noise_sigma = 0.2;
  std::uint64_t noise_seed = 0;
  /// Number of pyramid intervals between sigma = 0 and sigma0.
  int blur_levels = 8;
  /// Use sigma(u) = sigma0 * m(u) instead of sigma0 * (1 - m(u)).
  bool flip_blur_convention = false;
};

/// Perturbation operator bound to one source image. Precomputes the
/// replacement image (constant/noise) or the blur pyramid once so that
/// repeated evaluations inside an optimizer are cheap.
///
/// A mask value of 1 keeps the source pixel, 0 fully perturbs it. Blur is
/// spatially varying: pixel u is blurred with sigma0 * (1 - m(u)), realized by
/// interpolating linearly between pyramid levels sigma0 * k / L.
class Perturbation {
 public:
  Perturbation(const PerturbSpec& spec, const Image& x0);

  Image apply(const Mask& m) const;
  /// d<upstream, apply(m)>/dm.
  Field mask_gradient(const Mask& m, const Image& upstream) const;
  /// apply() at the all-zero mask.
  Image fully_perturbed() const;

  const PerturbSpec& spec() const { return spec_; }
  const Image& source() const { return source_; }

 private:
  void check_mask_shape(const Mask& m) const;
  // Pyramid position t in [0, L] of a mask value and dt/dm.
  double level_of(double m) const;
  double level_slope() const;

  PerturbSpec spec_;
  Image source_;
  Image replacement_;          // constant / noise
  std::vector<Image> levels_;  // blur: L + 1 images, level 0 is the source
};

Image apply(const PerturbSpec& spec, const Image& x0, const Mask& m);
Field apply_with_input_gradient(const PerturbSpec& spec, const Image& x0, const Mask& m, const Image& upstream);
Image fully_perturbed(const PerturbSpec& spec, const Image& x0);

/// Per-channel mean colour.
std::vector<double> channel_means(const Image& x);

}  // namespace maskexplain
