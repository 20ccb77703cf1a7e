#pragma once

#include <vector>

#include "maskexplain/grid.hpp"

namespace maskexplain {

struct GaussianKernel {
  double sigma = 0.0;
  int radius = 0;
  std::vector<double> weights;  // length 2*radius+1, sums to 1
};

/// Sampled, normalized Gaussian truncated at radius ceil(3*sigma).
/// sigma == 0 gives the single-tap identity kernel.
GaussianKernel gaussian_kernel(double sigma);

/// Separable Gaussian blur of every channel with edge replication.
Image blur(const Image& image, double sigma);
Field blur(const Field& field, double sigma);

/// Sum over cells of |dx|^beta + |dy|^beta using forward differences that
/// vanish at the far border.
double tv_energy(const Mask& mask, double beta);

/// Analytic gradient of tv_energy. Requires beta > 1.
Field tv_gradient(const Mask& mask, double beta);

/// Linear map from a coarse mask to a smooth full-resolution mask.
///
/// Cell (i, j) of the coarse grid is centred on output pixel
/// (scale*i + (scale-1)/2, scale*j + (scale-1)/2). Each output pixel is the
/// Gaussian-weighted average of all cells, with sigma_m measured in output
/// pixels and the weights renormalized per pixel so constants are preserved.
/// sigma_m == 0 degenerates to nearest-cell replication. The weights are
/// separable, so the operator is stored as one row matrix per axis.
class Upsampler {
 public:
  Upsampler() = default;
  Upsampler(int mask_h, int mask_w, int scale, double sigma_m, int out_h, int out_w);

  Mask apply(const Mask& m) const;
  /// Transpose of apply: pulls a full-resolution gradient back to the coarse grid.
  Field adjoint(const Field& g) const;

  int mask_height() const { return mask_h_; }
  int mask_width() const { return mask_w_; }
  int out_height() const { return out_h_; }
  int out_width() const { return out_w_; }

 private:
  int mask_h_ = 0, mask_w_ = 0, out_h_ = 0, out_w_ = 0;
  std::vector<double> rows_;  // out_h x mask_h
  std::vector<double> cols_;  // out_w x mask_w
};

Mask upsample_mask(const Mask& mask, int scale, double sigma_m, int out_h, int out_w);

/// Affine rescale to [0,1]. Constant maps become all-zero; non-finite
/// entries map to 0.
Heatmap normalize_heatmap(const Heatmap& h);

}  // namespace maskexplain
