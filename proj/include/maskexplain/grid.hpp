#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "maskexplain/error.hpp"

namespace maskexplain {

/// Multi-channel image, row-major and channel-last. Intensities nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

namespace detail {
struct MaskTag {};
struct HeatmapTag {};
struct FieldTag {};
struct BinaryTag {};
}  // namespace detail

/// Single-channel row-major grid. The tag keeps masks, heatmaps and raw
/// gradient fields from being mixed up.
template <class Tag, class T = double>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    if (h < 0 || w < 0) throw InvalidParameter("negative grid dimensions");
  }

  std::size_t size() const { return data.size(); }
  T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  T operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  template <class OtherTag, class U>
  bool same_shape(const Plane<OtherTag, U>& o) const {
    return height == o.height && width == o.width;
  }
  bool operator==(const Plane&) const = default;
};

/// Perturbation mask; 1 preserves a pixel and 0 fully perturbs it.
using Mask = Plane<detail::MaskTag>;
/// Nonnegative saliency field.
using Heatmap = Plane<detail::HeatmapTag>;
/// Unconstrained real field, e.g. a gradient with respect to a mask.
using Field = Plane<detail::FieldTag>;
/// 0/1 pixel selection produced by thresholding.
using BinaryMask = Plane<detail::BinaryTag, std::uint8_t>;

template <class To, class FromTag>
To plane_cast(const Plane<FromTag, double>& p) {
  To out;
  out.height = p.height;
  out.width = p.width;
  out.data = p.data;
  return out;
}

/// Throws InvalidInput unless every value is finite and in [0,1].
void check_mask(const Mask& m);
void clamp_unit(Mask& m);

/// Single-channel view of a one-channel image, and back.
Field image_channel(const Image& img, int c);

/// Shift by integer offsets with edge replication: out(y,x) = img(y-dy, x-dx).
Image shift_image(const Image& img, int dy, int dx);

}  // namespace maskexplain
