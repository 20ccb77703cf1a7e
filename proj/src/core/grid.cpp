#include "maskexplain/grid.hpp"

#include <algorithm>
#include <cmath>

namespace maskexplain {

Image::Image(int h, int w, int c, double fill) : height(h), width(w), channels(c) {
  if (h < 0 || w < 0 || c < 1) throw InvalidParameter("invalid image dimensions");
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

void check_mask(const Mask& m) {
  for (double v : m.data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw InvalidInput("mask value outside [0,1]");
  }
}

void clamp_unit(Mask& m) {
  for (double& v : m.data) v = std::clamp(v, 0.0, 1.0);
}

Field image_channel(const Image& img, int c) {
  if (c < 0 || c >= img.channels) throw InvalidParameter("channel out of range");
  Field out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out(y, x) = img.at(y, x, c);
  return out;
}

Image shift_image(const Image& img, int dy, int dx) {
  if (dy == 0 && dx == 0) return img;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    const int sy = std::clamp(y - dy, 0, img.height - 1);
    for (int x = 0; x < img.width; ++x) {
      const int sx = std::clamp(x - dx, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace maskexplain
