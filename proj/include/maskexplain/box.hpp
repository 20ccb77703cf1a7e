#pragma once

namespace maskexplain {

/// Axis-aligned pixel box; (x0, y0) inclusive, (x1, y1) exclusive.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool valid() const { return x1 > x0 && y1 > y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const Box&) const = default;
};

}  // namespace maskexplain
