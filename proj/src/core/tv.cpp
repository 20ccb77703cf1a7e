#include <cmath>

#include "maskexplain/core.hpp"

namespace maskexplain {

double tv_energy(const Mask& m, double beta) {
  if (!(beta >= 1.0)) throw UnsupportedExponent("tv exponent must be >= 1");
  double e = 0.0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const double v = m(y, x);
      if (x + 1 < m.width) e += std::pow(std::abs(m(y, x + 1) - v), beta);
      if (y + 1 < m.height) e += std::pow(std::abs(m(y + 1, x) - v), beta);
    }
  }
  return e;
}

Field tv_gradient(const Mask& m, double beta) {
  if (!(beta > 1.0)) throw UnsupportedExponent("tv gradient requires exponent > 1");
  Field g(m.height, m.width, 0.0);
  // d/dd |d|^beta = beta * |d|^(beta-1) * sign(d); zero when d == 0
  auto dpow = [beta](double d) {
    if (d == 0.0) return 0.0;
    return beta * std::pow(std::abs(d), beta - 1.0) * (d > 0 ? 1.0 : -1.0);
  };
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (x + 1 < m.width) {
        const double d = dpow(m(y, x + 1) - m(y, x));
        g(y, x + 1) += d;
        g(y, x) -= d;
      }
      if (y + 1 < m.height) {
        const double d = dpow(m(y + 1, x) - m(y, x));
        g(y + 1, x) += d;
        g(y, x) -= d;
      }
    }
  }
  return g;
}

}  // namespace maskexplain
