#include <cmath>
#include <random>

#include "doctest.h"
#include "maskexplain/core.hpp"
#include "oracles.hpp"

using namespace maskexplain;

TEST_CASE("gaussian kernel") {
  SUBCASE("sigma 0 is the identity tap") {
    const auto k = gaussian_kernel(0.0);
    CHECK(k.radius == 0);
    REQUIRE(k.weights.size() == 1);
    CHECK(k.weights[0] == 1.0);
  }
  SUBCASE("sigma 1 matches exp(-k^2/2) normalized over k=-3..3") {
    const auto k = gaussian_kernel(1.0);
    CHECK(k.radius == 3);
    REQUIRE(k.weights.size() == 7);
    // frozen from the closed form: 1 / sum_{k=-3..3} exp(-k^2/2)
    CHECK(k.weights[3] == doctest::Approx(0.3990502796524549).epsilon(1e-14));
    CHECK(k.weights[0] == doctest::Approx(0.004433048175243745).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) CHECK(k.weights[i] == k.weights[6 - i]);
  }
  SUBCASE("weights sum to one") {
    for (double s : {0.3, 1.0, 2.5, 5.0, 10.0}) {
      const auto k = gaussian_kernel(s);
      double total = 0.0;
      for (double w : k.weights) total += w;
      CHECK(std::abs(total - 1.0) < 1e-12);
      CHECK(k.radius == static_cast<int>(std::ceil(3 * s)));
    }
  }
  SUBCASE("invalid sigma") {
    CHECK_THROWS_AS(gaussian_kernel(std::nan("")), InvalidParameter);
    CHECK_THROWS_AS(gaussian_kernel(-1.0), InvalidParameter);
  }
}

TEST_CASE("blur") {
  SUBCASE("constant image is a fixed point") {
    const Image x(12, 9, 3, 0.37);
    for (double s : {0.5, 2.0, 10.0}) {
      const Image b = blur(x, s);
      for (double v : b.data) CHECK(std::abs(v - 0.37) < 1e-6);
    }
  }
  SUBCASE("sigma 0 copies") {
    std::mt19937_64 rng(3);
    const Image x = oracle::random_image(7, 5, 2, rng);
    CHECK(blur(x, 0.0) == x);
  }
  SUBCASE("delta image matches direct 2-D convolution") {
    Image x(9, 9, 1, 0.0);
    x.at(4, 4) = 1.0;
    const Image sep = blur(x, 1.0);
    const Image direct = oracle::direct_blur(x, 1.0);
    CHECK(oracle::max_abs_diff(sep.data, direct.data) < 1e-6);
  }
  SUBCASE("random multi-channel image matches direct convolution near borders") {
    std::mt19937_64 rng(5);
    const Image x = oracle::random_image(10, 13, 3, rng);
    CHECK(oracle::max_abs_diff(blur(x, 1.7).data, oracle::direct_blur(x, 1.7).data) < 1e-12);
  }
  SUBCASE("linearity") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const Image a = oracle::random_image(8, 11, 3, rng);
      const Image b = oracle::random_image(8, 11, 3, rng);
      const double ca = 0.7, cb = -1.3;
      Image mix = a;
      for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = ca * a.data[i] + cb * b.data[i];
      const Image lhs = blur(mix, 2.0);
      const Image ba = blur(a, 2.0), bb = blur(b, 2.0);
      for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs.data[i] - (ca * ba.data[i] + cb * bb.data[i])) < 1e-6);
    }
  }
}

TEST_CASE("tv energy") {
  CHECK(tv_energy(Mask(5, 4, 0.3), 3.0) == 0.0);
  Mask m(2, 2);
  m.data = {0, 1, 0, 1};
  CHECK(tv_energy(m, 3.0) == 2.0);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask r = oracle::random_mask(8, 8, rng, 0.0, 1.0);
    for (double beta : {1.0, 2.0, 3.0}) {
      const double e = tv_energy(r, beta);
      CHECK(std::abs(e - oracle::naive_tv(r, beta)) < 1e-12);
      CHECK(e > 0.0);
    }
  }
  CHECK_THROWS_AS(tv_energy(m, 0.5), UnsupportedExponent);
}

TEST_CASE("tv gradient") {
  CHECK(tv_gradient(Mask(4, 4, 0.6), 3.0).data == std::vector<double>(16, 0.0));

  Mask m(2, 2);
  m.data = {0, 1, 0, 1};
  CHECK(tv_gradient(m, 2.0).data == std::vector<double>{-2, 2, -2, 2});

  CHECK_THROWS_AS(tv_gradient(m, 1.0), UnsupportedExponent);

  std::mt19937_64 rng(23);
  for (double beta : {2.0, 3.0}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Mask r = oracle::random_mask(6, 6, rng);
      const auto fd = oracle::central_difference(
          [&](const std::vector<double>& v) {
            Mask t(6, 6);
            t.data = v;
            return oracle::naive_tv(t, beta);
          },
          r.data, 1e-6);
      CHECK(oracle::relative_l2(tv_gradient(r, beta).data, fd) < 1e-5);
    }
  }
}

namespace {

// M(v) = sum_u g(v - c_u) m(u) / sum_u g(v - c_u), c_u = s*u + (s-1)/2.
Mask direct_upsample(const Mask& m, int s, double sigma, int oh, int ow) {
  Mask out(oh, ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j) {
          const double dy = y - (s * i + 0.5 * (s - 1));
          const double dx = x - (s * j + 0.5 * (s - 1));
          const double g = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
          num += g * m(i, j);
          den += g;
        }
      out(y, x) = num / den;
    }
  return out;
}

}  // namespace

TEST_CASE("upsample mask") {
  SUBCASE("constants map to constants") {
    for (double c : {0.0, 0.25, 1.0}) {
      const Mask up = upsample_mask(Mask(4, 3, c), 8, 5.0, 32, 24);
      for (double v : up.data) CHECK(std::abs(v - c) < 1e-6);
    }
  }
  SUBCASE("1x1 mask") {
    const Mask up = upsample_mask(Mask(1, 1, 0.42), 8, 5.0, 8, 8);
    CHECK(up.height == 8);
    for (double v : up.data) CHECK(std::abs(v - 0.42) < 1e-12);
  }
  SUBCASE("one-hot peaks at the cell centre") {
    Mask m(4, 4, 0.0);
    m(1, 2) = 1.0;
    const Mask up = upsample_mask(m, 8, 5.0, 32, 32);
    const Mask ref = direct_upsample(m, 8, 5.0, 32, 32);
    CHECK(oracle::max_abs_diff(up.data, ref.data) < 1e-12);
    const auto best = std::max_element(up.data.begin(), up.data.end()) - up.data.begin();
    const int by = static_cast<int>(best / 32), bx = static_cast<int>(best % 32);
    CHECK(std::abs(by - 11.5) <= 1.0);
    CHECK(std::abs(bx - 19.5) <= 1.0);
  }
  SUBCASE("random masks match the direct formula and stay in [0,1]") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
      const Mask m = oracle::random_mask(3, 5, rng, 0.0, 1.0);
      const Mask up = upsample_mask(m, 4, 2.5, 11, 18);
      CHECK(oracle::max_abs_diff(up.data, direct_upsample(m, 4, 2.5, 11, 18).data) < 1e-12);
      for (double v : up.data) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
  SUBCASE("commutes with scaling") {
    std::mt19937_64 rng(31);
    const Mask m = oracle::random_mask(4, 4, rng, 0.0, 1.0);
    Mask half = m;
    for (double& v : half.data) v *= 0.5;
    const Mask a = upsample_mask(half, 8, 5.0, 32, 32);
    const Mask b = upsample_mask(m, 8, 5.0, 32, 32);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - 0.5 * b.data[i]) < 1e-6);
  }
  SUBCASE("adjoint is the transpose") {
    std::mt19937_64 rng(37);
    const Upsampler up(3, 4, 4, 3.0, 12, 15);
    const Mask m = oracle::random_mask(3, 4, rng, 0.0, 1.0);
    Field g(12, 15);
    std::normal_distribution<double> n;
    for (double& v : g.data) v = n(rng);
    const Mask um = up.apply(m);
    const Field ag = up.adjoint(g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += um.data[i] * g.data[i];
    for (std::size_t i = 0; i < m.size(); ++i) rhs += m.data[i] * ag.data[i];
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
  SUBCASE("sigma 0 replicates cells") {
    Mask m(2, 2);
    m.data = {0.1, 0.2, 0.3, 0.4};
    const Mask up = upsample_mask(m, 2, 0.0, 4, 4);
    CHECK(up(0, 0) == 0.1);
    CHECK(up(1, 1) == 0.1);
    CHECK(up(0, 3) == 0.2);
    CHECK(up(3, 0) == 0.3);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(upsample_mask(Mask(2, 2), 0, 1.0, 2, 2), InvalidParameter);
    CHECK_THROWS_AS(upsample_mask(Mask(2, 2), 4, 1.0, 9, 8), InvalidParameter);
  }
}

TEST_CASE("normalize heatmap") {
  Heatmap h(2, 2);
  h.data = {2, 4, 6, 10};
  CHECK(normalize_heatmap(h).data == std::vector<double>{0, 0.25, 0.5, 1.0});

  Heatmap c(1, 2);
  c.data = {5, 5};
  CHECK(normalize_heatmap(c).data == std::vector<double>{0, 0});

  Heatmap u(1, 3);
  u.data = {0, 0.3, 1};
  CHECK(normalize_heatmap(u).data == u.data);

  Heatmap nan(1, 2);
  nan.data = {std::nan(""), std::nan("")};
  CHECK_THROWS_AS(normalize_heatmap(nan), InvalidInput);
}

TEST_CASE("shift with edge replication") {
  Image x(3, 3, 1);
  for (int i = 0; i < 9; ++i) x.data[i] = i;
  const Image s = shift_image(x, 1, 2);
  // out(y, x) = in(y - 1, x - 2), clamped
  CHECK(s.at(0, 0) == 0);
  CHECK(s.at(2, 2) == x.at(1, 0));
  CHECK(s.at(1, 1) == x.at(0, 0));
}
