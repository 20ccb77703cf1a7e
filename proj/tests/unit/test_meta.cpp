#include <cmath>
#include <random>

#include "doctest.h"
#include "maskexplain/blackbox.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/meta.hpp"
#include "maskexplain/shapes.hpp"
#include "maskexplain/tiny_cnn.hpp"
#include "oracles.hpp"

using namespace maskexplain;

namespace {

// class 0 scores the mean intensity, class 1 is the constant 0.5
LinearModel mean_model(int n) {
  return LinearModel({Image(n, n, 1, 1.0 / (n * n)), Image(n, n, 1, 0.0)}, {0.0, 0.5});
}

// class 0 reads the listed pixels, class 1 is the constant 0.5
LinearModel pixel_model(int n, std::vector<std::pair<int, int>> pixels) {
  Image w(n, n, 1, 0.0);
  for (auto [y, x] : pixels) w.at(y, x) = 1.0;
  return LinearModel({w, Image(n, n, 1, 0.0)}, {0.0, 0.5});
}

int naive_argmax(const std::vector<double>& s) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(s.size()); ++i)
    if (s[i] > s[best]) best = i;
  return best;
}

// Independent rotation: apply the 90-degree counter-clockwise step k times.
Image rotate_naive(const Image& x, int degrees) {
  Image cur = x;
  for (int k = 0; k < degrees / 90; ++k) {
    Image next(cur.width, cur.height, cur.channels);
    for (int y = 0; y < cur.height; ++y)
      for (int xx = 0; xx < cur.width; ++xx)
        for (int c = 0; c < cur.channels; ++c) next.at(cur.width - 1 - xx, y, c) = cur.at(y, xx, c);
    cur = next;
  }
  return cur;
}

double naive_rotation_error(const BlackBox& m, const std::vector<Image>& xs, int angle) {
  int fail = 0;
  for (const Image& x : xs) fail += naive_argmax(m.score(x)) != naive_argmax(m.score(rotate_naive(x, angle)));
  return static_cast<double>(fail) / xs.size();
}

std::vector<Image> random_images(int count, int n, std::mt19937_64& rng) {
  std::vector<Image> xs;
  for (int i = 0; i < count; ++i) xs.push_back(oracle::random_image(n, n, 1, rng));
  return xs;
}

}  // namespace

TEST_CASE("rotation") {
  Image x(2, 3, 1);
  x.data = {1, 2, 3, 4, 5, 6};
  const Image r180 = rotate_image(x, 180);
  CHECK(r180.data == std::vector<double>{6, 5, 4, 3, 2, 1});
  CHECK_THROWS_AS(rotate_image(x, 90), InvalidInput);
  CHECK_THROWS_AS(rotate_image(x, 45), InvalidInput);
  Image s(2, 2, 1);
  s.data = {1, 2, 3, 4};
  // counter-clockwise: the top-right pixel moves to the top-left
  CHECK(rotate_image(s, 90).data == std::vector<double>{2, 4, 1, 3});
  std::mt19937_64 rng(1);
  const Image y = oracle::random_image(5, 5, 2, rng);
  for (int a : {90, 180, 270}) CHECK(rotate_image(y, a) == rotate_naive(y, a));
  CHECK(rotate_image(rotate_image(y, 90), 270) == y);
}

TEST_CASE("Q1 discrimination rule") {
  std::mt19937_64 rng(2);
  const LinearModel model = mean_model(4);
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 40; ++i) {
    Image x = oracle::random_image(4, 4, 1, rng);
    samples.push_back({x, model.score(x, 0) >= 0.5});
  }
  CHECK(faithfulness_q1(model, 0, 0.5, samples).faithfulness_error == 0.0);
  for (auto& s : samples) s.in_class = !s.in_class;
  const RuleReport inv = faithfulness_q1(model, 0, 0.5, samples);
  CHECK(inv.faithfulness_error == 1.0);
  CHECK(inv.n == 40);
  CHECK_THROWS_AS(faithfulness_q1(model, 0, 0.5, std::vector<LabeledSample>{}), InvalidInput);

  SUBCASE("tiny cnn recount") {
    const TinyCnn net = TinyCnn::random_init({32, 32, 1}, 3, 5);
    const ShapeCorpus corpus = generate_shape_corpus(100, 6);
    std::vector<LabeledSample> ls;
    for (std::size_t i = 0; i < corpus.images.size(); ++i)
      ls.push_back({corpus.images[i], corpus.labels[i] == static_cast<int>(ShapeClass::kDisk)});
    for (double thr : {0.2, 1.0 / 3.0, 0.5}) {
      int correct = 0;
      for (const auto& s : ls) correct += (net.score(s.x)[1] >= thr) == s.in_class;
      CHECK(faithfulness_q1(net, 1, thr, ls).faithfulness_error == 1.0 - static_cast<double>(correct) / ls.size());
    }
  }
}

TEST_CASE("Q2 rotation rule") {
  std::mt19937_64 rng(3);
  const auto xs = random_images(30, 6, rng);
  const int all[] = {90, 180, 270};
  CHECK(faithfulness_q2(mean_model(6), xs, all).faithfulness_error == 0.0);

  std::vector<Image> corners;
  for (int i = 0; i < 4; ++i) {
    Image x(6, 6, 1, 0.0);
    x.at(0, 0) = 1.0;
    corners.push_back(x);
  }
  const int q[] = {90};
  CHECK(faithfulness_q2(pixel_model(6, {{0, 0}}), corners, q).faithfulness_error > 0.0);
  const int bad[] = {45};
  CHECK_THROWS_AS(faithfulness_q2(mean_model(6), xs, bad), InvalidInput);

  SUBCASE("tiny cnn recount") {
    const TinyCnn net = TinyCnn::random_init({32, 32, 1}, 3, 7);
    const ShapeCorpus corpus = generate_shape_corpus(200, 8);
    const int half[] = {180};
    const RuleReport r = faithfulness_q2(net, corpus.images, half);
    CHECK(r.n == 200);
    CHECK(r.faithfulness_error == naive_rotation_error(net, corpus.images, 180));
    const RuleReport p = faithfulness_q2(net, corpus.images, all);
    double pooled = 0.0;
    for (int a : all) pooled += naive_rotation_error(net, corpus.images, a);
    CHECK(p.faithfulness_error == doctest::Approx(pooled / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("Q3 maximal angle") {
  std::mt19937_64 rng(4);
  const int angles[] = {90, 180, 270};
  const auto xs = random_images(20, 6, rng);
  for (double eps : {0.0, 0.3, 1.0}) CHECK(max_theta_rule(mean_model(6), xs, angles, eps).theta == 270);

  SUBCASE("violation at 180 degrees only") {
    // reads every corner except the bottom-right one; a lone top-left dot
    // lands there only under a half turn
    const LinearModel m = pixel_model(6, {{0, 0}, {5, 0}, {0, 5}});
    std::vector<Image> dots(5, Image(6, 6, 1, 0.0));
    for (auto& d : dots) d.at(0, 0) = 1.0;
    const RuleReport r = max_theta_rule(m, dots, angles, 0.0);
    CHECK(r.theta == 90);
    CHECK(r.faithfulness_error == 0.0);
    CHECK(r.n == 5);
    CHECK(max_theta_rule(m, dots, angles, 1.0).theta == 270);
  }
  SUBCASE("nothing qualifies") {
    std::vector<Image> dots(3, Image(6, 6, 1, 0.0));
    for (auto& d : dots) d.at(0, 0) = 1.0;
    const RuleReport r = max_theta_rule(pixel_model(6, {{0, 0}}), dots, angles, 0.0);
    CHECK(r.theta == 0);
    CHECK(r.faithfulness_error == 0.0);
    CHECK(r.n == 3);
  }
  SUBCASE("exhaustive evaluation and monotonicity in epsilon") {
    for (int seed = 0; seed < 10; ++seed) {
      const TinyCnn net = TinyCnn::random_init({12, 12, 1}, 3, 100 + seed);
      std::mt19937_64 r(seed);
      const auto imgs = random_images(30, 12, r);
      double errs[3];
      for (int k = 0; k < 3; ++k) errs[k] = naive_rotation_error(net, imgs, angles[k]);
      int prev = 0;
      for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0}) {
        int expect = 0;
        for (int k = 0; k < 3 && errs[k] <= eps; ++k) expect = angles[k];
        const RuleReport rep = max_theta_rule(net, imgs, angles, eps);
        CHECK(rep.theta == expect);
        CHECK(rep.theta >= prev);
        prev = rep.theta;
      }
    }
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(max_theta_rule(mean_model(6), xs, angles, 1.5), InvalidParameter);
    const int unsorted[] = {180, 90};
    CHECK_THROWS_AS(max_theta_rule(mean_model(6), xs, unsorted, 0.1), InvalidInput);
  }
}

TEST_CASE("rule csv") {
  RuleReport r;
  r.rule = RuleId::kQ3;
  r.theta = 180;
  r.epsilon = 0.1;
  r.n = 40;
  r.faithfulness_error = 0.025;
  CHECK(to_csv_row(r) == "q3,180,0.1,40,0.025");
}

TEST_CASE("ridge saliency") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uw(0.5, 1.5);
  auto linear = [&](int n) {
    Image w(n, n, 1);
    for (double& v : w.data) v = uw(rng);
    return LinearModel(w, 0.3);
  };

  SUBCASE("linear model with lambda = sigma^2 gives half the gradient") {
    const LinearModel m = linear(3);
    RidgeConfig cfg;
    cfg.sigma = 0.1;
    cfg.lambda = 0.01;
    cfg.n = 10000;
    cfg.seed = 3;
    const Image w = ridge_saliency(m, oracle::random_image(3, 3, 1, rng), 0, cfg);
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      const double expect = 0.5 * m.weights()[0].data[i];
      CHECK(std::abs(w.data[i] - expect) < 0.05 * std::abs(expect));
    }
  }
  SUBCASE("huge lambda shrinks to zero") {
    RidgeConfig cfg;
    cfg.lambda = 1e8;
    cfg.n = 500;
    for (double v : ridge_saliency(linear(3), Image(3, 3, 1, 0.5), 0, cfg).data) CHECK(std::abs(v) < 1e-6);
  }
  SUBCASE("region model") {
    const RegionMeanModel m({4, 4, 1}, {box_region(4, 4, 0, 0, 4, 4)});
    RidgeConfig cfg;
    cfg.lambda = 1e-3;
    cfg.sigma = 0.05;
    cfg.n = 20000;
    cfg.seed = 4;
    const double shrink = cfg.sigma * cfg.sigma / (cfg.lambda + cfg.sigma * cfg.sigma);
    for (double v : ridge_saliency(m, oracle::random_image(4, 4, 1, rng), 0, cfg).data)
      CHECK(std::abs(v - shrink / 16.0) < 0.1 * shrink / 16.0);
  }
  SUBCASE("error shrinks with more samples") {
    int better = 0;
    for (int seed = 0; seed < 10; ++seed) {
      const LinearModel m = linear(3);
      const Image x0 = oracle::random_image(3, 3, 1, rng);
      auto err = [&](int n) {
        RidgeConfig cfg;
        cfg.lambda = 0.01;
        cfg.n = n;
        cfg.seed = 1000 + seed;
        const Image w = ridge_saliency(m, x0, 0, cfg);
        std::vector<double> half(w.data.size());
        for (std::size_t i = 0; i < half.size(); ++i) half[i] = 0.5 * m.weights()[0].data[i];
        return oracle::relative_l2(w.data, half);
      };
      better += err(20000) <= err(2000);
    }
    CHECK(better >= 8);
  }
  SUBCASE("errors") {
    RidgeConfig cfg;
    cfg.lambda = 0.0;
    cfg.n = 5;
    CHECK_THROWS_AS(ridge_saliency(linear(3), Image(3, 3, 1, 0.5), 0, cfg), NumericError);
    CHECK_THROWS_AS(ridge_saliency(linear(17), Image(17, 17, 1, 0.5), 0, RidgeConfig{}), InvalidInput);
    cfg = RidgeConfig{};
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(ridge_saliency(linear(3), Image(3, 3, 1, 0.5), 0, cfg), InvalidParameter);
    RidgeConfig ok;
    ok.n = 50;
    const LinearModel m = linear(3);
    CHECK(ridge_saliency(m, Image(3, 3, 1, 0.5), 0, ok) == ridge_saliency(m, Image(3, 3, 1, 0.5), 0, ok));
  }
}
