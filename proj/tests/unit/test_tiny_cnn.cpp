#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "maskexplain/shapes.hpp"
#include "maskexplain/tensor_io.hpp"
#include "maskexplain/tiny_cnn.hpp"
#include "oracles.hpp"

using namespace maskexplain;

TEST_CASE("softmax head") {
  const TinyCnn cnn = TinyCnn::random_init({32, 32, 1}, 3, 4);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x = oracle::random_image(32, 32, 1, rng);
    const auto s = cnn.score(x);
    CHECK(std::abs(std::accumulate(s.begin(), s.end(), 0.0) - 1.0) < 1e-6);
    for (double v : s) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(cnn.score(x) == s);  // bit-for-bit deterministic
  }
}

// ReLU and max-pool make the network piecewise linear; a +-1e-4 probe crosses
// a kink on roughly a third of random inputs, so the reference uses 1e-6.
TEST_CASE("input gradient on a full-size image matches finite differences") {
  const TinyCnn cnn = TinyCnn::random_init({32, 32, 1}, 3, 8);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const Image x = oracle::random_image(32, 32, 1, rng);
    const int c = trial % 3;
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& v) {
          Image t = x;
          t.data = v;
          return cnn.score(t)[c];
        },
        x.data, 1e-6);
    CHECK(oracle::relative_l2(cnn.gradient(x, c).data, fd) < 1e-3);
  }
}

TEST_CASE("parameter gradients match finite differences of the loss") {
  const TinyCnn base = TinyCnn::random_init({8, 8, 1}, 3, 21);
  std::mt19937_64 rng(3);
  const Image x = oracle::random_image(8, 8, 1, rng);
  const int label = 1;
  TinyCnn::Params g = base.zero_params();
  base.accumulate_loss_gradient(x, label, g);

  auto loss_with = [&](auto member, const std::vector<double>& v) {
    TinyCnn t = base;
    t.mutable_params().*member = v;
    TinyCnn::Params scratch = t.zero_params();
    return t.accumulate_loss_gradient(x, label, scratch);
  };
  auto check_member = [&](std::vector<double> TinyCnn::Params::*member) {
    const auto fd = oracle::central_difference([&](const std::vector<double>& v) { return loss_with(member, v); },
                                               base.params().*member, 1e-5);
    CHECK(oracle::relative_l2(g.*member, fd) < 1e-4);
  };
  check_member(&TinyCnn::Params::conv1_w);
  check_member(&TinyCnn::Params::conv1_b);
  check_member(&TinyCnn::Params::conv2_w);
  check_member(&TinyCnn::Params::conv2_b);
  check_member(&TinyCnn::Params::fc_w);
  check_member(&TinyCnn::Params::fc_b);
}

TEST_CASE("relu and max-pool conventions") {
  // All-zero weights: every pre-activation is exactly 0, so the ReLU
  // subgradient convention makes the input gradient vanish.
  TinyCnn::Params p = TinyCnn({4, 4, 1}, 2).zero_params();
  p.fc_b = {1.0, -1.0};
  const TinyCnn flat({4, 4, 1}, 2, p);
  const Image g = flat.gradient(Image(4, 4, 1, 0.5), 0);
  for (double v : g.data) CHECK(v == 0.0);

  // Identity-like first conv (centre tap) with a constant image: pooling
  // windows are all ties, so only the first element of each window receives
  // gradient through layer one.
  TinyCnn::Params q = TinyCnn({4, 4, 1}, 2).zero_params();
  q.conv1_w[4] = 1.0;             // filter 0, centre tap
  q.conv2_w[(0 * 9 + 4) * 8] = 1.0;  // filter 0 reads channel 0 at the centre
  q.fc_w[0] = 1.0;                // class 0 reads feature (0,0,ch0)
  const TinyCnn probe({4, 4, 1}, 2, q);
  const Image gx = probe.gradient(Image(4, 4, 1, 0.5), 0);
  int nonzero = 0;
  for (double v : gx.data) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(gx.at(0, 0) != 0.0);
}

TEST_CASE("shape corpus") {
  SUBCASE("deterministic") {
    const auto a = generate_shape_corpus(1, 7);
    const auto b = generate_shape_corpus(1, 7);
    CHECK(a.images[0] == b.images[0]);
    CHECK(encode_mpt1(stack_images(a.images)) == encode_mpt1(stack_images(b.images)));
  }
  SUBCASE("boxes tightly bound the shape") {
    const auto c = generate_shape_corpus(300, 3);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Box& b = c.boxes[i];
      CHECK(b.area() >= 16);
      CHECK(b.area() <= 32 * 32 / 2);
      // shape pixels are >= 0.55 and background <= 0.45 by construction
      Box fit{32, 32, 0, 0};
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          if (c.images[i].at(y, x) > 0.5) {
            fit.x0 = std::min(fit.x0, x), fit.y0 = std::min(fit.y0, y);
            fit.x1 = std::max(fit.x1, x + 1), fit.y1 = std::max(fit.y1, y + 1);
          }
      CHECK(fit == b);
    }
  }
  SUBCASE("balanced classes") {
    const auto c = generate_shape_corpus(3000, 11);
    std::map<int, int> counts;
    for (int l : c.labels) ++counts[l];
    for (int k = 0; k < 3; ++k) CHECK(std::abs(counts[k] - 1000) <= 100);
  }
  SUBCASE("prefix stability and save/load") {
    const auto big = generate_shape_corpus(20, 5);
    const auto small = generate_shape_corpus(5, 5);
    CHECK(small.images[4] == big.images[4]);
    const auto dir = std::filesystem::temp_directory_path() / "maskexplain_corpus_test";
    std::filesystem::remove_all(dir);
    save_corpus(dir, small);
    const auto back = load_corpus(dir);
    CHECK(back.labels == small.labels);
    CHECK(back.boxes == small.boxes);
    CHECK(read_text(dir / "labels.csv").rfind("index,label,x0,y0,x1,y1\n", 0) == 0);
    std::filesystem::remove_all(dir);
  }
  CHECK_THROWS_AS(generate_shape_corpus(0, 1), InvalidParameter);
}

TEST_CASE("training") {
  const auto train = generate_shape_corpus(120, 1);
  SUBCASE("zero epochs returns the seeded init") {
    TrainOptions o;
    o.epochs = 0;
    o.seed = 9;
    const TinyCnn a = train_tiny_cnn(train, nullptr, o);
    const TinyCnn b = train_tiny_cnn(train, nullptr, o);
    CHECK(a.params() == b.params());
    TrainOptions o2 = o;
    o2.seed = 10;
    CHECK(!(train_tiny_cnn(train, nullptr, o2).params() == a.params()));
  }
  SUBCASE("same seed gives identical parameters; loss decreases") {
    TrainOptions o;
    o.epochs = 4;
    o.seed = 3;
    TrainReport ra, rb;
    const TinyCnn a = train_tiny_cnn(train, nullptr, o, &ra);
    const TinyCnn b = train_tiny_cnn(train, nullptr, o, &rb);
    CHECK(a.params() == b.params());
    REQUIRE(ra.epoch_loss.size() == 4);
    CHECK(ra.epoch_loss.back() < ra.epoch_loss.front());
  }
  SUBCASE("a non-finite loss is reported") {
    ShapeCorpus bad = train.slice(0, 8);
    bad.images[3].at(5, 5) = std::numeric_limits<double>::infinity();
    TrainOptions o;
    o.epochs = 1;
    CHECK_THROWS_AS(train_tiny_cnn(bad, nullptr, o), TrainingFailure);
  }
  SUBCASE("invalid options") {
    TrainOptions o;
    o.lr = 0.0;
    CHECK_THROWS_AS(train_tiny_cnn(train, nullptr, o), InvalidParameter);
    CHECK_THROWS_AS(train_tiny_cnn(ShapeCorpus{}, nullptr, TrainOptions{}), InvalidInput);
  }
}
