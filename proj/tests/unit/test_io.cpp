#include <filesystem>
#include <random>

#include "doctest.h"
#include "maskexplain/tensor_io.hpp"
#include "oracles.hpp"

using namespace maskexplain;

TEST_CASE("MPT1 byte layout") {
  Tensor t;
  t.dims = {2, 1};
  t.values = {1.0f, -2.5f};
  const auto bytes = encode_mpt1(t);
  const std::vector<std::uint8_t> expected = {'M', 'P', 'T', '1', 2,                       //
                                              2, 0, 0, 0, 1, 0, 0, 0,                      // dims
                                              0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};  // 1.0f, -2.5f
  CHECK(bytes == expected);
  const Tensor back = decode_mpt1(bytes);
  CHECK(back.dims == t.dims);
  CHECK(back.values == t.values);
}

TEST_CASE("MPT1 round trip property") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(0, 5);
  std::normal_distribution<float> val;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t;
    const int nd = dim(rng);
    for (int i = 0; i < nd; ++i) t.dims.push_back(static_cast<std::uint32_t>(dim(rng)));
    t.values.resize(t.element_count());
    for (float& v : t.values) v = val(rng);
    const Tensor back = decode_mpt1(encode_mpt1(t));
    CHECK(back.dims == t.dims);
    CHECK(back.values == t.values);
  }
}

TEST_CASE("MPT1 rejects malformed input") {
  CHECK_THROWS_AS(decode_mpt1({'M', 'P', 'T', '2', 0}), IoError);
  CHECK_THROWS_AS(decode_mpt1({'M', 'P', 'T', '1', 1, 3, 0, 0, 0, 0, 0}), IoError);
  CHECK_THROWS_AS(read_mpt1("/nonexistent/file.mpt1"), IoError);
}

TEST_CASE("image and heatmap files") {
  const auto dir = std::filesystem::temp_directory_path() / "maskexplain_io_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(2);
  Image img = oracle::random_image(4, 5, 3, rng);
  for (double& v : img.data) v = static_cast<float>(v);  // exactly representable
  write_mpt1(dir / "img.mpt1", to_tensor(img));
  CHECK(image_from_tensor(read_mpt1(dir / "img.mpt1")) == img);

  Heatmap h(2, 2);
  h.data = {0.0, 1.0, 2.0, 4.0};
  const std::string pgm = encode_pgm(h);
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 4);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 0]) == 0);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 1]) == 64);   // round(255 * 0.25)
  CHECK(static_cast<unsigned char>(pgm[header.size() + 2]) == 128);  // round(127.5)
  CHECK(static_cast<unsigned char>(pgm[header.size() + 3]) == 255);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mask tensors are validated") {
  Tensor t;
  t.dims = {1, 2};
  t.values = {0.5f, 1.5f};
  CHECK_THROWS_AS(mask_from_tensor(t), InvalidInput);
}
