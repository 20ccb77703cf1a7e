#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskexplain/grid.hpp"

namespace maskexplain {

/// Dense float tensor as stored on disk in the MPT1 format:
///   "MPT1", u8 ndim, ndim x u32le dims, float32le payload (row-major).
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
};

std::vector<std::uint8_t> encode_mpt1(const Tensor& t);
Tensor decode_mpt1(const std::vector<std::uint8_t>& bytes);

void write_mpt1(const std::filesystem::path& path, const Tensor& t);
Tensor read_mpt1(const std::filesystem::path& path);

Tensor to_tensor(const Image& img);  // dims [H, W, C]
Tensor to_tensor(const Mask& m);     // dims [H, W]
Tensor to_tensor(const Heatmap& h);
Tensor to_tensor(const Field& f);
Tensor stack_images(const std::vector<Image>& images);  // [N, H, W, C]

/// Accepts [H, W] or [H, W, C].
Image image_from_tensor(const Tensor& t);
Mask mask_from_tensor(const Tensor& t);
Heatmap heatmap_from_tensor(const Tensor& t);
/// Accepts [N, H, W] or [N, H, W, C].
std::vector<Image> unstack_images(const Tensor& t);
std::vector<Heatmap> unstack_heatmaps(const Tensor& t);
Tensor stack_heatmaps(const std::vector<Heatmap>& maps);

/// Binary PGM (P5, 8-bit) of the normalized heatmap.
std::string encode_pgm(const Heatmap& h);
void write_pgm(const std::filesystem::path& path, const Heatmap& h);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace maskexplain
