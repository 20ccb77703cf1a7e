#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "maskexplain/box.hpp"
#include "maskexplain/grid.hpp"

namespace maskexplain {

enum class ShapeClass : int { kSquare = 0, kDisk = 1, kCross = 2 };
inline constexpr int kShapeClasses = 3;
inline constexpr int kShapeImageSize = 32;

/// Synthetic 32x32x1 images, one filled shape each on a noisy background.
struct ShapeCorpus {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<Box> boxes;  // tight bounds of the shape pixels

  std::size_t size() const { return images.size(); }
  ShapeCorpus slice(std::size_t begin, std::size_t end) const;
};

/// Deterministic given seed. Labels are drawn uniformly; background noise
/// has amplitude 0.1.
ShapeCorpus generate_shape_corpus(int n, std::uint64_t seed);

/// images.mpt1 ([N,32,32,1]) and labels.csv (index,label,x0,y0,x1,y1).
void save_corpus(const std::filesystem::path& dir, const ShapeCorpus& corpus);
ShapeCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace maskexplain
