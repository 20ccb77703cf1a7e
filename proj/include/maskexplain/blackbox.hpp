#pragma once

#include <span>
#include <string>
#include <vector>

#include "maskexplain/box.hpp"
#include "maskexplain/grid.hpp"

namespace maskexplain {

struct InputShape {
  int height = 0;
  int width = 0;
  int channels = 1;
  bool operator==(const InputShape&) const = default;
};

/// Scores together with the input gradient of a weighted sum of scores.
struct ScoreGradient {
  std::vector<double> scores;
  Image gradient;
};

/// A differentiable classifier f : X -> R^C inspected only through scores
/// and exact input gradients. Implementations must be immutable after
/// construction so that one instance can serve several threads.
class BlackBox {
 public:
  virtual ~BlackBox() = default;

  virtual std::string kind() const = 0;
  virtual int num_classes() const = 0;
  virtual InputShape input_shape() const = 0;

  /// Throws ShapeMismatch on a wrong input shape.
  std::vector<double> score(const Image& x) const;
  double score(const Image& x, int c) const;
  /// Exact gradient of score_c at x. Throws InvalidClass when c is out of range.
  Image gradient(const Image& x, int c) const;
  /// Scores at x and the gradient of sum_k weights[k] * score_k.
  ScoreGradient backward(const Image& x, std::span<const double> weights) const;
  /// Scores at x and the gradient of the summed scores of `classes`.
  ScoreGradient backward_classes(const Image& x, std::span<const int> classes) const;

 protected:
  virtual std::vector<double> do_score(const Image& x) const = 0;
  virtual ScoreGradient do_backward(const Image& x, std::span<const double> weights) const = 0;

 private:
  void check_input(const Image& x) const;
};

/// f_c(x) = <w_c, x> + b_c.
class LinearModel final : public BlackBox {
 public:
  LinearModel(Image weights, double bias);
  LinearModel(std::vector<Image> weights, std::vector<double> biases);

  std::string kind() const override { return "linear"; }
  int num_classes() const override { return static_cast<int>(weights_.size()); }
  InputShape input_shape() const override;

  const std::vector<Image>& weights() const { return weights_; }
  const std::vector<double>& biases() const { return biases_; }

 protected:
  std::vector<double> do_score(const Image& x) const override;
  ScoreGradient do_backward(const Image& x, std::span<const double> weights) const override;

 private:
  std::vector<Image> weights_;
  std::vector<double> biases_;
};

/// f_c(x) = mean of x over the pixels of region R_c (all channels).
/// The gradient is 1/(|R_c| * channels) on R_c and 0 elsewhere, which makes
/// the salient support known exactly.
class RegionMeanModel final : public BlackBox {
 public:
  RegionMeanModel(InputShape shape, std::vector<BinaryMask> regions);

  std::string kind() const override { return "region_mean"; }
  int num_classes() const override { return static_cast<int>(regions_.size()); }
  InputShape input_shape() const override { return shape_; }

  const std::vector<BinaryMask>& regions() const { return regions_; }

 protected:
  std::vector<double> do_score(const Image& x) const override;
  ScoreGradient do_backward(const Image& x, std::span<const double> weights) const override;

 private:
  InputShape shape_;
  std::vector<BinaryMask> regions_;
  std::vector<std::vector<std::size_t>> pixels_;
};

/// Indicator of the rectangle [x0, x1) x [y0, y1) on an h x w grid.
BinaryMask box_region(int h, int w, int x0, int y0, int x1, int y1);
BinaryMask box_region(int h, int w, const Box& b);

}  // namespace maskexplain
