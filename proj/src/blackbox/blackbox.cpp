#include "maskexplain/blackbox.hpp"

#include <cmath>
#include <numeric>

namespace maskexplain {

void BlackBox::check_input(const Image& x) const {
  const InputShape s = input_shape();
  if (x.height != s.height || x.width != s.width || x.channels != s.channels)
    throw ShapeMismatch("input shape does not match the model");
}

std::vector<double> BlackBox::score(const Image& x) const {
  check_input(x);
  return do_score(x);
}

double BlackBox::score(const Image& x, int c) const {
  if (c < 0 || c >= num_classes()) throw InvalidClass("class index out of range");
  return score(x)[c];
}

Image BlackBox::gradient(const Image& x, int c) const {
  const int classes[] = {c};
  return backward_classes(x, classes).gradient;
}

ScoreGradient BlackBox::backward(const Image& x, std::span<const double> weights) const {
  check_input(x);
  if (static_cast<int>(weights.size()) != num_classes()) throw ShapeMismatch("one weight per class expected");
  return do_backward(x, weights);
}

ScoreGradient BlackBox::backward_classes(const Image& x, std::span<const int> classes) const {
  std::vector<double> w(num_classes(), 0.0);
  for (int c : classes) {
    if (c < 0 || c >= num_classes()) throw InvalidClass("class index out of range");
    w[c] += 1.0;
  }
  return backward(x, w);
}

LinearModel::LinearModel(Image weights, double bias) : weights_{std::move(weights)}, biases_{bias} {}

LinearModel::LinearModel(std::vector<Image> weights, std::vector<double> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_.size() != biases_.size())
    throw InvalidParameter("linear model needs one bias per weight image");
  for (const Image& w : weights_)
    if (!w.same_shape(weights_.front())) throw ShapeMismatch("linear weights differ in shape");
}

InputShape LinearModel::input_shape() const {
  const Image& w = weights_.front();
  return {w.height, w.width, w.channels};
}

std::vector<double> LinearModel::do_score(const Image& x) const {
  std::vector<double> s(weights_.size());
  for (std::size_t c = 0; c < weights_.size(); ++c)
    s[c] = std::inner_product(x.data.begin(), x.data.end(), weights_[c].data.begin(), 0.0) + biases_[c];
  return s;
}

ScoreGradient LinearModel::do_backward(const Image& x, std::span<const double> weights) const {
  ScoreGradient out{do_score(x), Image(x.height, x.width, x.channels)};
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    if (weights[c] == 0.0) continue;
    for (std::size_t i = 0; i < x.size(); ++i) out.gradient.data[i] += weights[c] * weights_[c].data[i];
  }
  return out;
}

BinaryMask box_region(int h, int w, int x0, int y0, int x1, int y1) {
  BinaryMask r(h, w, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) r(y, x) = 1;
  return r;
}

BinaryMask box_region(int h, int w, const Box& b) { return box_region(h, w, b.x0, b.y0, b.x1, b.y1); }

RegionMeanModel::RegionMeanModel(InputShape shape, std::vector<BinaryMask> regions)
    : shape_(shape), regions_(std::move(regions)) {
  if (regions_.empty()) throw InvalidParameter("region model needs at least one region");
  for (const BinaryMask& r : regions_) {
    if (r.height != shape_.height || r.width != shape_.width) throw ShapeMismatch("region shape mismatch");
    std::vector<std::size_t> px;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r.data[i]) px.push_back(i);
    if (px.empty()) throw InvalidParameter("empty region");
    pixels_.push_back(std::move(px));
  }
}

std::vector<double> RegionMeanModel::do_score(const Image& x) const {
  std::vector<double> s(regions_.size());
  const int ch = shape_.channels;
  for (std::size_t c = 0; c < pixels_.size(); ++c) {
    double acc = 0.0;
    for (std::size_t p : pixels_[c])
      for (int k = 0; k < ch; ++k) acc += x.data[p * ch + k];
    s[c] = acc / static_cast<double>(pixels_[c].size() * ch);
  }
  return s;
}

ScoreGradient RegionMeanModel::do_backward(const Image& x, std::span<const double> weights) const {
  ScoreGradient out{do_score(x), Image(x.height, x.width, x.channels)};
  const int ch = shape_.channels;
  for (std::size_t c = 0; c < pixels_.size(); ++c) {
    if (weights[c] == 0.0) continue;
    const double g = weights[c] / static_cast<double>(pixels_[c].size() * ch);
    for (std::size_t p : pixels_[c])
      for (int k = 0; k < ch; ++k) out.gradient.data[p * ch + k] += g;
  }
  return out;
}

}  // namespace maskexplain
