#pragma once

#include <cstdint>
#include <vector>

#include "maskexplain/blackbox.hpp"

namespace maskexplain {

struct ShapeCorpus;

/// conv3x3(8) -> ReLU -> maxpool2 -> conv3x3(16) -> ReLU -> maxpool2 -> linear -> softmax.
///
/// Convolutions use zero padding of one pixel, so height and width must be
/// multiples of 4. Scores are softmax probabilities. Every layer has a
/// hand-written backward pass; the ReLU subgradient at 0 is 0 and max-pool
/// ties go to the first window element in row-major order.
class TinyCnn final : public BlackBox {
 public:
  static constexpr int kConv1Filters = 8;
  static constexpr int kConv2Filters = 16;

  struct Params {
    std::vector<double> conv1_w;  // [8][3][3][Cin]
    std::vector<double> conv1_b;  // [8]
    std::vector<double> conv2_w;  // [16][3][3][8]
    std::vector<double> conv2_b;  // [16]
    std::vector<double> fc_w;     // [C][H/4 * W/4 * 16]
    std::vector<double> fc_b;     // [C]
    bool operator==(const Params&) const = default;
  };

  TinyCnn(InputShape shape, int num_classes);
  TinyCnn(InputShape shape, int num_classes, Params params);

  /// He-normal weights, zero biases.
  static TinyCnn random_init(InputShape shape, int num_classes, std::uint64_t seed);

  std::string kind() const override { return "tiny_cnn"; }
  int num_classes() const override { return classes_; }
  InputShape input_shape() const override { return shape_; }

  const Params& params() const { return params_; }
  Params& mutable_params() { return params_; }
  int feature_count() const { return (shape_.height / 4) * (shape_.width / 4) * kConv2Filters; }

  /// Cross-entropy loss on one example, accumulating parameter gradients
  /// into `grads` (which must have the layout of params()).
  double accumulate_loss_gradient(const Image& x, int label, Params& grads) const;
  Params zero_params() const;

  std::vector<double> logits(const Image& x) const;

 protected:
  std::vector<double> do_score(const Image& x) const override;
  ScoreGradient do_backward(const Image& x, std::span<const double> weights) const override;

 private:
  struct Trace;
  Trace forward(const Image& x) const;
  /// Backpropagates d(loss)/d(logits). Fills parameter gradients if
  /// `grads` is non-null and returns the input gradient if `want_input`.
  Image backpropagate(const Trace& t, const std::vector<double>& dlogits, Params* grads, bool want_input) const;

  InputShape shape_;
  int classes_;
  Params params_;
};

struct TrainOptions {
  int epochs = 10;
  double lr = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Minibatch SGD on cross-entropy. Deterministic given options.seed. Throws
/// TrainingFailure if the loss becomes non-finite.
TinyCnn train_tiny_cnn(const ShapeCorpus& train, const ShapeCorpus* test, const TrainOptions& opts,
                       TrainReport* report = nullptr);

/// Fraction of samples whose argmax score equals the label.
double accuracy(const BlackBox& model, const ShapeCorpus& corpus);

}  // namespace maskexplain
