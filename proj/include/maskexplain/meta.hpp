#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskexplain/blackbox.hpp"

namespace maskexplain {

struct LabeledSample {
  Image x;
  bool in_class = false;
};

enum class RuleId { kQ1, kQ2, kQ3 };
std::string to_string(RuleId rule);

/// Faithfulness of an explanatory rule: fraction of samples on which its
/// predicate fails.
struct RuleReport {
  RuleId rule = RuleId::kQ1;
  double faithfulness_error = 0.0;
  int theta = 0;  // degrees, Q3 only
  double epsilon = 0.0;
  std::size_t n = 0;
};

inline constexpr const char* kRuleCsvHeader = "rule,theta,epsilon,n,error";
std::string to_csv_row(const RuleReport& r);

/// Q1 (discrimination): predicts "in class" iff score_c(x) >= threshold.
RuleReport faithfulness_q1(const BlackBox& model, int c, double threshold, std::span<const LabeledSample> samples);

/// Q2 (rotation invariance): holds for (x, angle) iff the argmax class of x
/// and of x rotated by angle agree. Angles must be 90, 180 or 270.
RuleReport faithfulness_q2(const BlackBox& model, std::span<const Image> samples, std::span<const int> angles);

/// Q3: the largest angle theta in `angles` (ascending) such that the Q2
/// error at every listed angle <= theta is at most epsilon; 0 if none.
/// The reported error pools all (x, angle <= theta) pairs.
RuleReport max_theta_rule(const BlackBox& model, std::span<const Image> samples, std::span<const int> angles,
                          double epsilon);

/// Counter-clockwise rotation by a multiple of 90 degrees.
Image rotate_image(const Image& x, int degrees);

int argmax_class(const std::vector<double>& scores);

struct RidgeConfig {
  double lambda = 1e-2;
  double sigma = 0.1;
  int n = 10000;
  std::uint64_t seed = 0;
};

inline constexpr int kMaxRidgeDimension = 256;

/// Local linear surrogate around x0: samples x = x0 + sigma * xi and solves
///   min_w lambda |w|^2 + mean (f_c(x) - f_c(x0) - <w, x - x0>)^2
/// in closed form. Requires H*W*C <= 256.
Image ridge_saliency(const BlackBox& model, const Image& x0, int c, const RidgeConfig& cfg);

}  // namespace maskexplain
