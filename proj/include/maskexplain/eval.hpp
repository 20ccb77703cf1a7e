#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskexplain/blackbox.hpp"
#include "maskexplain/box.hpp"
#include "maskexplain/grid.hpp"
#include "maskexplain/perturb.hpp"

namespace maskexplain {

/// (p - p0) / (p0 - pb); 0 when |p0 - pb| < 1e-12.
double normalized_score(double p, double p0, double pb);

enum class ThresholdScheme { kValue, kEnergy, kMean };

std::string to_string(ThresholdScheme scheme);
ThresholdScheme parse_scheme(const std::string& name);

/// Pixels whose normalized value is > alpha.
BinaryMask value_threshold(const Heatmap& h, double alpha);
/// Smallest set of top-valued pixels (ties by row-major index) whose sum
/// reaches alpha times the total; always at least one pixel.
BinaryMask energy_threshold(const Heatmap& h, double alpha);
/// Pixels > alpha * mean(h).
BinaryMask mean_threshold(const Heatmap& h, double alpha);
BinaryMask threshold(const Heatmap& h, ThresholdScheme scheme, double alpha);

std::optional<Box> tightest_box(const BinaryMask& selected);
double iou(const Box& a, const Box& b);

/// A prediction localizes its object when IOU > 0.5.
inline constexpr double kLocalizationIou = 0.5;
bool localized(const std::optional<Box>& predicted, const Box& truth);

/// Fraction of images whose predicted box is missing or has IOU <= 0.5.
double localization_error(std::span<const std::optional<Box>> predicted, std::span<const Box> truth);

/// Inclusive grid start, start+step, ..., stop, computed without drift.
std::vector<double> alpha_grid(double start, double step, double stop);

struct AlphaSweep {
  std::vector<double> alphas;
  std::vector<double> errors;
  double best_alpha = 0.0;  // first alpha attaining the minimum error
  double best_error = 1.0;
};

AlphaSweep sweep_localization(std::span<const Heatmap> maps, std::span<const Box> truth, ThresholdScheme scheme,
                              std::span<const double> alphas);

/// First row-major maximum as (x, y).
std::pair<int, int> argmax_pixel(const Heatmap& h);

inline constexpr int kDefaultPointingTolerance = 15;

/// Hit iff the heatmap maximum lies within `tolerance` pixels (Chebyshev)
/// of a ground-truth pixel.
bool pointing(const Heatmap& h, const BinaryMask& truth, int tolerance = kDefaultPointingTolerance);

/// Precision of the pointing game over the images accepted by `subset`
/// (all images when empty). Returns 0 for an empty subset.
double pointing_precision(std::span<const Heatmap> maps, std::span<const BinaryMask> truth, int tolerance,
                          const std::function<bool(std::size_t)>& subset = {});

struct DeletionPoint {
  double alpha = 0.0;
  std::optional<Box> box;
  std::optional<double> pprime;
};

struct SuppressionBox {
  double level = 0.0;           // required suppression, e.g. 0.9 for p' <= -0.9
  std::optional<long> area;     // smallest box area achieving it
  std::optional<double> alpha;  // threshold that produced that box
};

struct DeletionCurve {
  std::vector<DeletionPoint> points;
  std::vector<SuppressionBox> smallest;
};

std::vector<double> default_deletion_thresholds();                  // 0, 0.1, ..., 1
inline const std::vector<double> kSuppressionLevels = {0.8, 0.9, 0.95, 0.99};

/// For every threshold: value-threshold h, fit the tightest box, perturb
/// only inside it and report the normalized target score. Then, per
/// suppression level, the smallest box area with p' <= -level.
DeletionCurve deletion_curve(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                             std::span<const int> classes, const Heatmap& h, std::span<const double> thresholds,
                             std::span<const double> levels = kSuppressionLevels);

/// Smooths m with a Gaussian and returns, per alpha, the deletion set
/// {u : 1 - smoothed(u) > alpha} (1 marks a pixel to perturb).
std::vector<BinaryMask> slice_masks(const Mask& m, double extra_blur_sigma, std::span<const double> alphas);

/// Perturbation mask that deletes the selected pixels (0 inside, 1 outside).
Mask deletion_mask(const BinaryMask& selected);

std::size_t count_selected(const BinaryMask& m);

/// One row of the results CSV.
struct EvalRecord {
  std::size_t image_id = 0;
  std::string method;
  std::string scheme;
  double alpha = 0.0;
  std::optional<Box> box;
  double iou = 0.0;
  bool hit = false;
  std::optional<double> pprime;  // deletion protocol only; empty column otherwise
};

inline constexpr const char* kResultsCsvHeader = "image_id,method,scheme,alpha,x0,y0,x1,y1,iou,hit,pprime";
std::string to_csv_row(const EvalRecord& r);

/// Fixed-format real for CSV/text output (shortest round-trip form).
std::string format_real(double v);

}  // namespace maskexplain
