#include "maskexplain/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "maskexplain/core.hpp"

namespace maskexplain {

double normalized_score(double p, double p0, double pb) {
  const double gap = p0 - pb;
  if (std::abs(gap) < 1e-12) return 0.0;
  return (p - p0) / gap;
}

std::string to_string(ThresholdScheme scheme) {
  switch (scheme) {
    case ThresholdScheme::kValue: return "value";
    case ThresholdScheme::kEnergy: return "energy";
    case ThresholdScheme::kMean: return "mean";
  }
  return "unknown";
}

ThresholdScheme parse_scheme(const std::string& name) {
  if (name == "value") return ThresholdScheme::kValue;
  if (name == "energy") return ThresholdScheme::kEnergy;
  if (name == "mean") return ThresholdScheme::kMean;
  throw InvalidParameter("unknown threshold scheme '" + name + "'");
}

BinaryMask value_threshold(const Heatmap& h, double alpha) {
  const Heatmap n = normalize_heatmap(h);
  BinaryMask out(h.height, h.width, 0);
  for (std::size_t i = 0; i < n.size(); ++i) out.data[i] = n.data[i] > alpha;
  return out;
}

BinaryMask energy_threshold(const Heatmap& h, double alpha) {
  BinaryMask out(h.height, h.width, 0);
  if (h.size() == 0) return out;
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&h](std::size_t a, std::size_t b) { return h.data[a] > h.data[b]; });
  double total = 0.0;
  for (std::size_t i : order) total += h.data[i];
  const double target = alpha * total;
  double acc = 0.0;
  for (std::size_t i : order) {
    out.data[i] = 1;
    acc += h.data[i];
    if (acc >= target) break;
  }
  return out;
}

BinaryMask mean_threshold(const Heatmap& h, double alpha) {
  BinaryMask out(h.height, h.width, 0);
  if (h.size() == 0) return out;
  const double mean = std::accumulate(h.data.begin(), h.data.end(), 0.0) / static_cast<double>(h.size());
  const double tau = alpha * mean;
  for (std::size_t i = 0; i < h.size(); ++i) out.data[i] = h.data[i] > tau;
  return out;
}

BinaryMask threshold(const Heatmap& h, ThresholdScheme scheme, double alpha) {
  switch (scheme) {
    case ThresholdScheme::kValue: return value_threshold(h, alpha);
    case ThresholdScheme::kEnergy: return energy_threshold(h, alpha);
    case ThresholdScheme::kMean: return mean_threshold(h, alpha);
  }
  throw InvalidParameter("unknown threshold scheme");
}

std::optional<Box> tightest_box(const BinaryMask& s) {
  Box b{s.width, s.height, 0, 0};
  bool any = false;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (s(y, x)) {
        any = true;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  if (!any) return std::nullopt;
  return b;
}

double iou(const Box& a, const Box& b) {
  const long iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const long ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const long inter = iw * ih;
  const long uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool localized(const std::optional<Box>& predicted, const Box& truth) {
  return predicted && iou(*predicted, truth) > kLocalizationIou;
}

double localization_error(std::span<const std::optional<Box>> predicted, std::span<const Box> truth) {
  if (predicted.size() != truth.size()) throw ShapeMismatch("prediction and ground-truth counts differ");
  if (truth.empty()) return 0.0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!localized(predicted[i], truth[i])) ++errors;
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

std::vector<double> alpha_grid(double start, double step, double stop) {
  if (!(step > 0.0)) throw InvalidParameter("grid step must be positive");
  std::vector<double> out;
  const long n = std::lround(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) {
    // round to 12 decimals so 0.05 * 3 prints as 0.15
    const double v = start + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

AlphaSweep sweep_localization(std::span<const Heatmap> maps, std::span<const Box> truth, ThresholdScheme scheme,
                              std::span<const double> alphas) {
  if (maps.size() != truth.size()) throw ShapeMismatch("heatmap and ground-truth counts differ");
  AlphaSweep sweep;
  sweep.alphas.assign(alphas.begin(), alphas.end());
  std::vector<std::optional<Box>> boxes(maps.size());
  for (double a : alphas) {
    for (std::size_t i = 0; i < maps.size(); ++i) boxes[i] = tightest_box(threshold(maps[i], scheme, a));
    const double err = localization_error(boxes, truth);
    sweep.errors.push_back(err);
    if (sweep.errors.size() == 1 || err < sweep.best_error) {
      sweep.best_error = err;
      sweep.best_alpha = a;
    }
  }
  return sweep;
}

std::pair<int, int> argmax_pixel(const Heatmap& h) {
  if (h.size() == 0) throw InvalidInput("empty heatmap");
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h.data[i] > h.data[best]) best = i;
  return {static_cast<int>(best % h.width), static_cast<int>(best / h.width)};
}

bool pointing(const Heatmap& h, const BinaryMask& truth, int tolerance) {
  if (!h.same_shape(truth)) throw ShapeMismatch("heatmap and ground truth differ in shape");
  if (tolerance < 0) throw InvalidParameter("pointing tolerance must be >= 0");
  const auto [px, py] = argmax_pixel(h);
  const int y_lo = std::max(0, py - tolerance), y_hi = std::min(h.height - 1, py + tolerance);
  const int x_lo = std::max(0, px - tolerance), x_hi = std::min(h.width - 1, px + tolerance);
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x)
      if (truth(y, x)) return true;
  return false;
}

double pointing_precision(std::span<const Heatmap> maps, std::span<const BinaryMask> truth, int tolerance,
                          const std::function<bool(std::size_t)>& subset) {
  if (maps.size() != truth.size()) throw ShapeMismatch("heatmap and ground-truth counts differ");
  std::size_t n = 0, hits = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (subset && !subset(i)) continue;
    ++n;
    if (pointing(maps[i], truth[i], tolerance)) ++hits;
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<BinaryMask> slice_masks(const Mask& m, double extra_blur_sigma, std::span<const double> alphas) {
  const Field smooth = blur(plane_cast<Field>(m), extra_blur_sigma);
  std::vector<BinaryMask> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    BinaryMask s(m.height, m.width, 0);
    for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = (1.0 - smooth.data[i]) > a;
    out.push_back(std::move(s));
  }
  return out;
}

Mask deletion_mask(const BinaryMask& selected) {
  Mask m(selected.height, selected.width, 1.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (selected.data[i]) m.data[i] = 0.0;
  return m;
}

std::size_t count_selected(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; }));
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_csv_row(const EvalRecord& r) {
  std::ostringstream os;
  os << r.image_id << ',' << r.method << ',' << r.scheme << ',' << format_real(r.alpha) << ',';
  if (r.box)
    os << r.box->x0 << ',' << r.box->y0 << ',' << r.box->x1 << ',' << r.box->y1;
  else
    os << ",,,";
  os << ',' << format_real(r.iou) << ',' << (r.hit ? 1 : 0) << ',';
  if (r.pprime) os << format_real(*r.pprime);
  return os.str();
}

}  // namespace maskexplain
