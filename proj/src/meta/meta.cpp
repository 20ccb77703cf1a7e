#include "maskexplain/meta.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "maskexplain/eval.hpp"
#include "maskexplain/random.hpp"

namespace maskexplain {

std::string to_string(RuleId rule) {
  switch (rule) {
    case RuleId::kQ1: return "q1";
    case RuleId::kQ2: return "q2";
    case RuleId::kQ3: return "q3";
  }
  return "unknown";
}

std::string to_csv_row(const RuleReport& r) {
  std::ostringstream os;
  os << to_string(r.rule) << ',' << r.theta << ',' << format_real(r.epsilon) << ',' << r.n << ','
     << format_real(r.faithfulness_error);
  return os.str();
}

int argmax_class(const std::vector<double>& scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Image rotate_image(const Image& x, int degrees) {
  const int turns = ((degrees % 360) + 360) % 360;
  if (turns % 90 != 0) throw InvalidInput("only multiples of 90 degrees are supported");
  const int q = turns / 90;
  if (q == 0) return x;
  if (q % 2 == 1 && x.height != x.width) throw InvalidInput("90/270 degree rotation needs a square image");
  const int h = x.height, w = x.width;
  Image out = q % 2 == 1 ? Image(w, h, x.channels) : Image(h, w, x.channels);
  for (int y = 0; y < out.height; ++y)
    for (int xx = 0; xx < out.width; ++xx) {
      int sy = 0, sx = 0;
      switch (q) {
        case 1: sy = xx, sx = w - 1 - y; break;          // 90 ccw
        case 2: sy = h - 1 - y, sx = w - 1 - xx; break;  // 180
        case 3: sy = h - 1 - xx, sx = y; break;          // 270 ccw
      }
      for (int c = 0; c < x.channels; ++c) out.at(y, xx, c) = x.at(sy, sx, c);
    }
  return out;
}

RuleReport faithfulness_q1(const BlackBox& model, int c, double threshold, std::span<const LabeledSample> samples) {
  if (samples.empty()) throw InvalidInput("faithfulness needs at least one sample");
  std::size_t failures = 0;
  for (const LabeledSample& s : samples) {
    const bool predicted = model.score(s.x, c) >= threshold;
    if (predicted != s.in_class) ++failures;
  }
  RuleReport r;
  r.rule = RuleId::kQ1;
  r.n = samples.size();
  r.faithfulness_error = static_cast<double>(failures) / static_cast<double>(r.n);
  return r;
}

namespace {

void check_angles(std::span<const int> angles) {
  for (int a : angles)
    if (a != 90 && a != 180 && a != 270) throw InvalidInput("rotation angles must be 90, 180 or 270");
}

// Q2 failures per angle.
std::vector<std::size_t> rotation_failures(const BlackBox& model, std::span<const Image> samples,
                                           std::span<const int> angles) {
  std::vector<std::size_t> failures(angles.size(), 0);
  for (const Image& x : samples) {
    const int base = argmax_class(model.score(x));
    for (std::size_t k = 0; k < angles.size(); ++k)
      if (argmax_class(model.score(rotate_image(x, angles[k]))) != base) ++failures[k];
  }
  return failures;
}

}  // namespace

RuleReport faithfulness_q2(const BlackBox& model, std::span<const Image> samples, std::span<const int> angles) {
  if (samples.empty() || angles.empty()) throw InvalidInput("faithfulness needs samples and angles");
  check_angles(angles);
  const auto failures = rotation_failures(model, samples, angles);
  std::size_t total = 0;
  for (auto f : failures) total += f;
  RuleReport r;
  r.rule = RuleId::kQ2;
  r.n = samples.size() * angles.size();
  r.faithfulness_error = static_cast<double>(total) / static_cast<double>(r.n);
  if (angles.size() == 1) r.theta = angles[0];
  return r;
}

RuleReport max_theta_rule(const BlackBox& model, std::span<const Image> samples, std::span<const int> angles,
                          double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must lie in [0,1]");
  if (samples.empty()) throw InvalidInput("faithfulness needs at least one sample");
  check_angles(angles);
  if (!std::is_sorted(angles.begin(), angles.end())) throw InvalidInput("angles must be ascending");
  const auto failures = rotation_failures(model, samples, angles);
  RuleReport r;
  r.rule = RuleId::kQ3;
  r.epsilon = epsilon;
  std::size_t pooled = 0;
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const double err = static_cast<double>(failures[k]) / static_cast<double>(samples.size());
    if (err > epsilon) break;
    r.theta = angles[k];
    pooled += failures[k];
    r.n += samples.size();
  }
  r.faithfulness_error = r.n == 0 ? 0.0 : static_cast<double>(pooled) / static_cast<double>(r.n);
  if (r.n == 0) r.n = samples.size();
  return r;
}

Image ridge_saliency(const BlackBox& model, const Image& x0, int c, const RidgeConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !(cfg.sigma > 0.0) || cfg.n < 1) throw InvalidParameter("invalid ridge configuration");
  const int d = static_cast<int>(x0.size());
  if (d > kMaxRidgeDimension) throw InvalidInput("ridge saliency is limited to 256 input dimensions");
  if (cfg.lambda == 0.0 && cfg.n < d) throw NumericError("unregularized ridge system is singular (n < dimension)");

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double f0 = model.score(x0, c);
  Eigen::MatrixXd deltas(cfg.n, d);
  Eigen::VectorXd responses(cfg.n);
  Image x = x0;
  for (int s = 0; s < cfg.n; ++s) {
    for (int i = 0; i < d; ++i) {
      const double delta = cfg.sigma * normal(rng);
      deltas(s, i) = delta;
      x.data[i] = x0.data[i] + delta;
    }
    responses(s) = model.score(x, c) - f0;
  }
  const double inv_n = 1.0 / cfg.n;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) * cfg.lambda;
  a.selfadjointView<Eigen::Lower>().rankUpdate(deltas.transpose(), inv_n);
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
  const Eigen::VectorXd b = deltas.transpose() * responses * inv_n;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("ridge normal equations could not be factored");
  const Eigen::VectorXd w = ldlt.solve(b);
  Image out(x0.height, x0.width, x0.channels);
  for (int i = 0; i < d; ++i) {
    if (!std::isfinite(w(i))) throw NumericError("ridge solution is not finite");
    out.data[i] = w(i);
  }
  return out;
}

}  // namespace maskexplain
