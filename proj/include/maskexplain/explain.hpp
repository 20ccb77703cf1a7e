#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "maskexplain/blackbox.hpp"
#include "maskexplain/core.hpp"
#include "maskexplain/perturb.hpp"
#include "maskexplain/random.hpp"

namespace maskexplain {

enum class Game { kDeletion, kPreservation };

std::string to_string(Game game);
Game parse_game(const std::string& name);

struct ObjectiveConfig {
  Game game = Game::kDeletion;
  double lambda1 = 1e-4;  // L1 area weight
  double lambda2 = 1e-2;  // TV weight
  double beta = 3.0;      // TV exponent
  /// Scores of these classes are summed; usually a single target class.
  std::vector<int> target_classes = {0};
  /// Integer jitter offsets are drawn from [0, jitter_tau) per axis.
  int jitter_tau = 4;
  int jitter_samples_per_step = 1;
  /// Optimize a coarse mask through upsampling (true) or a full-resolution mask.
  bool robust = true;
};

struct OptimConfig {
  double lr = 0.1;
  int iters = 300;
  /// Coarse mask dims; 0 means ceil(image dim / upsample_scale).
  int mask_h = 0;
  int mask_w = 0;
  int upsample_scale = 8;
  double mask_blur_sigma = 5.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct ObjectiveValue {
  double value = 0.0;
  double l1 = 0.0;     // ||1 - m||_1 (deletion) or ||m||_1 (preservation), unweighted
  double tv = 0.0;     // unweighted TV energy
  double score = 0.0;  // mean target score of the perturbed image(s)
  Field grad;          // d value / d m
};

/// The mask-learning objective bound to one (model, perturbation, image).
///
///   deletion:     lambda1 ||1 - m||_1 + lambda2 TV_beta(m) + E_tau f(Phi(x0(. - tau); M(m)))
///   preservation: lambda1 ||m||_1     + lambda2 TV_beta(m) - E_tau f(Phi(x0(. - tau); M(m)))
///
/// M is the upsampled mask when robust, else m itself. Perturbation
/// operators for jittered copies of x0 are built lazily and cached, so an
/// instance must not be shared between threads.
class MaskObjective {
 public:
  MaskObjective(const BlackBox& model, const PerturbSpec& spec, const Image& x0, ObjectiveConfig cfg,
                OptimConfig opt);

  /// Draws cfg.jitter_samples_per_step offsets from rng and averages.
  ObjectiveValue evaluate(const Mask& m, Rng& rng);
  ObjectiveValue evaluate_at(const Mask& m, int dy, int dx);

  /// Coarse mask -> full-resolution mask M.
  Mask full_resolution(const Mask& m) const;
  /// Summed target score of an arbitrary image.
  double target_score(const Image& x) const;
  const Perturbation& perturbation(int dy = 0, int dx = 0);

  int mask_height() const { return upsampler_.mask_height(); }
  int mask_width() const { return upsampler_.mask_width(); }
  const ObjectiveConfig& config() const { return cfg_; }

 private:
  const BlackBox& model_;
  PerturbSpec spec_;
  Image x0_;
  ObjectiveConfig cfg_;
  OptimConfig opt_;
  Upsampler upsampler_;
  std::map<std::pair<int, int>, std::unique_ptr<Perturbation>> cache_;
};

ObjectiveValue objective(const ObjectiveConfig& cfg, const BlackBox& model, const PerturbSpec& spec,
                         const Image& x0, const Mask& m, const OptimConfig& opt, Rng& rng);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  int step = 0;
};

/// Bias-corrected Adam update followed by clamping to [0,1].
std::pair<Mask, AdamState> adam_step(const AdamState& state, const Mask& m, const Field& grad,
                                     const OptimConfig& opt);

struct InitResult {
  Mask mask;
  int radius = -1;  // -1 when the fallback mask was returned
};

/// Smallest centred disk (radius scanned in whole coarse cells) whose
/// deletion suppresses the target score by 99% of the gap to the fully
/// perturbed image. For the preservation game the disk is preserved instead
/// and must keep 99% of that gap. Falls back to all-zero (deletion) or
/// all-one (preservation) when no disk qualifies or the gap is degenerate.
InitResult init_circular_mask(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                              const ObjectiveConfig& cfg, const OptimConfig& opt);

struct TraceEntry {
  int iter = 0;
  double objective = 0.0;
  double l1 = 0.0;
  double tv = 0.0;
  double score = 0.0;
};

struct FinalScores {
  double p0 = 0.0;        // original image
  double p_masked = 0.0;  // perturbed with the learned mask, no jitter
  double pb = 0.0;        // fully perturbed image
  double pprime = 0.0;    // (p_masked - p0) / (p0 - pb)
};

struct ExplainResult {
  Mask init_mask;
  int init_radius = -1;
  Mask mask;            // coarse, optimized variable
  Mask upsampled_mask;  // M at image resolution
  Heatmap saliency;     // 1 - M (deletion) or M (preservation)
  std::vector<TraceEntry> trace;  // iters + 1 entries
  FinalScores scores;
};

/// Circular initialization followed by opt.iters Adam steps on the
/// objective. Deterministic given the configs. Throws NumericError if the
/// objective becomes non-finite.
ExplainResult learn_mask(const BlackBox& model, const PerturbSpec& spec, const Image& x0,
                         const ObjectiveConfig& cfg, const OptimConfig& opt);

/// Per-pixel max over channels of |grad f_c|.
Heatmap gradient_saliency(const BlackBox& model, const Image& x0, int c);
/// Per-pixel max over channels of |grad f_c * x0|.
Heatmap gradient_times_input(const BlackBox& model, const Image& x0, int c);
/// Score drop max(0, f_c(x0) - f_c(occluded)) for every window placement,
/// averaged over the windows covering each pixel.
Heatmap occlusion_map(const BlackBox& model, const PerturbSpec& spec, const Image& x0, int c, int window,
                      int stride);

/// Indices of the k highest scores, best first (ties to the lower index).
std::vector<int> top_classes(const std::vector<double>& scores, int k);

}  // namespace maskexplain
