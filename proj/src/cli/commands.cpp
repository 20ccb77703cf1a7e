#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "maskexplain/blackbox.hpp"
#include "maskexplain/cli.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/eval.hpp"
#include "maskexplain/explain.hpp"
#include "maskexplain/meta.hpp"
#include "maskexplain/model_io.hpp"
#include "maskexplain/parallel.hpp"
#include "maskexplain/random.hpp"
#include "maskexplain/shapes.hpp"
#include "maskexplain/tensor_io.hpp"
#include "maskexplain/tiny_cnn.hpp"

namespace fs = std::filesystem;

namespace maskexplain::cli {
namespace {

const CLI::Range kPositive(1, std::numeric_limits<int>::max(), "POSITIVE");
const CLI::Range kNonNegative(0, std::numeric_limits<int>::max(), "NONNEGATIVE");

std::string render(double v) { return format_real(v); }
std::string render(int v) { return std::to_string(v); }
std::string render(std::uint64_t v) { return std::to_string(v); }
std::string render(bool v) { return v ? "true" : "false"; }
std::string render(const std::string& v) { return v; }

double parse_real(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw UsageError("cannot parse '" + text + "' in " + what);
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(parse_real(part, what));
  return out;
}

/// "start:step:stop" grid or a comma list.
std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  const auto parts = split(text, ':');
  if (parts.size() == 3)
    return alpha_grid(parse_real(parts[0], what), parse_real(parts[1], what), parse_real(parts[2], what));
  if (parts.size() != 1) throw UsageError(what + " must be start:step:stop or a comma list");
  auto v = parse_list(text, what);
  if (v.empty()) throw UsageError(what + " is empty");
  return v;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

/// A subcommand whose options are mirrored into config.txt.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)), name_(name) {
    app_->add_option("--out", out_, "Output directory")->required();
    app_->add_option("--config", config_, "Replay a config.txt from an earlier run (explicit flags win)");
  }
  virtual ~Command() = default;

  template <class T>
  CLI::Option* option(const std::string& key, T& ref, const std::string& description) {
    entries_.emplace_back(key, [&ref] { return render(ref); });
    return app_->add_option("--" + key, ref, description)
        ->capture_default_str()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  CLI::Option* flag(const std::string& key, bool& ref, const std::string& description) {
    entries_.emplace_back(key, [&ref] { return render(ref); });
    return app_->add_flag("--" + key, ref, description)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  bool selected() const { return app_->parsed(); }
  const std::string& name() const { return name_; }

  RunConfig resolved() const {
    RunConfig cfg;
    cfg.command = name_;
    for (const auto& [key, get] : entries_) cfg.set(key, get());
    return cfg;
  }

  void execute(std::ostream& out) {
    const fs::path dir(out_);
    ensure_dir(dir);
    resolved().save(dir / "config.txt");
    run(dir, out);
  }

 protected:
  virtual void run(const fs::path& dir, std::ostream& out) = 0;
  CLI::App* app_;

 private:
  std::string name_;
  std::string out_;
  std::string config_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

// ---------------------------------------------------------------------------
// shared option groups

struct PerturbOptions {
  std::string kind;
  double sigma0 = 10.0;
  double noise_sigma = 0.2;
  std::string mu0;
  int blur_levels = 8;
  bool flip = false;

  explicit PerturbOptions(std::string default_kind) : kind(std::move(default_kind)) {}

  void add(Command& cmd) {
    cmd.option("perturb", kind, "Perturbation: constant, noise or blur")
        ->check(CLI::IsMember({"constant", "noise", "blur"}));
    cmd.option("sigma0", sigma0, "Maximum blur std in pixels");
    cmd.option("noise-sigma", noise_sigma, "Noise std around mu0");
    cmd.option("mu0", mu0, "Replacement colour per channel, comma separated (default: channel means)");
    cmd.option("blur-levels", blur_levels, "Blur pyramid intervals");
    cmd.flag("flip-blur-convention", flip, "Blur with sigma0 * m instead of sigma0 * (1 - m)");
  }

  PerturbSpec spec(std::uint64_t noise_seed) const {
    PerturbSpec s;
    s.kind = parse_perturb_kind(kind);
    s.sigma0 = sigma0;
    s.noise_sigma = noise_sigma;
    s.mu0 = parse_list(mu0, "--mu0");
    s.blur_levels = blur_levels;
    s.flip_blur_convention = flip;
    s.noise_seed = noise_seed;
    return s;
  }
};

/// One image (--image [--index]) or a corpus (--corpus [--limit]).
struct InputOptions {
  std::string image;
  int index = 0;
  std::string corpus;
  int limit = 0;
  int cls = -1;

  void add(Command& cmd) {
    cmd.option("image", image, "MPT1 image [H,W,C] or stack [N,H,W,C]");
    cmd.option("index", index, "Image index within a stack")->check(kNonNegative);
    cmd.option("corpus", corpus, "Corpus directory (processes every image)");
    cmd.option("limit", limit, "Only the first N corpus images (0 = all)")->check(kNonNegative);
    cmd.option("class", cls, "Target class (-1: corpus label, or the top class for a single image)");
  }

  struct Item {
    std::size_t id = 0;
    Image x;
    int label = -1;
  };

  bool corpus_mode() const { return !corpus.empty(); }

  std::vector<Item> load() const {
    if (image.empty() == corpus.empty()) throw UsageError("give exactly one of --image or --corpus");
    std::vector<Item> items;
    if (!corpus.empty()) {
      const ShapeCorpus c = load_corpus(corpus);
      const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, c.size()) : c.size();
      for (std::size_t i = 0; i < n; ++i) items.push_back({i, c.images[i], c.labels[i]});
      return items;
    }
    const Tensor t = read_mpt1(image);
    if (t.dims.size() == 4) {
      auto all = unstack_images(t);
      if (index >= static_cast<int>(all.size())) throw UsageError("--index is past the end of the stack");
      items.push_back({static_cast<std::size_t>(index), std::move(all[index]), -1});
    } else {
      if (index != 0) throw UsageError("--index needs an image stack");
      items.push_back({0, image_from_tensor(t), -1});
    }
    return items;
  }

  int target(const BlackBox& model, const Item& item) const {
    if (cls >= 0) {
      if (cls >= model.num_classes()) throw InvalidClass("--class is out of range for this model");
      return cls;
    }
    if (item.label >= 0) return item.label;
    return argmax_class(model.score(item.x));
  }
};

std::string csv_join(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out.push_back(',');
    out += c;
    first = false;
  }
  return out;
}

// ---------------------------------------------------------------------------

class SynthCommand : public Command {
 public:
  explicit SynthCommand(CLI::App& app) : Command(app, "synth", "Generate the synthetic shape corpus") {
    option("n", n_, "Number of images")->required()->check(kPositive);
    option("seed", seed_, "Random seed");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const ShapeCorpus c = generate_shape_corpus(n_, seed_);
    save_corpus(dir, c);
    out << "wrote " << c.size() << " images\n";
  }

 private:
  int n_ = 0;
  std::uint64_t seed_ = 0;
};

class TrainCommand : public Command {
 public:
  explicit TrainCommand(CLI::App& app) : Command(app, "train", "Train the toy CNN on a shape corpus") {
    option("corpus", corpus_, "Corpus directory")->required();
    option("epochs", opts_.epochs, "Training epochs")->check(kNonNegative);
    option("lr", opts_.lr, "SGD learning rate");
    option("batch-size", opts_.batch_size, "Minibatch size")->check(kPositive);
    option("holdout", holdout_, "Hold out the last N images for testing")->check(kNonNegative);
    option("seed", opts_.seed, "Random seed");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const ShapeCorpus all = load_corpus(corpus_);
    if (static_cast<std::size_t>(holdout_) >= all.size()) throw UsageError("--holdout leaves no training images");
    const std::size_t split = all.size() - holdout_;
    const ShapeCorpus train = all.slice(0, split);
    const ShapeCorpus test = all.slice(split, all.size());
    TrainReport report;
    const TinyCnn net = train_tiny_cnn(train, holdout_ > 0 ? &test : nullptr, opts_, &report);
    save_model(dir, net);

    std::ostringstream log;
    log << "epoch,loss\n";
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
      log << e + 1 << ',' << format_real(report.epoch_loss[e]) << '\n';
    write_text(dir / "train_log.csv", log.str());

    const double train_acc = accuracy(net, train);
    std::ostringstream rep;
    rep << "train_accuracy=" << format_real(train_acc) << '\n';
    if (holdout_ > 0) rep << "test_accuracy=" << format_real(accuracy(net, test)) << '\n';
    write_text(dir / "report.txt", rep.str());
    out << rep.str();
    out << "final accuracy " << format_real(holdout_ > 0 ? accuracy(net, test) : train_acc) << '\n';
  }

 private:
  std::string corpus_;
  TrainOptions opts_;
  int holdout_ = 0;
};

class ExplainCommand : public Command {
 public:
  explicit ExplainCommand(CLI::App& app)
      : Command(app, "explain", "Learn a perturbation mask explaining a model decision"), perturb_("blur") {
    option("model", model_, "Model directory")->required();
    input_.add(*this);
    flag("top5", top5_, "Target the sum of the top-5 predicted classes");
    option("game", game_, "deletion or preservation")->check(CLI::IsMember({"deletion", "preservation"}));
    perturb_.add(*this);
    option("lambda1", cfg_.lambda1, "L1 area weight");
    option("lambda2", cfg_.lambda2, "TV weight");
    option("beta", cfg_.beta, "TV exponent");
    option("lr", opt_.lr, "Adam learning rate");
    option("iters", opt_.iters, "Optimization steps")->check(kNonNegative);
    option("scale", opt_.upsample_scale, "Mask upsampling factor")->check(kPositive);
    option("mask-blur", opt_.mask_blur_sigma, "Std of the upsampled-mask blur, in image pixels");
    option("jitter", cfg_.jitter_tau, "Jitter offsets drawn from [0, jitter)")->check(kNonNegative);
    option("jitter-samples", cfg_.jitter_samples_per_step, "Jitter draws per step")->check(kPositive);
    option("robust", cfg_.robust, "Optimize a coarse upsampled mask (false: full-resolution mask)");
    option("seed", seed_, "Random seed");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const auto model = load_model(model_);
    const auto items = input_.load();
    std::vector<ExplainResult> results(items.size());
    std::vector<std::vector<int>> classes(items.size());
    parallel_for(items.size(), [&](std::size_t k) {
      const auto& item = items[k];
      ObjectiveConfig cfg = cfg_;
      cfg.game = parse_game(game_);
      if (top5_) {
        cfg.target_classes = top_classes(model->score(item.x), 5);
      } else {
        cfg.target_classes = {input_.target(*model, item)};
      }
      OptimConfig opt = opt_;
      opt.seed = derive_seed(seed_, 2 * item.id);
      const PerturbSpec spec = perturb_.spec(derive_seed(seed_, 2 * item.id + 1));
      classes[k] = cfg.target_classes;
      results[k] = learn_mask(*model, spec, item.x, cfg, opt);
    });

    if (input_.corpus_mode()) {
      std::vector<Heatmap> sal, masks;
      std::ostringstream scores;
      scores << "image_id,class,init_radius,p0,p_masked,pb,pprime\n";
      for (std::size_t k = 0; k < items.size(); ++k) {
        sal.push_back(results[k].saliency);
        masks.push_back(plane_cast<Heatmap>(results[k].upsampled_mask));
        const auto& s = results[k].scores;
        scores << csv_join({std::to_string(items[k].id), class_list(classes[k]),
                            std::to_string(results[k].init_radius), format_real(s.p0), format_real(s.p_masked),
                            format_real(s.pb), format_real(s.pprime)})
               << '\n';
      }
      write_mpt1(dir / "heatmaps.mpt1", stack_heatmaps(sal));
      write_mpt1(dir / "masks.mpt1", stack_heatmaps(masks));
      write_text(dir / "scores.csv", scores.str());
      out << "explained " << items.size() << " images\n";
      return;
    }

    const ExplainResult& r = results[0];
    write_mpt1(dir / "mask.mpt1", to_tensor(r.mask));
    write_mpt1(dir / "init_mask.mpt1", to_tensor(r.init_mask));
    write_mpt1(dir / "upsampled_mask.mpt1", to_tensor(r.upsampled_mask));
    write_mpt1(dir / "saliency.mpt1", to_tensor(r.saliency));
    write_pgm(dir / "saliency.pgm", r.saliency);
    std::ostringstream trace;
    trace << "iter,objective,l1,tv,score\n";
    for (const auto& t : r.trace)
      trace << csv_join({std::to_string(t.iter), format_real(t.objective), format_real(t.l1), format_real(t.tv),
                         format_real(t.score)})
            << '\n';
    write_text(dir / "trace.csv", trace.str());

    RunConfig meta = resolved();
    meta.set("target_classes", class_list(classes[0], ' '));
    meta.set("mask_height", std::to_string(r.mask.height));
    meta.set("mask_width", std::to_string(r.mask.width));
    meta.set("init_radius", std::to_string(r.init_radius));
    meta.set("p0", format_real(r.scores.p0));
    meta.set("p_masked", format_real(r.scores.p_masked));
    meta.set("pb", format_real(r.scores.pb));
    meta.set("pprime", format_real(r.scores.pprime));
    std::string text = meta.to_text();
    write_text(dir / "meta.txt", text);
    out << "p0=" << format_real(r.scores.p0) << " p_masked=" << format_real(r.scores.p_masked)
        << " pb=" << format_real(r.scores.pb) << " pprime=" << format_real(r.scores.pprime) << '\n';
  }

 private:
  static std::string class_list(const std::vector<int>& cs, char sep = ' ') {
    std::string s;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (i) s.push_back(sep);
      s += std::to_string(cs[i]);
    }
    return s;
  }

  std::string model_;
  InputOptions input_;
  bool top5_ = false;
  std::string game_ = "deletion";
  PerturbOptions perturb_;
  ObjectiveConfig cfg_;
  OptimConfig opt_;
  std::uint64_t seed_ = 0;
};

class SaliencyCommand : public Command {
 public:
  explicit SaliencyCommand(CLI::App& app)
      : Command(app, "saliency", "Gradient, gradient-times-input or occlusion heatmaps"), perturb_("constant") {
    option("model", model_, "Model directory")->required();
    input_.add(*this);
    option("method", method_, "grad, gradxinput or occlusion")
        ->check(CLI::IsMember({"grad", "gradxinput", "occlusion"}));
    option("window", window_, "Occlusion window in pixels")->check(kPositive);
    option("stride", stride_, "Occlusion stride in pixels")->check(kPositive);
    perturb_.add(*this);
    option("seed", seed_, "Random seed (noise occlusion)");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const auto model = load_model(model_);
    const auto items = input_.load();
    std::vector<Heatmap> maps(items.size());
    parallel_for(items.size(), [&](std::size_t k) {
      const auto& item = items[k];
      const int c = input_.target(*model, item);
      if (method_ == "grad") {
        maps[k] = gradient_saliency(*model, item.x, c);
      } else if (method_ == "gradxinput") {
        maps[k] = gradient_times_input(*model, item.x, c);
      } else {
        maps[k] = occlusion_map(*model, perturb_.spec(derive_seed(seed_, item.id)), item.x, c, window_, stride_);
      }
    });
    if (input_.corpus_mode()) {
      write_mpt1(dir / "heatmaps.mpt1", stack_heatmaps(maps));
    } else {
      write_mpt1(dir / "saliency.mpt1", to_tensor(maps[0]));
      write_pgm(dir / "saliency.pgm", maps[0]);
    }
    out << "wrote " << maps.size() << " heatmaps\n";
  }

 private:
  std::string model_;
  InputOptions input_;
  std::string method_ = "grad";
  int window_ = 8;
  int stride_ = 4;
  PerturbOptions perturb_;
  std::uint64_t seed_ = 0;
};

class EvalCommand : public Command {
 public:
  explicit EvalCommand(CLI::App& app)
      : Command(app, "eval", "Localization, pointing, deletion and slice protocols"), perturb_("blur") {
    option("protocol", protocol_, "localization, pointing, deletion or slices")
        ->check(CLI::IsMember({"localization", "pointing", "deletion", "slices"}));
    option("model", model_, "Model directory (deletion, slices)");
    option("corpus", corpus_, "Corpus directory with ground truth")->required();
    option("heatmaps", heatmaps_, "Heatmap stack, or a directory holding heatmaps.mpt1 / masks.mpt1")->required();
    option("method", method_, "Method name recorded in the CSVs");
    option("schemes", schemes_, "Threshold schemes, comma separated");
    option("value-grid", value_grid_, "Alpha grid for value thresholding");
    option("energy-grid", energy_grid_, "Alpha grid for energy thresholding");
    option("mean-grid", mean_grid_, "Alpha grid for mean thresholding");
    option("holdout", holdout_, "Select alpha* on the first N images, report on the rest (0: all)")
        ->check(kNonNegative);
    option("tolerance", tolerance_, "Pointing tolerance in pixels")->check(kNonNegative);
    option("thresholds", thresholds_, "Deletion heatmap thresholds");
    option("slice-blur", slice_blur_, "Extra blur before slicing masks");
    option("slice-grid", slice_grid_, "Slice thresholds");
    option("class", cls_, "Target class (-1: corpus label)");
    perturb_.add(*this);
    option("seed", seed_, "Random seed (noise perturbation)");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const ShapeCorpus corpus = load_corpus(corpus_);
    const std::string file = protocol_ == "slices" ? "masks.mpt1" : "heatmaps.mpt1";
    const fs::path src = fs::is_directory(heatmaps_) ? fs::path(heatmaps_) / file : fs::path(heatmaps_);
    const std::vector<Heatmap> maps = unstack_heatmaps(read_mpt1(src));
    if (maps.size() > corpus.size()) throw ShapeMismatch("more heatmaps than corpus images");
    if (protocol_ == "localization") {
      localization(dir, corpus, maps, out);
    } else if (protocol_ == "pointing") {
      pointing_game(dir, corpus, maps, out);
    } else {
      if (model_.empty()) throw UsageError("--model is required for the " + protocol_ + " protocol");
      const auto model = load_model(model_);
      if (protocol_ == "deletion") {
        deletion(dir, *model, corpus, maps, out);
      } else {
        slices(dir, *model, corpus, maps, out);
      }
    }
  }

 private:
  int target(const ShapeCorpus& c, std::size_t i) const { return cls_ >= 0 ? cls_ : c.labels[i]; }

  void localization(const fs::path& dir, const ShapeCorpus& corpus, const std::vector<Heatmap>& maps,
                    std::ostream& out) {
    const std::size_t n = maps.size();
    if (static_cast<std::size_t>(holdout_) >= n && holdout_ > 0) throw UsageError("--holdout leaves no images");
    const std::size_t sel_end = holdout_ > 0 ? holdout_ : n;
    const std::size_t rep_begin = holdout_ > 0 ? holdout_ : 0;
    std::vector<Box> truth(corpus.boxes.begin(), corpus.boxes.begin() + n);

    std::ostringstream results, summary, best;
    results << kResultsCsvHeader << '\n';
    summary << "method,scheme,alpha,error\n";
    best << "method,scheme,alpha_star,error\n";
    for (const auto& name : split(schemes_, ',')) {
      const ThresholdScheme scheme = parse_scheme(name);
      const std::string& grid_text = scheme == ThresholdScheme::kValue    ? value_grid_
                                     : scheme == ThresholdScheme::kEnergy ? energy_grid_
                                                                          : mean_grid_;
      const auto grid = parse_grid(grid_text, name + " grid");
      std::vector<std::vector<std::optional<Box>>> boxes(grid.size(), std::vector<std::optional<Box>>(n));
      for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t i = 0; i < n; ++i) {
          boxes[a][i] = tightest_box(threshold(maps[i], scheme, grid[a]));
          EvalRecord r;
          r.image_id = i;
          r.method = method_;
          r.scheme = name;
          r.alpha = grid[a];
          r.box = boxes[a][i];
          r.iou = r.box ? iou(*r.box, truth[i]) : 0.0;
          r.hit = localized(r.box, truth[i]);
          results << to_csv_row(r) << '\n';
        }
      auto error_on = [&](std::size_t a, std::size_t lo, std::size_t hi) {
        return localization_error(std::span(boxes[a]).subspan(lo, hi - lo), std::span(truth).subspan(lo, hi - lo));
      };
      std::size_t star = 0;
      double star_err = 2.0;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        summary << csv_join({method_, name, format_real(grid[a]), format_real(error_on(a, 0, n))}) << '\n';
        const double e = error_on(a, 0, sel_end);
        if (e < star_err) {
          star_err = e;
          star = a;
        }
      }
      const double reported = error_on(star, rep_begin, n);
      best << csv_join({method_, name, format_real(grid[star]), format_real(reported)}) << '\n';
      out << name << ": alpha*=" << format_real(grid[star]) << " error=" << format_real(reported) << '\n';
    }
    write_text(dir / "results.csv", results.str());
    write_text(dir / "summary.csv", summary.str());
    write_text(dir / "alpha_star.csv", best.str());
  }

  void pointing_game(const fs::path& dir, const ShapeCorpus& corpus, const std::vector<Heatmap>& maps,
                     std::ostream& out) {
    std::vector<BinaryMask> truth;
    std::ostringstream rows;
    rows << "image_id,method,x,y,hit\n";
    for (std::size_t i = 0; i < maps.size(); ++i) {
      truth.push_back(box_region(maps[i].height, maps[i].width, corpus.boxes[i]));
      const auto [x, y] = argmax_pixel(maps[i]);
      const bool hit = pointing(maps[i], truth.back(), tolerance_);
      rows << csv_join({std::to_string(i), method_, std::to_string(x), std::to_string(y), hit ? "1" : "0"}) << '\n';
    }
    const double precision = pointing_precision(maps, truth, tolerance_);
    write_text(dir / "pointing.csv", rows.str());
    write_text(dir / "pointing_summary.csv", "method,tolerance,n,precision\n" +
                                                 csv_join({method_, std::to_string(tolerance_),
                                                           std::to_string(maps.size()), format_real(precision)}) +
                                                 "\n");
    out << "pointing precision " << format_real(precision) << '\n';
  }

  void deletion(const fs::path& dir, const BlackBox& model, const ShapeCorpus& corpus,
                const std::vector<Heatmap>& maps, std::ostream& out) {
    const auto grid = parse_grid(thresholds_, "--thresholds");
    std::vector<DeletionCurve> curves(maps.size());
    parallel_for(maps.size(), [&](std::size_t i) {
      const int c[] = {target(corpus, i)};
      curves[i] = deletion_curve(model, perturb_.spec(derive_seed(seed_, i)), corpus.images[i], c, maps[i], grid);
    });
    std::ostringstream rows, levels, summary;
    rows << "image_id,alpha,x0,y0,x1,y1,area,pprime\n";
    levels << "image_id,level,area,alpha\n";
    summary << "method,level,achieved,mean_area\n";
    std::vector<double> area_sum(kSuppressionLevels.size(), 0.0);
    std::vector<std::size_t> achieved(kSuppressionLevels.size(), 0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      for (const auto& p : curves[i].points) {
        rows << i << ',' << format_real(p.alpha) << ',';
        if (p.box)
          rows << p.box->x0 << ',' << p.box->y0 << ',' << p.box->x1 << ',' << p.box->y1 << ',' << p.box->area()
               << ',' << format_real(*p.pprime);
        else
          rows << ",,,,,";
        rows << '\n';
      }
      for (std::size_t l = 0; l < curves[i].smallest.size(); ++l) {
        const auto& s = curves[i].smallest[l];
        levels << i << ',' << format_real(s.level) << ',';
        if (s.area) {
          levels << *s.area << ',' << format_real(*s.alpha);
          area_sum[l] += static_cast<double>(*s.area);
          ++achieved[l];
        } else {
          levels << ',';
        }
        levels << '\n';
      }
    }
    for (std::size_t l = 0; l < kSuppressionLevels.size(); ++l) {
      summary << method_ << ',' << format_real(kSuppressionLevels[l]) << ',' << achieved[l] << ',';
      if (achieved[l]) summary << format_real(area_sum[l] / static_cast<double>(achieved[l]));
      summary << '\n';
    }
    write_text(dir / "deletion.csv", rows.str());
    write_text(dir / "deletion_levels.csv", levels.str());
    write_text(dir / "deletion_summary.csv", summary.str());
    out << summary.str();
  }

  void slices(const fs::path& dir, const BlackBox& model, const ShapeCorpus& corpus,
              const std::vector<Heatmap>& maps, std::ostream& out) {
    const auto grid = parse_grid(slice_grid_, "--slice-grid");
    std::vector<std::string> lines(maps.size());
    parallel_for(maps.size(), [&](std::size_t i) {
      const Image& x = corpus.images[i];
      const int c = target(corpus, i);
      const Perturbation phi(perturb_.spec(derive_seed(seed_, i)), x);
      const double p0 = model.score(x, c);
      const double pb = model.score(phi.fully_perturbed(), c);
      const auto sl = slice_masks(plane_cast<Mask>(maps[i]), slice_blur_, grid);
      std::ostringstream os;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        const double p = model.score(phi.apply(deletion_mask(sl[a])), c);
        os << i << ',' << format_real(grid[a]) << ',' << count_selected(sl[a]) << ','
           << format_real(normalized_score(p, p0, pb)) << '\n';
      }
      lines[i] = os.str();
    });
    std::string text = "image_id,alpha,deleted,pprime\n";
    for (const auto& l : lines) text += l;
    write_text(dir / "slices.csv", text);
    out << "sliced " << maps.size() << " masks\n";
  }

  std::string protocol_ = "localization";
  std::string model_;
  std::string corpus_;
  std::string heatmaps_;
  std::string method_ = "mask";
  std::string schemes_ = "value,energy,mean";
  std::string value_grid_ = "0:0.05:0.95";
  std::string energy_grid_ = "0:0.05:0.95";
  std::string mean_grid_ = "0:0.5:5";
  int holdout_ = 0;
  int tolerance_ = kDefaultPointingTolerance;
  std::string thresholds_ = "0:0.1:1";
  double slice_blur_ = 0.0;
  std::string slice_grid_ = "0:0.05:0.95";
  int cls_ = -1;
  PerturbOptions perturb_;
  std::uint64_t seed_ = 0;
};

class MetaCommand : public Command {
 public:
  explicit MetaCommand(CLI::App& app) : Command(app, "meta", "Faithfulness of explanatory rules and ridge saliency") {
    option("rule", rule_, "q1, q2, q3 or ridge")->check(CLI::IsMember({"q1", "q2", "q3", "ridge"}));
    option("model", model_, "Model directory")->required();
    input_.add(*this);
    option("threshold", threshold_, "Q1 score threshold");
    option("angles", angles_, "Rotation angles (multiples of 90), comma separated");
    option("epsilon", epsilon_, "Q3 tolerated error; a comma list gives one row each");
    option("ridge-lambda", ridge_.lambda, "Ridge weight");
    option("ridge-sigma", ridge_.sigma, "Sampling std around the image");
    option("ridge-n", ridge_.n, "Number of samples")->check(kPositive);
    option("seed", seed_, "Random seed");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    const auto model = load_model(model_);
    const auto items = input_.load();
    if (rule_ == "ridge") {
      if (items.size() != 1) throw UsageError("ridge saliency explains a single --image");
      RidgeConfig cfg = ridge_;
      cfg.seed = derive_seed(seed_, 0);
      const int c = input_.target(*model, items[0]);
      const Image w = ridge_saliency(*model, items[0].x, c, cfg);
      write_mpt1(dir / "ridge.mpt1", to_tensor(w));
      write_mpt1(dir / "gradient.mpt1", to_tensor(model->gradient(items[0].x, c)));
      out << "wrote ridge weights\n";
      return;
    }
    std::vector<int> angles;
    for (double a : parse_list(angles_, "--angles")) angles.push_back(static_cast<int>(a));
    std::sort(angles.begin(), angles.end());
    std::vector<RuleReport> reports;
    if (rule_ == "q1") {
      if (input_.cls < 0) throw UsageError("q1 needs --class");
      std::vector<LabeledSample> samples;
      for (const auto& it : items) samples.push_back({it.x, it.label == input_.cls});
      reports.push_back(faithfulness_q1(*model, input_.cls, threshold_, samples));
    } else {
      std::vector<Image> xs;
      for (const auto& it : items) xs.push_back(it.x);
      if (rule_ == "q2") {
        reports.push_back(faithfulness_q2(*model, xs, angles));
      } else {
        for (double eps : parse_list(epsilon_, "--epsilon")) reports.push_back(max_theta_rule(*model, xs, angles, eps));
      }
    }
    std::string text = std::string(kRuleCsvHeader) + "\n";
    for (const auto& r : reports) text += to_csv_row(r) + "\n";
    write_text(dir / "rules.csv", text);
    out << text;
  }

 private:
  std::string rule_ = "q1";
  std::string model_;
  InputOptions input_;
  double threshold_ = 0.5;
  std::string angles_ = "90,180,270";
  std::string epsilon_ = "0.1";
  RidgeConfig ridge_;
  std::uint64_t seed_ = 0;
};

class FixtureCommand : public Command {
 public:
  explicit FixtureCommand(CLI::App& app)
      : Command(app, "fixture", "Write an analytic model with a matching image and ground truth") {
    option("kind", kind_, "region or linear")->check(CLI::IsMember({"region", "linear"}));
    option("size", size_, "Image side in pixels")->check(CLI::Range(4, 256));
    option("region", region_, "Side of the bright square region")->check(kPositive);
    option("seed", seed_, "Random seed");
  }

 protected:
  void run(const fs::path& dir, std::ostream& out) override {
    if (region_ > size_) throw UsageError("--region exceeds --size");
    Rng rng(derive_seed(seed_, 0));
    std::uniform_int_distribution<int> pos(0, size_ - region_);
    const Box box{pos(rng), pos(rng), 0, 0};
    const Box region{box.x0, box.y0, box.x0 + region_, box.y0 + region_};
    std::uniform_real_distribution<double> bg(0.0, 0.3);
    Image x(size_, size_, 1);
    for (int y = 0; y < size_; ++y)
      for (int xx = 0; xx < size_; ++xx) x.at(y, xx) = region.contains(xx, y) ? 1.0 : bg(rng);

    if (kind_ == "region") {
      save_model(dir / "model", RegionMeanModel({size_, size_, 1}, {box_region(size_, size_, region)}));
    } else {
      std::normal_distribution<double> n(0.0, 1.0);
      Image w(size_, size_, 1);
      for (double& v : w.data) v = n(rng);
      save_model(dir / "model", LinearModel(w, 0.0));
    }
    write_mpt1(dir / "image.mpt1", to_tensor(x));
    ShapeCorpus c;
    c.images = {x};
    c.labels = {0};
    c.boxes = {region};
    save_corpus(dir / "corpus", c);
    out << "region " << region.x0 << ' ' << region.y0 << ' ' << region.x1 << ' ' << region.y1 << '\n';
  }

 private:
  std::string kind_ = "region";
  int size_ = 16;
  int region_ = 4;
  std::uint64_t seed_ = 0;
};

/// Expands "--config FILE" into the recorded flags, placed before the
/// explicit ones so that those take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  if (!path) return args;
  const RunConfig cfg = RunConfig::load(*path);
  if (cfg.command != args[0])
    throw UsageError("config was written by '" + cfg.command + "', not '" + args[0] + "'");
  std::vector<std::string> out = {args[0]};
  for (auto& a : cfg.to_arguments()) out.push_back(std::move(a));
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn and evaluate perturbation-mask explanations of image classifiers", "maskexplain"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<SynthCommand>(app));
  commands.push_back(std::make_unique<TrainCommand>(app));
  commands.push_back(std::make_unique<ExplainCommand>(app));
  commands.push_back(std::make_unique<SaliencyCommand>(app));
  commands.push_back(std::make_unique<EvalCommand>(app));
  commands.push_back(std::make_unique<MetaCommand>(app));
  commands.push_back(std::make_unique<FixtureCommand>(app));

  try {
    std::vector<std::string> expanded = expand_config(args);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  for (auto& cmd : commands) {
    if (!cmd->selected()) continue;
    try {
      cmd->execute(out);
      return kExitOk;
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace maskexplain::cli
