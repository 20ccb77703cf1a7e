#include "maskexplain/tiny_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "maskexplain/random.hpp"
#include "maskexplain/shapes.hpp"

namespace maskexplain {

namespace {

struct Dims {
  int h, w, c;
  std::size_t size() const { return static_cast<std::size_t>(h) * w * c; }
};

// 3x3 convolution with one pixel of zero padding; channel-last layout.
void conv3x3_forward(const std::vector<double>& in, Dims d, const std::vector<double>& w,
                     const std::vector<double>& b, int filters, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(d.h) * d.w * filters, 0.0);
  for (int y = 0; y < d.h; ++y) {
    for (int x = 0; x < d.w; ++x) {
      double* o = &out[(static_cast<std::size_t>(y) * d.w + x) * filters];
      for (int f = 0; f < filters; ++f) o[f] = b[f];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= d.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= d.w) continue;
          const double* px = &in[(static_cast<std::size_t>(iy) * d.w + ix) * d.c];
          for (int f = 0; f < filters; ++f) {
            const double* wk = &w[((static_cast<std::size_t>(f) * 3 + ky) * 3 + kx) * d.c];
            double acc = 0.0;
            for (int ci = 0; ci < d.c; ++ci) acc += wk[ci] * px[ci];
            o[f] += acc;
          }
        }
      }
    }
  }
}

void conv3x3_backward(const std::vector<double>& in, Dims d, const std::vector<double>& w, int filters,
                      const std::vector<double>& dout, std::vector<double>* dw, std::vector<double>* db,
                      std::vector<double>* din) {
  if (din) din->assign(d.size(), 0.0);
  for (int y = 0; y < d.h; ++y) {
    for (int x = 0; x < d.w; ++x) {
      const double* g = &dout[(static_cast<std::size_t>(y) * d.w + x) * filters];
      if (db)
        for (int f = 0; f < filters; ++f) (*db)[f] += g[f];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= d.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= d.w) continue;
          const std::size_t pix = (static_cast<std::size_t>(iy) * d.w + ix) * d.c;
          for (int f = 0; f < filters; ++f) {
            if (g[f] == 0.0) continue;
            const std::size_t wk = ((static_cast<std::size_t>(f) * 3 + ky) * 3 + kx) * d.c;
            if (dw)
              for (int ci = 0; ci < d.c; ++ci) (*dw)[wk + ci] += g[f] * in[pix + ci];
            if (din)
              for (int ci = 0; ci < d.c; ++ci) (*din)[pix + ci] += g[f] * w[wk + ci];
          }
        }
      }
    }
  }
}

// ReLU followed by 2x2 max-pool. `arg` records the flat input index of each
// pooled maximum; ties resolve to the first element in row-major order.
void relu_pool_forward(const std::vector<double>& z, Dims d, std::vector<double>& out, std::vector<std::size_t>& arg) {
  const int oh = d.h / 2, ow = d.w / 2;
  out.assign(static_cast<std::size_t>(oh) * ow * d.c, 0.0);
  arg.assign(out.size(), 0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < d.c; ++c) {
        double best = 0.0;
        std::size_t best_i = 0;
        bool first = true;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = ((static_cast<std::size_t>(2 * y + dy)) * d.w + (2 * x + dx)) * d.c + c;
            const double v = z[i] > 0.0 || std::isnan(z[i]) ? z[i] : 0.0;  // NaN must not be masked
            if (first || v > best) {
              best = v;
              best_i = i;
              first = false;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(y) * ow + x) * d.c + c;
        out[o] = best;
        arg[o] = best_i;
      }
}

// Routes pooled gradients to their argmax and applies the ReLU mask (0 at z <= 0).
std::vector<double> relu_pool_backward(const std::vector<double>& dpool, const std::vector<std::size_t>& arg,
                                       const std::vector<double>& z) {
  std::vector<double> dz(z.size(), 0.0);
  for (std::size_t o = 0; o < dpool.size(); ++o) {
    const std::size_t i = arg[o];
    if (z[i] > 0.0) dz[i] += dpool[o];
  }
  return dz;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) total += (p[k] = std::exp(logits[k] - mx));
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

struct TinyCnn::Trace {
  const Image* input = nullptr;
  std::vector<double> z1, p1, z2, p2;
  std::vector<std::size_t> arg1, arg2;
  std::vector<double> logits, probs;
};

TinyCnn::TinyCnn(InputShape shape, int num_classes) : shape_(shape), classes_(num_classes) {
  if (shape.height % 4 != 0 || shape.width % 4 != 0 || shape.height <= 0 || shape.width <= 0)
    throw InvalidParameter("tiny cnn input height and width must be positive multiples of 4");
  if (shape.channels < 1 || num_classes < 2) throw InvalidParameter("tiny cnn needs >= 1 channel and >= 2 classes");
  params_ = zero_params();
}

TinyCnn::TinyCnn(InputShape shape, int num_classes, Params params) : TinyCnn(shape, num_classes) {
  const Params z = zero_params();
  if (params.conv1_w.size() != z.conv1_w.size() || params.conv1_b.size() != z.conv1_b.size() ||
      params.conv2_w.size() != z.conv2_w.size() || params.conv2_b.size() != z.conv2_b.size() ||
      params.fc_w.size() != z.fc_w.size() || params.fc_b.size() != z.fc_b.size())
    throw ShapeMismatch("tiny cnn parameter sizes do not match the architecture");
  params_ = std::move(params);
}

TinyCnn::Params TinyCnn::zero_params() const {
  Params p;
  p.conv1_w.assign(static_cast<std::size_t>(kConv1Filters) * 9 * shape_.channels, 0.0);
  p.conv1_b.assign(kConv1Filters, 0.0);
  p.conv2_w.assign(static_cast<std::size_t>(kConv2Filters) * 9 * kConv1Filters, 0.0);
  p.conv2_b.assign(kConv2Filters, 0.0);
  p.fc_w.assign(static_cast<std::size_t>(classes_) * feature_count(), 0.0);
  p.fc_b.assign(classes_, 0.0);
  return p;
}

TinyCnn TinyCnn::random_init(InputShape shape, int num_classes, std::uint64_t seed) {
  TinyCnn net(shape, num_classes);
  Rng rng(seed);
  auto fill = [&rng](std::vector<double>& w, double fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : w) v = dist(rng);
  };
  fill(net.params_.conv1_w, 9.0 * shape.channels);
  fill(net.params_.conv2_w, 9.0 * kConv1Filters);
  fill(net.params_.fc_w, net.feature_count());
  return net;
}

TinyCnn::Trace TinyCnn::forward(const Image& x) const {
  Trace t;
  t.input = &x;
  const Dims d0{shape_.height, shape_.width, shape_.channels};
  const Dims d1{shape_.height, shape_.width, kConv1Filters};
  const Dims d2{shape_.height / 2, shape_.width / 2, kConv2Filters};
  conv3x3_forward(x.data, d0, params_.conv1_w, params_.conv1_b, kConv1Filters, t.z1);
  relu_pool_forward(t.z1, d1, t.p1, t.arg1);
  conv3x3_forward(t.p1, {d2.h, d2.w, kConv1Filters}, params_.conv2_w, params_.conv2_b, kConv2Filters, t.z2);
  relu_pool_forward(t.z2, d2, t.p2, t.arg2);
  const int nf = feature_count();
  t.logits.assign(classes_, 0.0);
  for (int k = 0; k < classes_; ++k) {
    const double* wk = &params_.fc_w[static_cast<std::size_t>(k) * nf];
    t.logits[k] = std::inner_product(t.p2.begin(), t.p2.end(), wk, params_.fc_b[k]);
  }
  t.probs = softmax(t.logits);
  return t;
}

Image TinyCnn::backpropagate(const Trace& t, const std::vector<double>& dlogits, Params* grads,
                             bool want_input) const {
  const int nf = feature_count();
  std::vector<double> dp2(nf, 0.0);
  for (int k = 0; k < classes_; ++k) {
    const double g = dlogits[k];
    if (g == 0.0) continue;
    const double* wk = &params_.fc_w[static_cast<std::size_t>(k) * nf];
    for (int i = 0; i < nf; ++i) dp2[i] += g * wk[i];
    if (grads) {
      grads->fc_b[k] += g;
      double* gw = &grads->fc_w[static_cast<std::size_t>(k) * nf];
      for (int i = 0; i < nf; ++i) gw[i] += g * t.p2[i];
    }
  }
  const std::vector<double> dz2 = relu_pool_backward(dp2, t.arg2, t.z2);
  std::vector<double> dp1;
  const Dims d2in{shape_.height / 2, shape_.width / 2, kConv1Filters};
  conv3x3_backward(t.p1, d2in, params_.conv2_w, kConv2Filters, dz2, grads ? &grads->conv2_w : nullptr,
                   grads ? &grads->conv2_b : nullptr, &dp1);
  const std::vector<double> dz1 = relu_pool_backward(dp1, t.arg1, t.z1);
  const Dims d0{shape_.height, shape_.width, shape_.channels};
  Image dx;
  std::vector<double> din;
  conv3x3_backward(t.input->data, d0, params_.conv1_w, kConv1Filters, dz1, grads ? &grads->conv1_w : nullptr,
                   grads ? &grads->conv1_b : nullptr, want_input ? &din : nullptr);
  if (want_input) {
    dx = Image(shape_.height, shape_.width, shape_.channels);
    dx.data = std::move(din);
  }
  return dx;
}

std::vector<double> TinyCnn::logits(const Image& x) const { return forward(x).logits; }

std::vector<double> TinyCnn::do_score(const Image& x) const { return forward(x).probs; }

ScoreGradient TinyCnn::do_backward(const Image& x, std::span<const double> weights) const {
  const Trace t = forward(x);
  // d(sum_k w_k p_k)/d(logit_j) = p_j (w_j - sum_k w_k p_k)
  double mean = 0.0;
  for (int k = 0; k < classes_; ++k) mean += weights[k] * t.probs[k];
  std::vector<double> dlogits(classes_);
  for (int j = 0; j < classes_; ++j) dlogits[j] = t.probs[j] * (weights[j] - mean);
  return {t.probs, backpropagate(t, dlogits, nullptr, true)};
}

double TinyCnn::accumulate_loss_gradient(const Image& x, int label, Params& grads) const {
  if (label < 0 || label >= classes_) throw InvalidClass("label out of range");
  const Trace t = forward(x);
  std::vector<double> dlogits = t.probs;
  dlogits[label] -= 1.0;
  backpropagate(t, dlogits, &grads, false);
  return -std::log(std::max(t.probs[label], 1e-300));
}

double accuracy(const BlackBox& model, const ShapeCorpus& corpus) {
  if (corpus.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto s = model.score(corpus.images[i]);
    const auto best = std::max_element(s.begin(), s.end()) - s.begin();
    if (best == corpus.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

TinyCnn train_tiny_cnn(const ShapeCorpus& train, const ShapeCorpus* test, const TrainOptions& opts,
                       TrainReport* report) {
  if (train.size() == 0) throw InvalidInput("training corpus is empty");
  if (!(opts.lr > 0.0)) throw InvalidParameter("learning rate must be positive");
  if (opts.epochs < 0 || opts.batch_size < 1) throw InvalidParameter("invalid epoch count or batch size");
  const Image& first = train.images.front();
  const InputShape shape{first.height, first.width, first.channels};
  TinyCnn net = TinyCnn::random_init(shape, kShapeClasses, derive_seed(opts.seed, 0));
  Rng order_rng(derive_seed(opts.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport rep;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      TinyCnn::Params g = net.zero_params();
      for (std::size_t k = start; k < end; ++k)
        loss_sum += net.accumulate_loss_gradient(train.images[order[k]], train.labels[order[k]], g);
      const double step = opts.lr / static_cast<double>(end - start);
      auto apply = [step](std::vector<double>& p, const std::vector<double>& d) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * d[i];
      };
      TinyCnn::Params& p = net.mutable_params();
      apply(p.conv1_w, g.conv1_w);
      apply(p.conv1_b, g.conv1_b);
      apply(p.conv2_w, g.conv2_w);
      apply(p.conv2_b, g.conv2_b);
      apply(p.fc_w, g.fc_w);
      apply(p.fc_b, g.fc_b);
    }
    const double mean_loss = loss_sum / static_cast<double>(train.size());
    const TinyCnn::Params& p = net.params();
    bool finite = std::isfinite(mean_loss);
    for (const auto* v : {&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b, &p.fc_w, &p.fc_b})
      finite = finite && std::all_of(v->begin(), v->end(), [](double e) { return std::isfinite(e); });
    if (!finite) throw TrainingFailure("training diverged at epoch " + std::to_string(epoch));
    rep.epoch_loss.push_back(mean_loss);
  }
  rep.train_accuracy = accuracy(net, train);
  if (test) rep.test_accuracy = accuracy(net, *test);
  if (report) *report = rep;
  return net;
}

}  // namespace maskexplain
