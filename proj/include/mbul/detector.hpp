// The marker detector network, its two training losses, and the trainer.
//
// The network consumes a 299×299 single-channel image with values in [0,1]
// and emits a marker-presence probability, normalised centre coordinates
// (via a soft-argmax over a coarse heat map), a positive normalised
// diameter (softplus), and a 4-vector orientation estimate. Two backbones
// are available: "small-conv" (default, five strided conv blocks) and
// "mobilenet-like" (depthwise-separable bottleneck blocks).
//
// Loss shapes, with epsilon = 1 iff a marker is present:
//   base: BCE(m, m^) + eps*(gamma*||c - c^|| + mu*|d - d^| + ||q - q^||)
//   up:   BCE(m, m^) + eps*(gamma*||c - c^||/D + mu*|d - d^|/D^2 + ||q - q^||)
// where D is the ground-truth PIXEL diameter. A pixel error in the centre
// maps to a metric error proportional to 1/d, and a pixel error in the
// diameter to one proportional to 1/d^2, so the "up" variant weights each
// sample's regression penalty by the metric error it would induce. The
// loss functions are unit-agnostic — they operate in whatever units the
// prediction/truth pair carries; training feeds width-normalised targets
// while the up-denominators always use the ground-truth pixel diameter.
// Ground-truth quaternions are canonicalised to w >= 0 (q and -q encode
// the same rotation) before the L2 comparison.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mbul/augment.hpp"
#include "mbul/common.hpp"
#include "mbul/dataset.hpp"
#include "mbul/geometry.hpp"
#include "mbul/image.hpp"
#include "mbul/nn.hpp"
#include "mbul/synthgen.hpp"

namespace mbul {

// ---------------------------------------------------------------------------
// Public prediction / loss types
// ---------------------------------------------------------------------------

struct Prediction {
  double m_hat = 0.0;              // marker-presence probability in [0,1]
  double u_hat = 0.0, v_hat = 0.0; // centre offsets from the image centre
  double d_hat = 0.0;              // diameter (positive by construction)
  Quaternion q_hat{1.0, 0.0, 0.0, 0.0};
};

enum class LossVariant { kBase, kUp };

struct LossConfig {
  double gamma = 10.0;
  double mu = 5.0;
  LossVariant variant = LossVariant::kBase;

  void validate() const {
    check_config(gamma > 0.0 && mu > 0.0,
                 "LossConfig: gamma and mu must be positive");
  }
};

namespace detail {

// Shared regression-term evaluation: L_c, L_d, L_q in the callers' units.
struct RegressionTerms {
  double lc = 0.0, ld = 0.0, lq = 0.0;
};

inline RegressionTerms regression_terms(const Prediction& pred,
                                        const PixelObservation& truth) {
  RegressionTerms t;
  t.lc = std::hypot(pred.u_hat - truth.u, pred.v_hat - truth.v);
  t.ld = std::abs(pred.d_hat - truth.d);
  const Quaternion qt = truth.quaternion.canonical();
  const double dw = pred.q_hat.w - qt.w, dp = pred.q_hat.p - qt.p;
  const double dq = pred.q_hat.q - qt.q, dr = pred.q_hat.r - qt.r;
  t.lq = std::sqrt(dw * dw + dp * dp + dq * dq + dr * dr);
  return t;
}

inline double bce_probability(double m_hat, double m) {
  const double p = std::clamp(m_hat, 1e-12, 1.0 - 1e-12);
  return -(m * std::log(p) + (1.0 - m) * std::log(1.0 - p));
}

}  // namespace detail

inline double loss_base(const Prediction& pred, const PixelObservation& truth,
                        const LossConfig& cfg) {
  cfg.validate();
  const double bce = detail::bce_probability(pred.m_hat, truth.m);
  if (truth.m == 0) return bce;
  const auto t = detail::regression_terms(pred, truth);
  return bce + cfg.gamma * t.lc + cfg.mu * t.ld + t.lq;
}

inline double loss_up(const Prediction& pred, const PixelObservation& truth,
                      const LossConfig& cfg) {
  cfg.validate();
  const double bce = detail::bce_probability(pred.m_hat, truth.m);
  if (truth.m == 0) return bce;
  check(truth.d > 0.0, "loss_up: positive sample requires positive diameter");
  const auto t = detail::regression_terms(pred, truth);
  return bce + cfg.gamma * t.lc / truth.d + cfg.mu * t.ld / (truth.d * truth.d) +
         t.lq;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

struct NetConfig {
  std::string backbone = "small-conv";  // or "mobilenet-like"
  int input_px = 299;

  void validate() const {
    check_config(backbone == "small-conv" || backbone == "mobilenet-like",
                 "NetConfig: unknown backbone " + backbone);
    check_config(input_px >= 32, "NetConfig: input too small");
  }
};

template <typename S>
class MbulNet {
 public:
  // Per-sample network outputs for a batch.
  struct Raw {
    VecX<S> m_logit;  // n
    MatX<S> c;        // 2 × n: normalised (u, v) from soft-argmax
    VecX<S> d;        // n: softplus(d_raw), positive
    MatX<S> q;        // 4 × n
  };
  struct RawGrad {
    VecX<S> dm_logit;
    MatX<S> dc;
    VecX<S> dd;  // with respect to the positive diameter output
    MatX<S> dq;
  };

  explicit MbulNet(const NetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (cfg.backbone == "small-conv") {
      add_conv_block(pre_, "b1", 1, 8);
      add_conv_block(pre_, "b2", 8, 16);
      add_conv_block(pre_, "b3", 16, 32);
      add_conv_block(pre_, "b4", 32, 48);
      tap_channels_ = 48;
      add_conv_block(post_, "b5", 48, 64);
      out_channels_ = 64;
    } else {
      add_conv_block(pre_, "stem", 1, 8);
      add_bottleneck(pre_, "m1", 8, 16, 12);
      add_bottleneck(pre_, "m2", 12, 24, 16);
      add_bottleneck(pre_, "m3", 16, 32, 24);
      tap_channels_ = 24;
      add_bottleneck(post_, "m4", 24, 48, 32);
      out_channels_ = 32;
    }
    heat_ = std::make_unique<Conv2D<S>>("heat", tap_channels_, 1, 1, 1, 0);
    argmax_ = std::make_unique<SoftArgmax2D<S>>();
    gap_ = std::make_unique<GlobalAvgPool<S>>();
    fc1_ = std::make_unique<Dense<S>>("fc1", out_channels_, 32);
    fc_relu_ = std::make_unique<ReLU<S>>();
    fc2_ = std::make_unique<Dense<S>>("fc2", 32, 6);
    Conv2D<S>* heat = heat_.get();
    Dense<S>* fc1 = fc1_.get();
    Dense<S>* fc2 = fc2_.get();
    init_order_.push_back([heat](Rng& rng) { heat->init_he(rng); });
    init_order_.push_back([fc1](Rng& rng) { fc1->init_he(rng); });
    init_order_.push_back([fc2](Rng& rng) { fc2->init_he(rng); });
  }

  // Draws fresh weights for every layer in a fixed order.
  void init(Rng& rng) {
    for (auto& l : init_order_) l(rng);
  }

  Raw forward(const Batch<S>& x, bool want_grad) {
    check(x.c == 1 && x.h == cfg_.input_px && x.w == cfg_.input_px,
          "MbulNet: input must be " + std::to_string(cfg_.input_px) + "x" +
              std::to_string(cfg_.input_px) + "x1");
    Batch<S> t = x;
    for (auto& l : pre_) t = l->forward(t, want_grad);
    Batch<S> o = t;
    for (auto& l : post_) o = l->forward(o, want_grad);
    const Batch<S> heat = heat_->forward(t, want_grad);
    const Batch<S> cuv = argmax_->forward(heat, want_grad);
    Batch<S> g = gap_->forward(o, want_grad);
    g = fc1_->forward(g, want_grad);
    g = fc_relu_->forward(g, want_grad);
    g = fc2_->forward(g, want_grad);

    Raw raw;
    raw.m_logit = g.m.row(0).transpose();
    raw.c = cuv.m;
    raw.q = g.m.middleRows(2, 4);
    const VecX<S> d_raw = g.m.row(1).transpose();
    raw.d.resize(d_raw.size());
    for (long i = 0; i < d_raw.size(); ++i) raw.d(i) = softplus(d_raw(i));
    if (want_grad) d_raw_ = d_raw;
    return raw;
  }

  void backward(const RawGrad& grad) {
    const int n = static_cast<int>(grad.dm_logit.size());
    Batch<S> dg;
    dg.c = 6;
    dg.h = dg.w = 1;
    dg.m.resize(6, n);
    dg.m.row(0) = grad.dm_logit.transpose();
    for (int i = 0; i < n; ++i)
      dg.m(1, i) = grad.dd(i) * sigmoid(d_raw_(i));  // softplus chain rule
    dg.m.middleRows(2, 4) = grad.dq;

    Batch<S> d = fc2_->backward(dg);
    d = fc_relu_->backward(d);
    d = fc1_->backward(d);
    d = gap_->backward(d);
    for (auto it = post_.rbegin(); it != post_.rend(); ++it)
      d = (*it)->backward(d);

    Batch<S> dc;
    dc.c = 2;
    dc.h = dc.w = 1;
    dc.m = grad.dc;
    Batch<S> dtap_heat = heat_->backward(argmax_->backward(dc));
    d.m += dtap_heat.m;  // the tap feeds both the heat head and the trunk
    for (auto it = pre_.rbegin(); it != pre_.rend(); ++it)
      d = (*it)->backward(d);
  }

  std::vector<ParamBlob<S>*> params() {
    std::vector<ParamBlob<S>*> out;
    for (auto& l : pre_) append(out, l->params());
    for (auto& l : post_) append(out, l->params());
    append(out, heat_->params());
    append(out, fc1_->params());
    append(out, fc2_->params());
    return out;
  }

  const NetConfig& config() const { return cfg_; }

 private:
  static void append(std::vector<ParamBlob<S>*>& dst,
                     std::vector<ParamBlob<S>*> src) {
    dst.insert(dst.end(), src.begin(), src.end());
  }

  void add_conv_block(std::vector<std::unique_ptr<LayerBase<S>>>& seq,
                      const std::string& name, int in_c, int out_c) {
    auto conv = std::make_unique<Conv2D<S>>(name, in_c, out_c, 3, 2, 1);
    Conv2D<S>* raw = conv.get();
    init_order_.push_back([raw](Rng& rng) { raw->init_he(rng); });
    seq.push_back(std::move(conv));
    seq.push_back(std::make_unique<ReLU<S>>());
  }

  // Inverted bottleneck: 1×1 expand + ReLU, strided depthwise + ReLU,
  // linear 1×1 projection.
  void add_bottleneck(std::vector<std::unique_ptr<LayerBase<S>>>& seq,
                      const std::string& name, int in_c, int expand_c,
                      int out_c) {
    auto e = std::make_unique<Conv2D<S>>(name + ".expand", in_c, expand_c, 1,
                                         1, 0);
    auto dw = std::make_unique<DepthwiseConv2D<S>>(name + ".dw", expand_c, 3,
                                                   2, 1);
    auto p = std::make_unique<Conv2D<S>>(name + ".project", expand_c, out_c,
                                         1, 1, 0);
    for (auto* layer : {e.get(), p.get()}) {
      init_order_.push_back([layer](Rng& rng) { layer->init_he(rng); });
    }
    DepthwiseConv2D<S>* dwp = dw.get();
    init_order_.push_back([dwp](Rng& rng) { dwp->init_he(rng); });
    seq.push_back(std::move(e));
    seq.push_back(std::make_unique<ReLU<S>>());
    seq.push_back(std::move(dw));
    seq.push_back(std::make_unique<ReLU<S>>());
    seq.push_back(std::move(p));
  }

  NetConfig cfg_;
  std::vector<std::unique_ptr<LayerBase<S>>> pre_, post_;
  std::unique_ptr<Conv2D<S>> heat_;
  std::unique_ptr<SoftArgmax2D<S>> argmax_;
  std::unique_ptr<GlobalAvgPool<S>> gap_;
  std::unique_ptr<Dense<S>> fc1_;
  std::unique_ptr<ReLU<S>> fc_relu_;
  std::unique_ptr<Dense<S>> fc2_;
  std::vector<std::function<void(Rng&)>> init_order_;
  int tap_channels_ = 0, out_channels_ = 0;
  VecX<S> d_raw_;
};

// ---------------------------------------------------------------------------
// Training-side loss on raw network outputs (normalised units)
// ---------------------------------------------------------------------------

// Per-sample training target. Units: u, v, d normalised by image width;
// up_denominator_px is the ground-truth pixel diameter used by the UP loss.
struct TrainTarget {
  double m = 0.0;
  double u = 0.0, v = 0.0, d = 0.0;
  double qw = 1.0, qp = 0.0, qq = 0.0, qr = 0.0;
  double up_denominator_px = 1.0;
};

inline TrainTarget make_train_target(const SampleRecord& rec, int width_px) {
  TrainTarget t;
  t.m = rec.m;
  t.u = rec.u / width_px;
  t.v = rec.v / width_px;
  t.d = rec.d / width_px;
  const Quaternion q = Quaternion{rec.qw, rec.qp, rec.qq, rec.qr}.canonical();
  t.qw = q.w;
  t.qp = q.p;
  t.qq = q.q;
  t.qr = q.r;
  t.up_denominator_px = rec.m ? rec.d : 1.0;
  return t;
}

// Evaluates the batch-mean loss and fills the gradient of the mean loss
// with respect to the raw outputs. Returns the mean loss.
template <typename S>
double training_loss(const typename MbulNet<S>::Raw& raw,
                     const std::vector<TrainTarget>& targets,
                     const LossConfig& cfg,
                     typename MbulNet<S>::RawGrad* grad) {
  const int n = static_cast<int>(targets.size());
  check(raw.m_logit.size() == n, "training_loss: batch size mismatch");
  if (grad) {
    grad->dm_logit = VecX<S>::Zero(n);
    grad->dc = MatX<S>::Zero(2, n);
    grad->dd = VecX<S>::Zero(n);
    grad->dq = MatX<S>::Zero(4, n);
  }
  const double inv_n = 1.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const TrainTarget& t = targets[i];
    const double logit = raw.m_logit(i);
    total += bce_with_logit(logit, t.m);
    if (grad)
      grad->dm_logit(i) =
          static_cast<S>(bce_with_logit_grad(logit, t.m) * inv_n);
    if (t.m == 0.0) continue;  // regression gradients stay exactly zero

    double wc = cfg.gamma, wd = cfg.mu;
    if (cfg.variant == LossVariant::kUp) {
      wc /= t.up_denominator_px;
      wd /= t.up_denominator_px * t.up_denominator_px;
    }
    const double du = raw.c(0, i) - t.u, dv = raw.c(1, i) - t.v;
    const double lc = std::hypot(du, dv);
    const double dd = raw.d(i) - t.d;
    const double ld = std::abs(dd);
    const double eq[4] = {raw.q(0, i) - t.qw, raw.q(1, i) - t.qp,
                          raw.q(2, i) - t.qq, raw.q(3, i) - t.qr};
    const double lq =
        std::sqrt(eq[0] * eq[0] + eq[1] * eq[1] + eq[2] * eq[2] + eq[3] * eq[3]);
    total += wc * lc + wd * ld + lq;
    if (!grad) continue;
    if (lc > 0.0) {
      grad->dc(0, i) = static_cast<S>(wc * du / lc * inv_n);
      grad->dc(1, i) = static_cast<S>(wc * dv / lc * inv_n);
    }
    if (ld > 0.0)
      grad->dd(i) = static_cast<S>(wd * (dd > 0.0 ? 1.0 : -1.0) * inv_n);
    if (lq > 0.0)
      for (int k = 0; k < 4; ++k)
        grad->dq(k, i) = static_cast<S>(eq[k] / lq * inv_n);
  }
  return total * inv_n;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct TrainConfig {
  int batch_size = 32;
  double learn_rate = 3e-4;
  int epochs = 150;
  std::uint64_t seed = 0;
  std::string backbone = "small-conv";
  // When positive, training stops after the first epoch whose mean training
  // loss drops to this value or below.
  double stop_at_train_loss = 0.0;

  void validate() const {
    check_config(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    check_config(epochs >= 1, "TrainConfig: epochs must be >= 1");
    check_config(learn_rate > 0.0, "TrainConfig: learn_rate must be positive");
    check_config(stop_at_train_loss >= 0.0,
                 "TrainConfig: stop_at_train_loss must be >= 0");
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_class_acc = 0.0;
  double val_pixel_mae = 0.0;
};

struct ModelCheckpoint {
  NetConfig net;
  LossConfig loss;
  TrainConfig train_cfg;
  std::string method;  // display tag, e.g. "MbULNet_UP(NoisyCutout)"
  std::vector<std::pair<std::string, std::vector<double>>> weights;
  std::vector<EpochStats> log;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

template <typename S>
std::vector<std::pair<std::string, std::vector<double>>> extract_weights(
    MbulNet<S>& net) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (ParamBlob<S>* blob : net.params()) {
    std::vector<double> values(static_cast<std::size_t>(blob->w.size()));
    for (long i = 0; i < blob->w.size(); ++i)
      values[static_cast<std::size_t>(i)] = static_cast<double>(blob->w.data()[i]);
    out.emplace_back(blob->name, std::move(values));
  }
  return out;
}

template <typename S>
void load_weights(
    MbulNet<S>& net,
    const std::vector<std::pair<std::string, std::vector<double>>>& weights) {
  const auto blobs = net.params();
  check_data(blobs.size() == weights.size(),
             "load_weights: parameter count mismatch");
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    check_data(blobs[i]->name == weights[i].first,
               "load_weights: parameter name mismatch: " + blobs[i]->name);
    check_data(static_cast<std::size_t>(blobs[i]->w.size()) ==
                   weights[i].second.size(),
               "load_weights: size mismatch for " + blobs[i]->name);
    for (long k = 0; k < blobs[i]->w.size(); ++k)
      blobs[i]->w.data()[k] = static_cast<S>(weights[i].second[static_cast<std::size_t>(k)]);
  }
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const ModelCheckpoint& ckpt) {
  nlohmann::json j;
  j["backbone"] = ckpt.net.backbone;
  j["input_px"] = ckpt.net.input_px;
  j["loss"] = {{"gamma", ckpt.loss.gamma},
               {"mu", ckpt.loss.mu},
               {"variant",
                ckpt.loss.variant == LossVariant::kUp ? "up" : "base"}};
  j["train"] = {{"batch_size", ckpt.train_cfg.batch_size},
                {"learn_rate", ckpt.train_cfg.learn_rate},
                {"epochs", ckpt.train_cfg.epochs},
                {"seed", ckpt.train_cfg.seed},
                {"backbone", ckpt.train_cfg.backbone}};
  j["method"] = ckpt.method;
  j["best_epoch"] = ckpt.best_epoch;
  j["best_val_loss"] = ckpt.best_val_loss;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : ckpt.log)
    log.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_class_acc", e.val_class_acc},
                   {"val_pixel_mae", e.val_pixel_mae}});
  j["log"] = std::move(log);
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& [name, values] : ckpt.weights)
    weights.push_back({{"name", name}, {"values", values}});
  j["weights"] = std::move(weights);
  write_text(path, j.dump() + "\n");
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint parse error: " + std::string(e.what()));
  }
  ModelCheckpoint ckpt;
  try {
    ckpt.net.backbone = j.at("backbone").get<std::string>();
    ckpt.net.input_px = j.at("input_px").get<int>();
    ckpt.loss.gamma = j.at("loss").at("gamma").get<double>();
    ckpt.loss.mu = j.at("loss").at("mu").get<double>();
    ckpt.loss.variant = j.at("loss").at("variant").get<std::string>() == "up"
                            ? LossVariant::kUp
                            : LossVariant::kBase;
    ckpt.train_cfg.batch_size = j.at("train").at("batch_size").get<int>();
    ckpt.train_cfg.learn_rate = j.at("train").at("learn_rate").get<double>();
    ckpt.train_cfg.epochs = j.at("train").at("epochs").get<int>();
    ckpt.train_cfg.seed = j.at("train").at("seed").get<std::uint64_t>();
    ckpt.train_cfg.backbone = j.at("train").at("backbone").get<std::string>();
    ckpt.method = j.value("method", std::string());
    ckpt.best_epoch = j.at("best_epoch").get<int>();
    ckpt.best_val_loss = j.at("best_val_loss").get<double>();
    for (const auto& e : j.at("log")) {
      EpochStats s;
      s.epoch = e.at("epoch").get<int>();
      s.train_loss = e.at("train_loss").get<double>();
      s.val_loss = e.at("val_loss").get<double>();
      s.val_class_acc = e.at("val_class_acc").get<double>();
      s.val_pixel_mae = e.at("val_pixel_mae").get<double>();
      ckpt.log.push_back(s);
    }
    for (const auto& wj : j.at("weights"))
      ckpt.weights.emplace_back(wj.at("name").get<std::string>(),
                                wj.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint contents invalid: " + std::string(e.what()));
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace detail {

struct LoadedSample {
  BinaryImage pixels;
  TrainTarget target;
  int m = 0;
  double u_px = 0.0, v_px = 0.0;
};

inline void fill_input_column(Batch<float>& x, int col,
                              const BinaryImage& img) {
  float* dst = x.m.col(col).data();
  for (std::size_t i = 0; i < img.data.size(); ++i)
    dst[i] = static_cast<float>(img.data[i]);
}

}  // namespace detail

// Trains a detector on the manifest's train split (augmented on the fly)
// and selects the epoch with minimum validation loss. The returned
// checkpoint carries the best weights, the full per-epoch log, and the
// configuration. Runs are bit-reproducible for a fixed config and seed.
inline ModelCheckpoint train(const DatasetManifest& manifest,
                             const Augmenter& augmenter,
                             const LossConfig& loss_cfg, const TrainConfig& cfg,
                             std::ostream* progress = nullptr) {
  cfg.validate();
  loss_cfg.validate();
  NetConfig net_cfg;
  net_cfg.backbone = cfg.backbone;
  net_cfg.validate();
  check_data(manifest.count_split("train") > 0 &&
                 manifest.count_split("val") > 0,
             "train: manifest must contain both train and val samples");

  MbulNet<float> net(net_cfg);
  Rng init_rng(derive_seed(cfg.seed, fnv1a("init")));
  net.init(init_rng);
  Adam<float> opt(net.params(), cfg.learn_rate);

  // Load the whole dataset once; images stay in their compact byte form.
  std::vector<detail::LoadedSample> samples;
  samples.reserve(manifest.records.size());
  std::vector<int> train_ids, val_ids;
  for (const auto& rec : manifest.records) {
    detail::LoadedSample s;
    s.pixels = load_sample_image(manifest, rec);
    check_data(s.pixels.width == net_cfg.input_px &&
                   s.pixels.height == net_cfg.input_px,
               "train: sample size does not match the network input");
    s.target = make_train_target(rec, net_cfg.input_px);
    s.m = rec.m;
    s.u_px = rec.u;
    s.v_px = rec.v;
    const int idx = static_cast<int>(samples.size());
    (rec.split == "train" ? train_ids : val_ids).push_back(idx);
    samples.push_back(std::move(s));
  }

  ModelCheckpoint ckpt;
  ckpt.net = net_cfg;
  ckpt.loss = loss_cfg;
  ckpt.train_cfg = cfg;

  const int b = cfg.batch_size;
  Batch<float> input = Batch<float>::make(1, net_cfg.input_px, net_cfg.input_px, b);
  std::vector<TrainTarget> batch_targets;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Deterministic per-epoch shuffle and per-(sample, epoch) augmentation.
    std::vector<int> order = train_ids;
    Rng shuffle_rng(derive_seed(cfg.seed, fnv1a("shuffle"),
                                static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(shuffle_rng.uniform_int(
                    0, static_cast<std::int64_t>(i) - 1))]);

    double train_loss_sum = 0.0;
    long train_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += b) {
      const int nb = static_cast<int>(
          std::min(order.size() - start, static_cast<std::size_t>(b)));
      if (input.n() != nb)
        input = Batch<float>::make(1, net_cfg.input_px, net_cfg.input_px, nb);
      batch_targets.clear();
      for (int k = 0; k < nb; ++k) {
        const int id = order[start + k];
        Rng aug_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(id),
                                static_cast<std::uint64_t>(epoch)));
        const BinaryImage aug = augmenter(samples[id].pixels, aug_rng);
        detail::fill_input_column(input, k, aug);
        batch_targets.push_back(samples[id].target);
      }
      const auto raw = net.forward(input, true);
      typename MbulNet<float>::RawGrad grad;
      const double loss =
          training_loss<float>(raw, batch_targets, loss_cfg, &grad);
      train_loss_sum += loss;
      ++train_batches;
      opt.zero_grad();
      net.backward(grad);
      opt.step();
    }

    // Validation pass on clean images.
    double val_loss_sum = 0.0;
    long val_batches = 0, correct = 0, positives = 0;
    double pixel_err_sum = 0.0;
    for (std::size_t start = 0; start < val_ids.size(); start += b) {
      const int nb = static_cast<int>(
          std::min(val_ids.size() - start, static_cast<std::size_t>(b)));
      Batch<float> vx = Batch<float>::make(1, net_cfg.input_px, net_cfg.input_px, nb);
      batch_targets.clear();
      for (int k = 0; k < nb; ++k) {
        const int id = val_ids[start + k];
        detail::fill_input_column(vx, k, samples[id].pixels);
        batch_targets.push_back(samples[id].target);
      }
      const auto raw = net.forward(vx, false);
      val_loss_sum += training_loss<float>(raw, batch_targets, loss_cfg, nullptr);
      ++val_batches;
      for (int k = 0; k < nb; ++k) {
        const int id = val_ids[start + k];
        const bool predicted = raw.m_logit(k) > 0.0f;
        correct += (predicted == (samples[id].m == 1));
        if (samples[id].m == 1) {
          ++positives;
          const double up = raw.c(0, k) * net_cfg.input_px;
          const double vp = raw.c(1, k) * net_cfg.input_px;
          pixel_err_sum +=
              std::hypot(up - samples[id].u_px, vp - samples[id].v_px);
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss_sum / std::max(train_batches, 1L);
    stats.val_loss = val_loss_sum / std::max(val_batches, 1L);
    stats.val_class_acc =
        static_cast<double>(correct) / static_cast<double>(val_ids.size());
    stats.val_pixel_mae =
        positives ? pixel_err_sum / static_cast<double>(positives) : 0.0;
    ckpt.log.push_back(stats);
    if (progress)
      *progress << stats.epoch << ", " << stats.train_loss << ", "
                << stats.val_loss << ", " << stats.val_class_acc << ", "
                << stats.val_pixel_mae << "\n";
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
      throw Error("training diverged: non-finite loss at epoch " +
                  std::to_string(epoch));
    if (stats.val_loss < ckpt.best_val_loss) {
      ckpt.best_val_loss = stats.val_loss;
      ckpt.best_epoch = epoch;
      ckpt.weights = extract_weights(net);
    }
    if (cfg.stop_at_train_loss > 0.0 &&
        stats.train_loss <= cfg.stop_at_train_loss)
      break;
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Inference wrapper
// ---------------------------------------------------------------------------

class Detector {
 public:
  explicit Detector(const ModelCheckpoint& ckpt) : net_(ckpt.net) {
    load_weights(net_, ckpt.weights);
    input_px_ = ckpt.net.input_px;
  }

  int input_px() const { return input_px_; }

  std::vector<Prediction> predict(const std::vector<const BinaryImage*>& imgs) {
    Batch<float> x =
        Batch<float>::make(1, input_px_, input_px_, static_cast<int>(imgs.size()));
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      check(imgs[i]->width == input_px_ && imgs[i]->height == input_px_ &&
                imgs[i]->channels == 1,
            "Detector: input must be " + std::to_string(input_px_) + "x" +
                std::to_string(input_px_) + "x1");
      detail::fill_input_column(x, static_cast<int>(i), *imgs[i]);
    }
    const auto raw = net_.forward(x, false);
    std::vector<Prediction> out(imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const int k = static_cast<int>(i);
      out[i].m_hat = sigmoid(static_cast<double>(raw.m_logit(k)));
      out[i].u_hat = raw.c(0, k);
      out[i].v_hat = raw.c(1, k);
      out[i].d_hat = raw.d(k);
      out[i].q_hat = Quaternion{raw.q(0, k), raw.q(1, k), raw.q(2, k),
                                raw.q(3, k)};
    }
    return out;
  }

  std::vector<Prediction> predict(const std::vector<BinaryImage>& imgs) {
    std::vector<const BinaryImage*> ptrs;
    ptrs.reserve(imgs.size());
    for (const auto& img : imgs) ptrs.push_back(&img);
    return predict(ptrs);
  }

  Prediction predict(const BinaryImage& img) {
    return predict(std::vector<const BinaryImage*>{&img}).front();
  }

  // Converts a normalised prediction to full-image pixel units.
  Prediction to_pixels(const Prediction& pred) const {
    Prediction p = pred;
    p.u_hat *= input_px_;
    p.v_hat *= input_px_;
    p.d_hat *= input_px_;
    return p;
  }

 private:
  MbulNet<float> net_;
  int input_px_ = 299;
};

}  // namespace mbul
