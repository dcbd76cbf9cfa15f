#include "xvseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xvseg/ops.hpp"

namespace xvseg {

namespace {

// Feature-grid extent after the encoder's two stride-2 stages.
int stride4(int h) { return ((h + 1) / 2 + 1) / 2; }

struct SampleTerms {
  double total = 0.0, seg = 0.0, cls = 0.0, reg_mask = 0.0, reg_fact = 0.0;
};

struct BuiltViews {
  std::vector<Tensor> images;
  std::vector<GeomTransform> geoms;
};

BuiltViews build_views(const Sample& sample, const ViewSpec& spec, Rng& rng) {
  if (spec.scales.empty()) throw ConfigError("views.scales: empty");
  BuiltViews out;
  for (const double scale : spec.scales) {
    GeomTransform geom;
    geom.scale = scale;
    geom.hflip = spec.hflip && rng.bernoulli(0.5);
    const std::uint64_t color_seed = rng.next_u64();
    out.images.push_back(
        apply_view(geom, spec.color, sample.image, color_seed));
    out.geoms.push_back(geom);
  }
  return out;
}

// One sample's forward/backward. Gradients accumulate into the parameters;
// the caller decides when to step.
SampleTerms train_step(const ToyNetParams& net, const Sample& sample,
                       const TrainSettings& cfg, int epoch, bool mixed_regime,
                       Rng& rng) {
  const BuiltViews views = build_views(sample, cfg.views, rng);
  const int src_h = sample.image.shape()[0];
  const int src_w = sample.image.shape()[1];
  const int k = net.k;

  Tape tape;
  Tape::Scope scope(tape);
  NetOutput out = net_forward(net, views.images, cfg.cvlr, cfg.use_cvlr);

  const bool aux_on = cfg.use_cvlr && cfg.latent_reg;
  const double seg_weight = cfg.weights.seg_weight_at(epoch);

  LossBundle terms;
  terms.seg = Tensor::scalar(0.0);
  terms.cls = Tensor::scalar(0.0);
  terms.reg_mask = Tensor::scalar(0.0);
  terms.reg_fact = Tensor::scalar(0.0);

  // Segmentation supervision: ground truth when the sample carries pixel
  // labels, the calibrated pseudo-mask otherwise. Skipped entirely while its
  // weight is zero (warmup) -- the term would contribute nothing.
  if (seg_weight > 0.0) {
    std::vector<std::vector<int>> targets;
    if (sample.labeled_pixels) {
      for (const GeomTransform& geom : views.geoms) {
        targets.push_back(
            project_labels(geom, sample.gt_mask, src_h, src_w));
      }
    } else {
      PseudoMask pseudo =
          calibrate(out.logits, views.geoms, sample.image, cfg.mvmc);
      targets = build_seg_targets(pseudo, views.geoms);
    }
    terms.seg = seg_loss(out.logits, targets);
    if (aux_on) {
      terms.seg = add(terms.seg, seg_loss(out.aux_logits, targets));
    }
  }

  if (sample.labeled_image) {
    terms.cls = cls_loss(out.logits, sample.image_labels);
    if (aux_on) {
      terms.cls = add(terms.cls, cls_loss(out.aux_logits, sample.image_labels));
    }
  }

  if (views.images.size() > 1) {
    const std::vector<int> channels = consistency_channels(
        sample.image_labels, sample.labeled_image, k);
    terms.reg_mask = mask_consistency_loss(out.logits, views.geoms, channels,
                                           src_h, src_w);
    if (cfg.use_cvlr) {
      terms.reg_fact =
          code_consistency_loss(out.codes, out.feat_shapes, views.geoms,
                                stride4(src_h), stride4(src_w));
    }
  }

  Tensor loss = total_loss(terms, cfg.weights, epoch);
  const double sample_scale =
      (mixed_regime && sample.labeled_pixels) ? cfg.pixel_loss_scale : 1.0;
  if (sample_scale != 1.0) loss = mul_scalar(loss, sample_scale);

  tape.backward(loss);

  SampleTerms stats;
  stats.total = loss.item();
  stats.seg = terms.seg.item();
  stats.cls = terms.cls.item();
  stats.reg_mask = terms.reg_mask.item();
  stats.reg_fact = terms.reg_fact.item();
  return stats;
}

}  // namespace

Sgd::Sgd(std::vector<Tensor> params, double lr, double momentum,
         double weight_decay, double clip)
    : params_(std::move(params)),
      lr_(lr),
      momentum_(momentum),
      weight_decay_(weight_decay),
      clip_(clip) {
  if (lr <= 0.0) throw ParamError("Sgd: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ParamError("Sgd: momentum must be in [0,1)");
  }
  if (weight_decay < 0.0) throw ParamError("Sgd: negative weight decay");
  if (clip < 0.0) throw ParamError("Sgd: negative clip");
  velocity_.resize(params_.size());
}

void Sgd::step() {
  double scale = 1.0;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (const Tensor& p : params_) {
      if (!p.has_grad()) continue;
      for (const double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_) scale = clip_ / norm;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const std::vector<double>& g = p.grad();
    std::vector<double>& vel = velocity_[i];
    if (vel.empty()) vel.assign(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = scale * g[j] + weight_decay_ * p.data()[j];
      vel[j] = momentum_ * vel[j] + grad;
      p.data()[j] -= lr_ * vel[j];
    }
  }
}

void Sgd::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

std::vector<int> predict_mask(const ToyNetParams& net, const Tensor& image,
                              const CvlrOptions& opts, bool use_cvlr) {
  NetOutput out = net_forward(net, {image}, opts, use_cvlr);
  const Tensor& logits = out.logits[0];
  const int h = logits.shape()[0], w = logits.shape()[1],
            k = logits.shape()[2];
  std::vector<int> pred(static_cast<std::size_t>(h) * w);
  for (int p = 0; p < h * w; ++p) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (logits.data()[p * k + c] > logits.data()[p * k + best]) best = c;
    }
    pred[p] = best;
  }
  return pred;
}

SegMetrics evaluate(const ToyNetParams& net, const std::vector<Sample>& split,
                    const CvlrOptions& opts, bool use_cvlr) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  ConfusionAccumulator conf(net.k);
  for (const Sample& sample : split) {
    conf.add(sample.gt_mask, predict_mask(net, sample.image, opts, use_cvlr));
  }
  return metrics(conf);
}

TrainResult train(const Dataset& ds, const TrainSettings& settings,
                  const DivergenceHook& on_divergence) {
  if (ds.train.empty()) throw ConfigError("train: empty training split");
  if (settings.optim.epochs < 1) throw ConfigError("opt.epochs: must be >= 1");
  if (settings.optim.batch < 1) throw ConfigError("opt.batch: must be >= 1");
  if (settings.pixel_oversample < 1) {
    throw ConfigError("train.pixel_oversample: must be >= 1");
  }

  Rng root(settings.seed);
  Rng init_rng = root.fork(0x1917);
  TrainResult result;
  result.net = make_toynet(settings.d_model, settings.d, ds.k, init_rng);
  Sgd sgd(result.net.parameters(), settings.optim.lr, settings.optim.momentum,
          settings.optim.weight_decay, settings.optim.clip);

  bool any_pixels = false, any_weak = false;
  for (const Sample& s : ds.train) {
    any_pixels = any_pixels || s.labeled_pixels;
    any_weak = any_weak || !s.labeled_pixels;
  }
  const bool mixed_regime = any_pixels && any_weak;

  // Epoch ordering: pixel-labeled samples replicated in mixed regimes,
  // then a seeded shuffle.
  std::vector<int> base_order;
  for (int i = 0; i < static_cast<int>(ds.train.size()); ++i) {
    const int copies = (mixed_regime && ds.train[i].labeled_pixels)
                           ? settings.pixel_oversample
                           : 1;
    for (int c = 0; c < copies; ++c) base_order.push_back(i);
  }

  for (int epoch = 0; epoch < settings.optim.epochs; ++epoch) {
    Rng epoch_rng = root.fork(0xE000 + static_cast<std::uint64_t>(epoch));
    std::vector<int> order = base_order;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[epoch_rng.uniform_int(i + 1)]);
    }

    EpochStats stats;
    stats.epoch = epoch;
    sgd.zero_grad();
    int in_batch = 0;
    for (std::size_t s = 0; s < order.size(); ++s) {
      try {
        const SampleTerms terms =
            train_step(result.net, ds.train[order[s]], settings, epoch,
                       mixed_regime, epoch_rng);
        stats.loss_total += terms.total;
        stats.loss_seg += terms.seg;
        stats.loss_cls += terms.cls;
        stats.loss_reg_mask += terms.reg_mask;
        stats.loss_reg_fact += terms.reg_fact;
      } catch (const NumericError& err) {
        const std::string where = "epoch " + std::to_string(epoch) +
                                  ", sample " + std::to_string(order[s]) +
                                  ": " + err.what();
        if (on_divergence) on_divergence(result.net, where);
        throw NumericError("training diverged at " + where);
      }
      if (++in_batch == settings.optim.batch || s + 1 == order.size()) {
        sgd.step();
        sgd.zero_grad();
        in_batch = 0;
      }
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    stats.loss_total *= inv;
    stats.loss_seg *= inv;
    stats.loss_cls *= inv;
    stats.loss_reg_mask *= inv;
    stats.loss_reg_fact *= inv;
    if (!ds.val.empty()) {
      try {
        stats.val = evaluate(result.net, ds.val, settings.cvlr,
                             settings.use_cvlr);
      } catch (const NumericError& err) {
        // A blown-up parameter set often first trips here rather than in
        // the next training step.
        const std::string where =
            "epoch " + std::to_string(epoch) + ", validation: " + err.what();
        if (on_divergence) on_divergence(result.net, where);
        throw NumericError("training diverged at " + where);
      }
    }
    result.log.push_back(stats);
  }
  return result;
}

}  // namespace xvseg
