#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xvseg/data.hpp"
#include "xvseg/losses.hpp"
#include "xvseg/metrics.hpp"
#include "xvseg/mvmc.hpp"
#include "xvseg/net.hpp"

namespace xvseg {

// Augmented-view construction for training.
struct ViewSpec {
  std::vector<double> scales = {1.0, 0.5};
  bool hflip = true;  // coin flip per view
  ColorDistortion color{0.2, 0.2, 0.2, 0.05};
};

struct OptimSpec {
  double lr = 5e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double clip = 5.0;  // global gradient-norm cap; 0 disables
  int epochs = 15;
  int batch = 8;  // gradient-accumulation window, in samples
};

// Everything train() needs besides the dataset itself.
struct TrainSettings {
  ViewSpec views;
  CvlrOptions cvlr;
  bool use_cvlr = true;
  bool latent_reg = true;  // auxiliary supervision of the code initializer
  int d_model = 64;
  int d = 64;
  CalibrateConfig mvmc;
  LossWeights weights;
  OptimSpec optim;
  std::uint64_t seed = 1;
  // Mixed pixel+weak regimes: replicate pixel-labeled samples in each epoch
  // and scale their loss.
  int pixel_oversample = 5;
  double pixel_loss_scale = 2.0;
};

struct EpochStats {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_seg = 0.0;
  double loss_cls = 0.0;
  double loss_reg_mask = 0.0;
  double loss_reg_fact = 0.0;
  SegMetrics val;
};

struct TrainResult {
  ToyNetParams net;
  std::vector<EpochStats> log;
};

// Plain SGD with momentum and classical L2 weight decay (decay folded into
// the gradient). `clip` rescales the whole gradient when its global norm
// exceeds the cap; the factorization backward can spike around nearly-dead
// dictionary atoms, and capping the magnitude keeps the direction intact.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double lr, double momentum,
      double weight_decay, double clip = 0.0);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_, momentum_, weight_decay_, clip_;
};

using DivergenceHook =
    std::function<void(const ToyNetParams&, const std::string&)>;

// Full training loop: per-sample view construction, forward, loss, backward
// with gradient accumulation over `batch` samples, SGD step, and a val-split
// evaluation per epoch. Deterministic in (dataset, settings). A non-finite
// value anywhere aborts via NumericError after `on_divergence` has seen the
// current parameters.
TrainResult train(const Dataset& ds, const TrainSettings& settings,
                  const DivergenceHook& on_divergence = nullptr);

// Inference-path evaluation: one identity view, no mask calibration.
SegMetrics evaluate(const ToyNetParams& net, const std::vector<Sample>& split,
                    const CvlrOptions& opts, bool use_cvlr);

// Per-pixel argmax of the inference logits for one image.
std::vector<int> predict_mask(const ToyNetParams& net, const Tensor& image,
                              const CvlrOptions& opts, bool use_cvlr);

}  // namespace xvseg
