#include "xvseg/harness.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include "xvseg/cvlr.hpp"
#include "xvseg/data.hpp"
#include "xvseg/factorization.hpp"
#include "xvseg/gradcheck.hpp"
#include "xvseg/io.hpp"
#include "xvseg/losses.hpp"
#include "xvseg/mvmc.hpp"
#include "xvseg/net.hpp"
#include "xvseg/ops.hpp"
#include "xvseg/oracles.hpp"
#include "xvseg/rng.hpp"
#include "xvseg/transforms.hpp"

namespace xvseg {
namespace {

namespace fs = std::filesystem;

Tensor rand_t(const Shape& shape, std::uint64_t seed, double lo = -1.0,
              double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = rng.uniform(lo, hi);
  }
  return t;
}

// Magnitudes in [lo, hi] with random sign: keeps every element away from
// zero so ops with a kink there (abs, relu, clamp) stay fd-checkable.
Tensor rand_signed(const Shape& shape, std::uint64_t seed, double lo = 0.2,
                   double hi = 1.2) {
  Tensor t = Tensor::zeros(shape);
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    t.data()[i] = sign * rng.uniform(lo, hi);
  }
  return t;
}

// Random assignment with every cluster hit at least once.
std::vector<int> covering_assign(Rng& rng, int n, int k) {
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i) {
    assign[i] = i < k ? i : rng.uniform_int(k);
  }
  return assign;
}

Tensor onehot_codes(const std::vector<int>& assign, int k) {
  Tensor C = Tensor::zeros({k, static_cast<int>(assign.size())});
  for (std::size_t j = 0; j < assign.size(); ++j) {
    C.data()[assign[j] * assign.size() + j] = 1.0;
  }
  return C;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("io: cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("io: short write to '" + path + "'");
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) {
    throw IoError("io: cannot create directory '" + p.string() +
                  "': " + ec.message());
  }
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::vector<std::uint8_t> to_bytes(const std::vector<int>& labels) {
  std::vector<std::uint8_t> bytes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(labels[i]);
  }
  return bytes;
}

}  // namespace

TrainResult run_train(const ExperimentConfig& cfg,
                      const std::string& out_dir) {
  const fs::path root(out_dir);
  const fs::path ck = root / "checkpoints";
  make_dirs(ck);
  // Written before training starts so even a diverged run is
  // self-describing.
  write_text((root / "config.resolved").string(), cfg.serialize());

  const Dataset ds = generate_dataset(cfg.data);
  const std::string snapshot = (ck / "diverged.bin").string();
  TrainResult result =
      train(ds, cfg.settings,
            [&snapshot](const ToyNetParams& net, const std::string&) {
              save_checkpoint(snapshot, net);
            });
  write_metrics_csv((root / "metrics.csv").string(), result.log);
  save_checkpoint((ck / "final.bin").string(), result.net);
  return result;
}

SegMetrics run_eval(const std::string& out_dir) {
  const fs::path root(out_dir);
  const ExperimentConfig cfg =
      ExperimentConfig::from_file((root / "config.resolved").string());
  const ToyNetParams net =
      load_checkpoint((root / "checkpoints" / "final.bin").string());
  const Dataset ds = generate_dataset(cfg.data);
  return evaluate(net, ds.val, cfg.settings.cvlr, cfg.settings.use_cvlr);
}

std::vector<std::string> run_ablate(const ExperimentConfig& base,
                                    const std::string& grid,
                                    const std::string& out_dir) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  std::istringstream parts(grid);
  std::string part;
  while (std::getline(parts, part, ';')) {
    if (trimmed(part).empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("ablate: expected key=v1,v2,..., got '" +
                        trimmed(part) + "'");
    }
    const std::string key = trimmed(part.substr(0, eq));
    std::vector<std::string> values;
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      if (!trimmed(v).empty()) values.push_back(trimmed(v));
    }
    if (key.empty() || values.empty()) {
      throw ConfigError("ablate: no values for '" + key + "'");
    }
    axes.emplace_back(key, std::move(values));
  }
  if (axes.empty()) throw ConfigError("ablate: empty grid");

  std::vector<std::string> cells;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    ExperimentConfig cfg = base;
    std::string name;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& value = axes[a].second[idx[a]];
      if (!name.empty()) name += ',';
      name += axes[a].first + "=" + value;
      // ':' stands in for the list separator inside one grid value.
      std::string plain = value;
      for (char& c : plain) {
        if (c == ':') c = ',';
      }
      cfg.set_override(axes[a].first + "=" + plain);
    }
    run_train(cfg, (fs::path(out_dir) / name).string());
    cells.push_back(name);

    // Odometer, last axis fastest.
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return cells;
    }
  }
}

void run_export_masks(const std::string& out_dir) {
  const fs::path root(out_dir);
  const ExperimentConfig cfg =
      ExperimentConfig::from_file((root / "config.resolved").string());
  const ToyNetParams net =
      load_checkpoint((root / "checkpoints" / "final.bin").string());
  const Dataset ds = generate_dataset(cfg.data);
  const fs::path masks = root / "masks";
  make_dirs(masks);

  char name[32];
  // Pseudo-masks over the train split, from deterministic geometry-only
  // views (no photometric jitter, no flips) so the export reproduces.
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    const Sample& s = ds.train[i];
    std::vector<Tensor> views;
    std::vector<GeomTransform> geoms;
    for (const double scale : cfg.settings.views.scales) {
      GeomTransform g{scale, false};
      geoms.push_back(g);
      views.push_back(apply_geom(g, s.image));
    }
    const NetOutput out =
        net_forward(net, views, cfg.settings.cvlr, cfg.settings.use_cvlr);
    const PseudoMask pm =
        calibrate(out.logits, geoms, s.image, cfg.settings.mvmc);
    std::snprintf(name, sizeof(name), "pseudo_%03zu.png", i);
    write_png_gray((masks / name).string(), pm.h, pm.w,
                   to_bytes(pm.labels_with_ignore()));
  }
  // Inference-path predictions over the val split.
  for (std::size_t i = 0; i < ds.val.size(); ++i) {
    const Sample& s = ds.val[i];
    const std::vector<int> pred =
        predict_mask(net, s.image, cfg.settings.cvlr, cfg.settings.use_cvlr);
    const int side = s.image.shape()[0];
    std::snprintf(name, sizeof(name), "pred_%03zu.png", i);
    write_png_gray((masks / name).string(), side, side, to_bytes(pred));
  }
}

bool check_kmeans_oracle(std::string& detail) {
  Rng rng(20'240'811);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor X = rand_t({8, 30}, rng.next_u64());
    const std::vector<int> init = covering_assign(rng, 30, 4);
    const FactorResult mf =
        factorize({X}, {onehot_codes(init, 4)}, 1.0, 5, AssignMode::kHard);
    const oracles::LloydResult ref = oracles::lloyd_kmeans(X, init, 4, 5);
    if (mf.hard_assignments.size() != 5) {
      detail = "trial " + std::to_string(trial) + ": expected 5 iterations";
      return false;
    }
    for (int it = 0; it < 5; ++it) {
      if (mf.hard_assignments[it] != ref.assignments[it]) {
        detail = "trial " + std::to_string(trial) + " iteration " +
                 std::to_string(it) + ": assignments differ from Lloyd";
        return false;
      }
    }
  }
  return true;
}

bool check_rank_bound(std::string& detail) {
  Rng rng(77'001);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Tensor> X = {rand_t({16, 50}, rng.next_u64()),
                                   rand_t({16, 50}, rng.next_u64())};
    const std::vector<Tensor> init = {
        softmax(rand_t({4, 50}, rng.next_u64()), 0),
        softmax(rand_t({4, 50}, rng.next_u64()), 0)};
    const FactorResult r = factorize(X, init, 1.0, 1 + trial % 3);
    for (std::size_t v = 0; v < r.recon.size(); ++v) {
      const std::vector<double> sv = oracles::singular_values(r.recon[v]);
      const int rank = oracles::numeric_rank(sv);
      if (rank > 4) {
        detail = "trial " + std::to_string(trial) + " view " +
                 std::to_string(v) + ": numeric rank " + std::to_string(rank) +
                 " exceeds 4";
        return false;
      }
    }
  }
  return true;
}

bool check_vq_monotone(std::string& detail) {
  Rng rng(88'002);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor X = rand_t({8, 30}, rng.next_u64());
    std::vector<Tensor> C = {onehot_codes(covering_assign(rng, 30, 4), 4)};
    Tensor D = update_dictionary({X}, C);
    double prev = vq_objective({X}, D, C);
    for (int it = 0; it < 5; ++it) {
      C = hard_codes({X}, D);
      const double after_assign = vq_objective({X}, D, C);
      if (after_assign > prev + 1e-9) {
        detail = "trial " + std::to_string(trial) + " iteration " +
                 std::to_string(it) + ": assignment step increased " +
                 std::to_string(prev) + " -> " + std::to_string(after_assign);
        return false;
      }
      D = update_dictionary({X}, C);
      const double after_means = vq_objective({X}, D, C);
      if (after_means > after_assign + 1e-9) {
        detail = "trial " + std::to_string(trial) + " iteration " +
                 std::to_string(it) + ": mean step increased " +
                 std::to_string(after_assign) + " -> " +
                 std::to_string(after_means);
        return false;
      }
      prev = after_means;
    }
  }
  return true;
}

bool check_gradients(std::string& detail) {
  std::vector<FdReport> reports;
  const auto weighted = [](const Tensor& out, std::uint64_t seed) {
    return sum_all(mul(out, rand_t(out.shape(), seed)));
  };

  {  // elementwise binary
    Tensor a = rand_t({3, 4}, 1), b = rand_t({3, 4}, 2);
    Tensor bz = rand_signed({3, 4}, 3);  // divisor away from zero
    reports.push_back(fd_check("add", {a, b}, [&] { return weighted(add(a, b), 10); }));
    reports.push_back(fd_check("sub", {a, b}, [&] { return weighted(sub(a, b), 11); }));
    reports.push_back(fd_check("mul", {a, b}, [&] { return weighted(mul(a, b), 12); }));
    reports.push_back(fd_check("div", {a, bz}, [&] { return weighted(div(a, bz), 13); }));
    reports.push_back(fd_check("add_scalar", {a}, [&] { return weighted(add_scalar(a, 0.7), 14); }));
    reports.push_back(fd_check("mul_scalar", {a}, [&] { return weighted(mul_scalar(a, -1.3), 15); }));
  }
  {  // elementwise unary
    Tensor a = rand_t({3, 4}, 4);
    Tensor pos = rand_t({3, 4}, 5, 0.3, 1.5);
    Tensor away = rand_signed({3, 4}, 6);
    reports.push_back(fd_check("exp", {a}, [&] { return weighted(exp_op(a), 16); }));
    reports.push_back(fd_check("log", {pos}, [&] { return weighted(log_op(pos), 17); }));
    reports.push_back(fd_check("sqrt", {pos}, [&] { return weighted(sqrt_op(pos), 18); }));
    reports.push_back(fd_check("abs", {away}, [&] { return weighted(abs_op(away), 19); }));
    reports.push_back(fd_check("relu", {away}, [&] { return weighted(relu(away), 20); }));
    reports.push_back(fd_check("softplus", {a}, [&] { return weighted(softplus(a), 21); }));
    reports.push_back(fd_check("reciprocal", {away}, [&] { return weighted(reciprocal(away), 22); }));
    reports.push_back(fd_check("clamp_min", {away}, [&] { return weighted(clamp_min(away, 0.15), 23); }));
  }
  {  // linear algebra
    Tensor a = rand_t({3, 4}, 7), b = rand_t({4, 5}, 8);
    Tensor m = rand_t({4, 3}, 9);
    Tensor s = rand_t({3}, 30), sz = rand_signed({3}, 31);
    reports.push_back(fd_check("matmul", {a, b}, [&] { return weighted(matmul(a, b), 24); }));
    reports.push_back(fd_check("transpose", {a}, [&] { return weighted(transpose(a), 25); }));
    reports.push_back(fd_check("scale_columns", {m, s}, [&] { return weighted(scale_columns(m, s), 26); }));
    reports.push_back(fd_check("div_columns", {m, sz}, [&] { return weighted(div_columns(m, sz), 27); }));
  }
  {  // shape manipulation
    Tensor a = rand_t({2, 6}, 32);
    Tensor v = rand_t({10}, 33);
    Tensor c1 = rand_t({3, 4, 2}, 34), c2 = rand_t({3, 4, 3}, 35);
    reports.push_back(fd_check("reshape", {a}, [&] { return weighted(reshape(a, {4, 3}), 36); }));
    reports.push_back(fd_check("slice1d", {v}, [&] { return weighted(slice1d(v, 2, 5), 37); }));
    reports.push_back(fd_check("concat_channels", {c1, c2}, [&] {
      return weighted(concat_channels(c1, c2), 38);
    }));
    reports.push_back(fd_check("hflip", {c1}, [&] { return weighted(hflip(c1), 39); }));
  }
  {  // softmax family and reductions
    Tensor a = rand_t({4, 5}, 40);
    reports.push_back(fd_check("softmax_ax0", {a}, [&] { return weighted(softmax(a, 0, 0.7), 41); }));
    reports.push_back(fd_check("softmax_ax1", {a}, [&] { return weighted(softmax(a, 1), 42); }));
    reports.push_back(fd_check("log_softmax", {a}, [&] { return weighted(log_softmax(a, 1), 43); }));
    reports.push_back(fd_check("sum_all", {a}, [&] { return mul_scalar(sum_all(a), 1.3); }));
    reports.push_back(fd_check("mean_all", {a}, [&] { return mul_scalar(mean_all(a), -0.8); }));
    reports.push_back(fd_check("sum_axis0", {a}, [&] { return weighted(sum_axis(a, 0), 44); }));
    reports.push_back(fd_check("sum_axis1", {a}, [&] { return weighted(sum_axis(a, 1), 45); }));
    reports.push_back(fd_check("mean_axis0", {a}, [&] { return weighted(mean_axis(a, 0), 46); }));
    reports.push_back(fd_check("mean_axis1", {a}, [&] { return weighted(mean_axis(a, 1), 47); }));
    reports.push_back(fd_check("max_axis0", {a}, [&] { return weighted(max_axis(a, 0), 48); }));
    reports.push_back(fd_check("max_axis1", {a}, [&] { return weighted(max_axis(a, 1), 49); }));
  }
  {  // spatial ops
    Tensor x = rand_t({5, 5, 2}, 50);
    Tensor k = rand_t({3, 3, 2, 3}, 51);
    Tensor b = rand_t({3}, 52);
    reports.push_back(fd_check("conv2d_s1", {x, k, b}, [&] {
      return weighted(conv2d(x, k, b, 1, 1), 53);
    }));
    reports.push_back(fd_check("conv2d_s2", {x, k, b}, [&] {
      return weighted(conv2d(x, k, b, 2, 1), 54);
    }));
    Tensor r = rand_t({4, 5, 2}, 55);
    reports.push_back(fd_check("bilinear_up", {r}, [&] {
      return weighted(bilinear_resize(r, 7, 6), 56);
    }));
    reports.push_back(fd_check("bilinear_down", {r}, [&] {
      return weighted(bilinear_resize(r, 2, 3), 57);
    }));
  }
  {  // cross-view module, both iteration counts
    for (const int T : {1, 3}) {
      Rng rng(60 + T);
      CvlrParams params = make_cvlr_params(8, 6, 3, rng);
      Tensor f0 = rand_t({4, 4, 8}, 61), f1 = rand_t({3, 5, 8}, 62);
      std::vector<Tensor> inputs = {f0, f1};
      for (const Tensor& p : params.parameters()) inputs.push_back(p);
      CvlrOptions opts;
      opts.T = T;
      reports.push_back(fd_check(
          "cvlr_T" + std::to_string(T), inputs, [&] {
            const CvlrOutput out = cvlr_forward({f0, f1}, params, opts);
            Tensor loss = weighted(out.refined[0], 63);
            loss = add(loss, weighted(out.refined[1], 64));
            loss = add(loss, weighted(out.aux_logits[0], 65));
            loss = add(loss, weighted(out.aux_logits[1], 66));
            return loss;
          }));
    }
  }
  {  // the four loss terms
    Tensor l0 = rand_t({4, 4, 3}, 70), l1 = rand_t({3, 3, 3}, 71);
    std::vector<std::vector<int>> targets = {
        {0, 1, 2, 255, 0, 1, 2, 0, 1, 255, 2, 0, 1, 2, 0, 1},
        {2, 255, 0, 1, 2, 0, 1, 2, 255}};
    reports.push_back(fd_check("seg_loss", {l0, l1}, [&] {
      return seg_loss({l0, l1}, targets);
    }));

    Tensor c0 = rand_t({4, 4, 4}, 72), c1 = rand_t({5, 5, 4}, 73);
    const std::vector<int> labels = {1, 0, 1};
    reports.push_back(fd_check("cls_loss", {c0, c1}, [&] {
      return cls_loss({c0, c1}, labels);
    }));

    Tensor m0 = rand_t({4, 4, 3}, 74), m1 = rand_t({2, 2, 3}, 75);
    const std::vector<GeomTransform> geoms = {{1.0, false}, {0.5, true}};
    const std::vector<int> channels = {0, 2};
    reports.push_back(fd_check("mask_consistency", {m0, m1}, [&] {
      return mask_consistency_loss({m0, m1}, geoms, channels, 4, 4);
    }));

    Tensor k0 = softmax(rand_t({3, 16}, 76), 0);
    Tensor k1 = softmax(rand_t({3, 4}, 77), 0);
    const std::vector<Shape> shapes = {{4, 4}, {2, 2}};
    const std::vector<GeomTransform> cg = {{1.0, false}, {0.5, false}};
    reports.push_back(fd_check("code_consistency", {k0, k1}, [&] {
      return code_consistency_loss({k0, k1}, shapes, cg, 4, 4);
    }));
  }

  int checked = 0;
  for (const FdReport& r : reports) {
    if (!r.ok) {
      detail = r.detail;
      return false;
    }
    checked += r.checked;
  }
  if (checked < 1000) {
    detail = "only " + std::to_string(checked) + " derivatives checked";
    return false;
  }
  return true;
}

bool check_mvmc_suite(std::string& detail) {
  CalibrateConfig permissive;
  permissive.gamma = 0.0;
  permissive.tie_delta = 0.0;
  permissive.refine.iterations = 0;

  {  // single view + identity + no refine + gamma 0 collapses to argmax
    const Tensor logits = rand_t({5, 5, 3}, 301);
    const Tensor img = rand_t({5, 5, 3}, 302, 0.0, 1.0);
    const PseudoMask pm =
        calibrate({logits}, {GeomTransform{}}, img, permissive);
    for (int p = 0; p < 25; ++p) {
      int best = 0;
      for (int c = 1; c < 3; ++c) {
        if (logits.data()[p * 3 + c] > logits.data()[p * 3 + best]) best = c;
      }
      if (pm.labels[p] != best || pm.ignore[p]) {
        detail = "degenerate calibrate does not reduce to argmax at pixel " +
                 std::to_string(p);
        return false;
      }
    }
  }
  {  // view-permutation invariance
    CalibrateConfig cfg;
    cfg.gamma = 0.6;
    cfg.tie_delta = 0.05;
    cfg.refine.iterations = 2;
    const Tensor img = rand_t({6, 6, 3}, 303, 0.0, 1.0);
    const std::vector<Tensor> logits = {rand_t({6, 6, 4}, 304),
                                        rand_t({3, 3, 4}, 305),
                                        rand_t({6, 6, 4}, 306)};
    const std::vector<GeomTransform> geoms = {
        {1.0, false}, {0.5, false}, {1.0, true}};
    const PseudoMask a = calibrate(logits, geoms, img, cfg);
    const PseudoMask b = calibrate({logits[2], logits[0], logits[1]},
                                   {geoms[2], geoms[0], geoms[1]}, img, cfg);
    if (a.labels != b.labels || a.ignore != b.ignore) {
      detail = "calibrate output depends on view order";
      return false;
    }
    for (std::size_t i = 0; i < a.confidence.size(); ++i) {
      if (std::fabs(a.confidence[i] - b.confidence[i]) >= 1e-12) {
        detail = "calibrate confidence depends on view order";
        return false;
      }
    }
  }
  {  // stop-gradient boundary
    Tensor logits = rand_t({4, 4, 2}, 307);
    logits.set_requires_grad(true);
    const Tensor img = rand_t({4, 4, 3}, 308, 0.0, 1.0);
    Tape tape;
    Tape::Scope scope(tape);
    const PseudoMask pm =
        calibrate({logits}, {GeomTransform{}}, img, permissive);
    if (tape.size() != 0 || pm.labels.size() != 16) {
      detail = "calibrate recorded " + std::to_string(tape.size()) +
               " tape nodes across the stop-gradient";
      return false;
    }
  }
  {  // refine preserves distribution validity
    const Tensor probs = softmax(rand_t({6, 6, 3}, 309), 2);
    const Tensor img = rand_t({6, 6, 3}, 310, 0.0, 1.0);
    RefineConfig rc;
    rc.iterations = 3;
    const Tensor smoothed = refine(probs, img, rc);
    for (int p = 0; p < 36; ++p) {
      double sum = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = smoothed.data()[p * 3 + c];
        if (v < 0.0) {
          detail = "refine produced a negative probability";
          return false;
        }
        sum += v;
      }
      if (std::fabs(sum - 1.0) > 1e-12) {
        detail = "refine broke normalization: pixel sums to " +
                 std::to_string(sum);
        return false;
      }
    }
  }
  return true;
}

bool check_metric_oracle(std::string& detail) {
  Rng rng(99'003);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> gt(64), pred(64);
    for (int i = 0; i < 64; ++i) {
      gt[i] = rng.uniform_int(3);
      if (rng.uniform() < 0.125) gt[i] = kIgnoreLabel;
      pred[i] = rng.uniform_int(3);
    }
    ConfusionAccumulator conf(3);
    conf.add(gt, pred);
    const SegMetrics got = metrics(conf);
    const oracles::PixelMetrics want = oracles::brute_metrics(gt, pred, 3);
    if (got.miou != want.miou || got.mfdr != want.mfdr ||
        got.mfnr != want.mfnr) {
      detail = "trial " + std::to_string(trial) +
               ": confusion-matrix metrics differ from brute-force counts";
      return false;
    }
  }
  return true;
}

int run_selftest(std::ostream& out) {
  using Check = std::pair<const char*, bool (*)(std::string&)>;
  const Check checks[] = {
      {"kmeans-oracle", check_kmeans_oracle},
      {"low-rank-bound", check_rank_bound},
      {"vq-monotone", check_vq_monotone},
      {"gradient-fd", check_gradients},
      {"mvmc-degenerate", check_mvmc_suite},
      {"metric-oracle", check_metric_oracle},
  };
  int failures = 0;
  for (const Check& c : checks) {
    std::string detail;
    if (c.second(detail)) {
      out << "ok " << c.first << "\n";
    } else {
      out << "FAIL " << c.first << ": " << detail << "\n";
      ++failures;
    }
  }

  {  // dataset determinism: same spec twice, bit-identical samples
    DatasetSpec spec;
    spec.train_count = 6;
    spec.val_count = 3;
    spec.image_size = 48;
    spec.seed = 9;
    const Dataset a = generate_dataset(spec);
    const Dataset b = generate_dataset(spec);
    bool same = a.train.size() == b.train.size() &&
                a.val.size() == b.val.size();
    const auto same_sample = [](const Sample& x, const Sample& y) {
      if (x.gt_mask != y.gt_mask || x.image_labels != y.image_labels ||
          x.image.size() != y.image.size()) {
        return false;
      }
      for (std::size_t i = 0; i < x.image.size(); ++i) {
        if (x.image.data()[i] != y.image.data()[i]) return false;
      }
      return true;
    };
    for (std::size_t i = 0; same && i < a.train.size(); ++i) {
      same = same_sample(a.train[i], b.train[i]);
    }
    for (std::size_t i = 0; same && i < a.val.size(); ++i) {
      same = same_sample(a.val[i], b.val[i]);
    }
    if (same) {
      out << "ok dataset-determinism\n";
    } else {
      out << "FAIL dataset-determinism: same seed produced different data\n";
      ++failures;
    }
  }
  return failures;
}

}  // namespace xvseg
