#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "xvseg/config.hpp"
#include "xvseg/harness.hpp"
#include "xvseg/tensor.hpp"

namespace {

// Exit codes: 0 success, 2 configuration problem (message names the field),
// 3 numeric divergence, 1 anything else.
constexpr int kOkExit = 0;
constexpr int kErrorExit = 1;
constexpr int kConfigExit = 2;
constexpr int kDivergedExit = 3;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string grid;
  long long seed = -1;
};

xvseg::ExperimentConfig resolve(const Options& opt) {
  xvseg::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = xvseg::ExperimentConfig::from_file(opt.config_path);
  }
  for (const std::string& assignment : opt.overrides) {
    cfg.set_override(assignment);
  }
  if (opt.seed >= 0) {
    // One flag reseeds the whole run: data generation and training.
    cfg.set_override("data.seed = " + std::to_string(opt.seed));
    cfg.set_override("run.seed = " + std::to_string(opt.seed));
  }
  return cfg;
}

void print_metrics(const char* tag, const xvseg::SegMetrics& m) {
  std::printf("%s miou=%.6f mfdr=%.6f mfnr=%.6f\n", tag, m.miou, m.mfdr,
              m.mfnr);
}

void add_common(CLI::App* cmd, Options& opt, bool with_config,
                bool with_out) {
  if (with_config) {
    cmd->add_option("--config", opt.config_path,
                    "configuration file (defaults apply when omitted)");
    cmd->add_option("--set", opt.overrides,
                    "override one key, e.g. --set optim.lr=0.02 (repeatable)");
    cmd->add_option("--seed", opt.seed,
                    "reseed the run: sets data.seed and run.seed");
  }
  if (with_out) {
    cmd->add_option("--out", opt.out_dir, "run directory")->required();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised toy segmentation experiments"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* train = app.add_subcommand("train", "train and write artifacts");
  add_common(train, opt, true, true);

  CLI::App* eval =
      app.add_subcommand("eval", "evaluate a finished run's checkpoint");
  add_common(eval, opt, false, true);

  CLI::App* ablate =
      app.add_subcommand("ablate", "train one run per grid cell");
  add_common(ablate, opt, true, true);
  ablate
      ->add_option("--grid", opt.grid,
                   "sweep spec: key=v1,v2[;key2=...] (':' separates list "
                   "elements within one value)")
      ->required();

  CLI::App* selftest =
      app.add_subcommand("selftest", "run the built-in oracle checks");
  (void)selftest;

  CLI::App* export_masks = app.add_subcommand(
      "export-masks", "write pseudo-masks and predictions as PNGs");
  add_common(export_masks, opt, false, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const xvseg::TrainResult result = run_train(resolve(opt), opt.out_dir);
      print_metrics("final", result.log.back().val);
    } else if (eval->parsed()) {
      print_metrics("val", xvseg::run_eval(opt.out_dir));
    } else if (ablate->parsed()) {
      const std::vector<std::string> cells =
          xvseg::run_ablate(resolve(opt), opt.grid, opt.out_dir);
      for (const std::string& cell : cells) {
        std::printf("cell %s\n", cell.c_str());
      }
    } else if (selftest->parsed()) {
      const int failures = xvseg::run_selftest(std::cout);
      return failures == 0 ? kOkExit : kErrorExit;
    } else if (export_masks->parsed()) {
      xvseg::run_export_masks(opt.out_dir);
    }
  } catch (const xvseg::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const xvseg::ParamError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const xvseg::NumericError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kDivergedExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kErrorExit;
  }
  return kOkExit;
}
