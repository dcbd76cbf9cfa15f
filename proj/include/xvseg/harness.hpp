#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "xvseg/config.hpp"
#include "xvseg/metrics.hpp"
#include "xvseg/train.hpp"

namespace xvseg {

// Orchestration behind the CLI subcommands. These throw (ConfigError,
// IoError, NumericError) rather than returning status codes; the CLI maps
// exception types onto exit codes.

// Full training run. Writes into out_dir:
//   config.resolved        exact configuration after overrides
//   metrics.csv            one row per epoch
//   checkpoints/final.bin  parameters at the last epoch
// If training diverges, config.resolved plus a checkpoints/diverged.bin
// snapshot are left behind and the NumericError propagates.
TrainResult run_train(const ExperimentConfig& cfg, const std::string& out_dir);

// Evaluates out_dir/checkpoints/final.bin on the val split of the dataset
// the stored out_dir/config.resolved describes.
SegMetrics run_eval(const std::string& out_dir);

// Cartesian sweep: "loss.lambda_reg=0,4,64;optim.lr=0.01,0.02" trains one
// cell per combination under out_dir/<key=value[,key=value]>/. Within a
// value, ':' stands in for the list separator (views.scales=1.0:0.5).
// Returns the cell directory names in run order.
std::vector<std::string> run_ablate(const ExperimentConfig& base,
                                    const std::string& grid,
                                    const std::string& out_dir);

// Writes masks/ next to the checkpoint in out_dir: calibrated pseudo-masks
// for the train split (pseudo_NNN.png, built from deterministic views) and
// argmax predictions for the val split (pred_NNN.png). Class index per
// pixel, 255 = ignore.
void run_export_masks(const std::string& out_dir);

// Named oracle/invariant checks, each implemented against an independent
// reference. The individual checks back both `selftest` and the acceptance
// gate; `detail` carries a human-readable failure description.
bool check_kmeans_oracle(std::string& detail);
bool check_rank_bound(std::string& detail);
bool check_vq_monotone(std::string& detail);
bool check_gradients(std::string& detail);
bool check_mvmc_suite(std::string& detail);
bool check_metric_oracle(std::string& detail);

// Runs every check above plus dataset determinism, printing one
// "ok <name>" / "FAIL <name>: why" line each. Returns the failure count.
int run_selftest(std::ostream& out);

}  // namespace xvseg
