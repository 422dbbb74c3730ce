#pragma once

#include <string>
#include <vector>

#include "dkse/cache.hpp"
#include "dkse/checkpoint.hpp"
#include "dkse/config.hpp"
#include "dkse/metrics.hpp"
#include "dkse/synthetic.hpp"

namespace dkse {

// All commands lock the output directory for their duration and write every
// file atomically, so a crash or a concurrent run never leaves partial state.

struct PrepareOutput {
  DatasetSplit split;
  std::string stats;  // key=value block, also written to stats.txt
};

// load -> implicit labels -> k-core -> split -> negatives; caches the split
// (split.tsv + ids.tsv) and prints corpus statistics.
PrepareOutput cmd_prepare(const RunConfig& config);

struct TrainOutput {
  Checkpoint checkpoint;
  MetricsReport validation;
  MetricsReport test;
  int best_epoch = -1;
  size_t epochs_run = 0;
};

// Fits on the cached split; writes model.ckpt, train.log, and the final
// validation/test reports.
TrainOutput cmd_train(const RunConfig& config);

struct EvaluateOutput {
  MetricsReport report;
  std::string topk_csv;
};

// Scores the cached test split with a saved checkpoint (default
// out_dir/model.ckpt); writes evaluation.txt and topk.csv.
EvaluateOutput cmd_evaluate(const RunConfig& config,
                            const std::string& checkpoint_path = "");

// Trains and evaluates the full model, the four grouping modes, and the five
// component ablations (exactly 10 rows); writes ablation.tsv.
std::string cmd_ablate(const RunConfig& config);

struct SweepCell {
  int l = 0;        // sampling depth, both sides (depth/fanout axes)
  int fanout = 0;   // fan-out, both sides (fanout axis)
  int queries = 0;  // query count (queries axis)
};

// The standard grids: depth l 1..4; fanout (l,n) over {1..4}x{4,8,16,32,64};
// queries {1,2,4,6,8}.
std::vector<SweepCell> sweep_grid(const std::string& axis);

// One fit per grid cell; writes sweep.csv. `grid` overrides the default
// cells (the CLI always uses the defaults).
std::string cmd_sweep(const RunConfig& config, const std::string& axis,
                      const std::vector<SweepCell>* grid = nullptr);

// Writes the three synthetic TSVs into the output directory.
SyntheticPaths cmd_synth(const RunConfig& config);

}  // namespace dkse
