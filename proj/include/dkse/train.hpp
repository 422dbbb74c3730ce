#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dkse/graph.hpp"
#include "dkse/ingest.hpp"
#include "dkse/model.hpp"
#include "dkse/params.hpp"

namespace dkse {

struct HyperParams {
  int l_u = 1;
  int n_u = 4;
  int l_v = 1;
  int n_v = 4;
  int d = 16;
  int n = 2;  // query count
  double lambda = 1e-5;
  double tau = 0.2;
  double learning_rate = 1e-3;
  int batch_size = 1024;
  int epochs = 100;
  int patience = 5;  // early stopping on validation AUC
  int negative_ratio = 1;
  GroupingMode grouping = GroupingMode::Global;
  AblationMask mask;
  bool use_contrastive = true;
  // Divide the raw dot product by tau instead of sigmoid(dot)/tau.
  bool contrastive_raw_logits = false;
  bool strict_ratio_norm = false;
  bool aggregate_terminals = false;
  // Off: score raw embeddings only (plain matrix factorization).
  bool use_neighborhood = true;
  uint64_t seed = 0;

  void validate() const;
  ModelConfig model_config() const;
};

// One training example resolved to merged-graph node ids.
struct BatchExample {
  int32_t user_node = 0;
  int32_t item_node = 0;
  int8_t label = 0;
};

struct LossTerms {
  double bce = 0;
  double contrastive = 0;
  double l2 = 0;
  double total = 0;
};

// Everything recorded during a batch forward that backward() needs.
struct PairForward {
  BatchExample example;
  NodeTrace user_trace;
  NodeTrace item_trace;
  std::vector<double> eu;  // enriched
  std::vector<double> ev;
  double yhat = 0;
};

struct GradientTape {
  std::vector<PairForward> pairs;
};

// Cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(double yhat, int label);

// In-batch contrastive term over positive pairs: logits are
// sigmoid(eu_i . ev_j)/tau (or the raw dot/tau), row-softmax cross-entropy
// against the diagonal, mean over rows. A single pair contributes 0.
double contrastive_loss(const std::vector<std::vector<double>>& eu,
                        const std::vector<std::vector<double>>& ev, double tau,
                        bool raw_logits = false);

// lambda * sum of squares over every trainable tensor.
double l2_penalty(const ParameterSet& params, double lambda);

// Forward pass over a batch: fresh neighborhood samples per pair (stream
// seeds them deterministically), the scored pair's own interact edge is
// always excluded. Fills `tape` when given.
LossTerms total_loss(const std::vector<BatchExample>& batch,
                     const UnifiedGraph& graph, const ParameterSet& params,
                     const HyperParams& hyper, uint64_t stream,
                     GradientTape* tape = nullptr);

// Reverse-mode gradients of the recorded composite loss for every tensor.
TensorPack backward(const GradientTape& tape, const ParameterSet& params,
                    const HyperParams& hyper);

struct AdamState {
  TensorPack m;
  TensorPack v;
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  static AdamState init(const TensorShapes& shape);
};

// Standard bias-corrected Adam; aborts on a non-finite update.
void adam_step(ParameterSet& params, const TensorPack& grads, AdamState& state,
               double learning_rate);

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double bce = 0;
  double contrastive = 0;
  double l2 = 0;
  double val_auc = 0;  // NaN when validation has a single class
};

std::string format_epoch(const EpochStats& stats);

struct FitResult {
  ParameterSet params;  // best validation AUC snapshot
  std::vector<EpochStats> history;
  int best_epoch = -1;
};

// Evaluation sampling stream for a run seed; fit's validation pass and any
// later evaluation of the checkpoint share it, so their scores agree.
uint64_t eval_stream(uint64_t seed);

// Scores one pair with evaluation semantics: per-node seeds derived from
// `seed` so repeated calls agree, the scored edge excluded.
double score_pair(const UnifiedGraph& graph, const ParameterSet& params,
                  const HyperParams& hyper, int32_t user_node,
                  int32_t item_node, uint64_t seed);

// Epoch loop: shuffle, batch, fresh samples, forward, backward, Adam;
// validation AUC each epoch with early stopping. Writes one key=value line
// per epoch to `log` when given.
FitResult fit(const DatasetSplit& split, const UnifiedGraph& graph,
              const HyperParams& hyper, std::ostream* log = nullptr);

}  // namespace dkse
