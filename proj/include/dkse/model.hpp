#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dkse/graph.hpp"
#include "dkse/params.hpp"

namespace dkse {

// How route scores are normalized into aggregation weights.
enum class GroupingMode { Global, Vertical, Horizontal, Base };

// Which route elements contribute embeddings to the selector.
struct AblationMask {
  bool user_item = true;  // the root node
  bool relation = true;   // every relation along the route
  bool head = true;       // intermediate nodes
  bool tail = true;       // the terminal node
  bool operator==(const AblationMask&) const = default;
};

struct ModelConfig {
  GroupingMode grouping = GroupingMode::Global;
  AblationMask mask;
  // Raw-ratio normalization (scores divided by their cell sum) instead of
  // softmax; kept off by default, softmax is total.
  bool strict_ratio_norm = false;
  // Aggregate terminal-node embeddings instead of selected features.
  bool aggregate_terminals = false;
};

// A route element resolved to the tensor row holding its embedding.
struct ElementRef {
  bool is_relation = false;
  int32_t id = 0;
  bool operator==(const ElementRef&) const = default;
  auto operator<=>(const ElementRef&) const = default;
};

// Embedding indices of the route's elements in order, dropping the classes
// the mask excludes. If the mask empties the route, the terminal is kept so
// the selector always has at least one element.
std::vector<ElementRef> route_elements(const ChainRoute& route,
                                       const AblationMask& mask);

// k_i = relu(w_k e_i + b_k); pi_i = q . k_i; weights = softmax(pi);
// e_c = sum_i weight_i e_i over the raw element vectors.
std::vector<double> knowledge_selector(
    const std::vector<std::span<const double>>& elements,
    std::span<const double> query, const ParameterSet& params,
    std::vector<double>* weights_out = nullptr);

// s_c = w_c . e_c + b_c
double route_score(std::span<const double> selected, const ParameterSet& params);

// Per-cell normalized weights summing to 1 overall. Cells: Global = one,
// Vertical = shared first-hop neighbor, Horizontal = equal depth, Base =
// uniform 1/m with no score comparison.
std::vector<double> group_normalize(const std::vector<double>& scores,
                                    const std::vector<ChainRoute>& routes,
                                    GroupingMode mode, bool strict_ratio = false);

// e_N = sum_c weight_c feature_c; empty input gives the zero vector.
std::vector<double> evaluate_routes(
    const std::vector<std::vector<double>>& features,
    const std::vector<double>& weights, int dim);

// Everything the backward pass needs from one node's forward evaluation.
// Selector keys are stored once per distinct element, so repeated visits to
// the same node or relation cost O(d), not O(d^2).
struct NodeTrace {
  bool empty = true;
  int dim = 0;
  int queries = 0;
  std::vector<std::vector<int32_t>> elem_of_route;  // indices into distinct
  std::vector<int32_t> terminal;                    // per route
  std::vector<ElementRef> distinct;
  std::vector<double> keys;   // distinct x d
  std::vector<char> gate;     // distinct x d, pre-activation > 0
  std::vector<double> scores;   // queries x routes
  std::vector<double> weights;  // queries x routes
  std::vector<double> attn;     // softmax weights, flattened
  std::vector<size_t> attn_off; // queries*routes + 1 offsets into attn
  std::vector<int32_t> cell_of; // per route
  int32_t n_cells = 1;
  std::vector<double> features;  // routes x d, what e_N aggregated
  std::vector<double> avg_w;     // routes
};

// Multi-query forward pass for one node: per query, select/score/normalize
// every route; average weights and selected features across queries; weighted
// sum. Zero routes give the zero vector. Fills `trace` when given.
std::vector<double> forward_node(const NeighborhoodSample& sample,
                                 const ParameterSet& params,
                                 const ModelConfig& config,
                                 NodeTrace* trace = nullptr,
                                 std::vector<double>* avg_weights_out = nullptr);

inline std::vector<double> msal(const NeighborhoodSample& sample,
                                const ParameterSet& params,
                                const ModelConfig& config,
                                std::vector<double>* avg_weights_out = nullptr) {
  return forward_node(sample, params, config, nullptr, avg_weights_out);
}

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(e_N).
void backward_node(const NodeTrace& trace, const ParameterSet& params,
                   const ModelConfig& config, std::span<const double> upstream,
                   TensorPack& grads);

// Enriched embedding e + e_N; an empty neighborhood vector acts as zero.
std::vector<double> enrich(std::span<const double> e, std::span<const double> e_n);

double sigmoid(double x);

// sigmoid(eu . ev)
double predict(std::span<const double> eu, std::span<const double> ev);

}  // namespace dkse
