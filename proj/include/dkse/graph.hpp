#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dkse/rng.hpp"

namespace dkse {

// One knowledge-graph edge. Self-loops are allowed in raw input and collapse
// to a single adjacency entry on load.
struct Triple {
  int32_t head = 0;
  int32_t relation = 0;
  int32_t tail = 0;
  auto operator<=>(const Triple&) const = default;
};

enum class NodeRole : uint8_t { User, Item, Entity };

struct EdgeTo {
  int32_t relation = 0;
  int32_t neighbor = 0;
  auto operator<=>(const EdgeTo&) const = default;
};

struct GraphCounts {
  int32_t users = 0;
  int32_t items = 0;
  int32_t entities = 0;
  int32_t relations = 0;  // knowledge-graph relations, excluding interact
};

// A positive user-item interaction in dense ids.
struct Interaction {
  int32_t user = 0;
  int32_t item = 0;
};

// The collaborative unified graph: user-item interactions and KG triples in
// one merged id space, items aligned to entities sharing a single node.
// Immutable after build; safe for concurrent reads.
class UnifiedGraph {
 public:
  // Merges the bipartite interaction graph with the KG. The interact relation
  // id is allocated as counts.relations (one past the last KG relation).
  // Every edge is stored in both endpoint adjacency lists, deduplicated, and
  // sorted by (relation, neighbor).
  static UnifiedGraph build(const std::vector<Interaction>& positives,
                            const std::vector<Triple>& triples,
                            const std::vector<std::pair<int32_t, int32_t>>& alignment,
                            const GraphCounts& counts);

  int32_t node_count() const { return static_cast<int32_t>(adjacency_.size()); }
  int32_t relation_count() const { return relation_count_; }  // includes interact
  int32_t interact_relation() const { return interact_relation_; }

  std::span<const EdgeTo> neighbors(int32_t node) const;
  NodeRole role(int32_t node) const;

  // Dense-id translation into the merged node space.
  int32_t user_node(int32_t user) const;
  int32_t item_node(int32_t item) const;
  int32_t entity_node(int32_t entity) const;

  int32_t user_count() const { return user_count_; }
  int32_t item_count() const { return item_count_; }

 private:
  std::vector<std::vector<EdgeTo>> adjacency_;
  std::vector<NodeRole> roles_;
  std::vector<int32_t> entity_to_node_;
  int32_t user_count_ = 0;
  int32_t item_count_ = 0;
  int32_t relation_count_ = 0;
  int32_t interact_relation_ = 0;
};

// A root-anchored path alternating node, relation, node, ...
struct ChainRoute {
  std::vector<int32_t> elements;
  int depth() const { return (static_cast<int>(elements.size()) - 1) / 2; }
};

struct NeighborhoodSample {
  int32_t root = -1;
  int layer_size = 0;  // fan-out n
  int max_depth = 0;   // l
  std::vector<ChainRoute> routes;
};

// Layered sampling with replacement at fixed fan-out. Routes of every depth
// 1..depth are enumerated, so a non-isolated root yields sum_{k=1..l} n^k
// routes. `exclude` removes one specific interaction edge (both directions)
// from consideration while the pair it names is being scored.
NeighborhoodSample sample_neighborhood(
    const UnifiedGraph& graph, int32_t root, int depth, int fanout, Rng rng,
    std::optional<std::pair<int32_t, int32_t>> exclude = std::nullopt);

}  // namespace dkse
