#include "dkse/graph.hpp"

#include <algorithm>
#include <string>

#include "dkse/util.hpp"

namespace dkse {

UnifiedGraph UnifiedGraph::build(
    const std::vector<Interaction>& positives, const std::vector<Triple>& triples,
    const std::vector<std::pair<int32_t, int32_t>>& alignment,
    const GraphCounts& counts) {
  check(counts.users >= 0 && counts.items >= 0 && counts.entities >= 0 &&
            counts.relations >= 0,
        "graph counts must be nonnegative");

  UnifiedGraph g;
  g.user_count_ = counts.users;
  g.item_count_ = counts.items;
  g.interact_relation_ = counts.relations;
  g.relation_count_ = counts.relations + 1;

  // Aligned entities share their item's node; the rest get fresh ids after
  // the user and item blocks.
  g.entity_to_node_.assign(static_cast<size_t>(counts.entities), -1);
  std::vector<int32_t> item_owner(static_cast<size_t>(counts.items), -1);
  for (const auto& [item, entity] : alignment) {
    check(item >= 0 && item < counts.items,
          "alignment names unknown item " + std::to_string(item));
    check(entity >= 0 && entity < counts.entities,
          "alignment names unknown entity " + std::to_string(entity));
    check(g.entity_to_node_[entity] == -1,
          "entity " + std::to_string(entity) + " aligned twice");
    check(item_owner[item] == -1,
          "item " + std::to_string(item) + " aligned twice");
    g.entity_to_node_[entity] = counts.users + item;
    item_owner[item] = entity;
  }
  int32_t next = counts.users + counts.items;
  for (int32_t e = 0; e < counts.entities; ++e) {
    if (g.entity_to_node_[e] == -1) g.entity_to_node_[e] = next++;
  }

  g.adjacency_.resize(static_cast<size_t>(next));
  g.roles_.assign(static_cast<size_t>(next), NodeRole::Entity);
  std::fill(g.roles_.begin(), g.roles_.begin() + counts.users, NodeRole::User);
  std::fill(g.roles_.begin() + counts.users,
            g.roles_.begin() + counts.users + counts.items, NodeRole::Item);

  auto add_edge = [&g](int32_t a, int32_t r, int32_t b) {
    g.adjacency_[a].push_back({r, b});
    if (b != a) g.adjacency_[b].push_back({r, a});
  };

  for (const auto& p : positives) {
    check(p.user >= 0 && p.user < counts.users,
          "interaction names unknown user " + std::to_string(p.user));
    check(p.item >= 0 && p.item < counts.items,
          "interaction names unknown item " + std::to_string(p.item));
    add_edge(p.user, g.interact_relation_, counts.users + p.item);
  }
  for (const auto& t : triples) {
    check(t.head >= 0 && t.head < counts.entities,
          "triple names unknown head entity " + std::to_string(t.head));
    check(t.tail >= 0 && t.tail < counts.entities,
          "triple names unknown tail entity " + std::to_string(t.tail));
    check(t.relation >= 0 && t.relation < counts.relations,
          "triple names unknown relation " + std::to_string(t.relation));
    add_edge(g.entity_to_node_[t.head], t.relation, g.entity_to_node_[t.tail]);
  }

  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    list.shrink_to_fit();
  }
  return g;
}

std::span<const EdgeTo> UnifiedGraph::neighbors(int32_t node) const {
  check(node >= 0 && node < node_count(), "node id out of range");
  return adjacency_[static_cast<size_t>(node)];
}

NodeRole UnifiedGraph::role(int32_t node) const {
  check(node >= 0 && node < node_count(), "node id out of range");
  return roles_[static_cast<size_t>(node)];
}

int32_t UnifiedGraph::user_node(int32_t user) const {
  check(user >= 0 && user < user_count_, "user id out of range");
  return user;
}

int32_t UnifiedGraph::item_node(int32_t item) const {
  check(item >= 0 && item < item_count_, "item id out of range");
  return user_count_ + item;
}

int32_t UnifiedGraph::entity_node(int32_t entity) const {
  check(entity >= 0 && entity < static_cast<int32_t>(entity_to_node_.size()),
        "entity id out of range");
  return entity_to_node_[static_cast<size_t>(entity)];
}

NeighborhoodSample sample_neighborhood(
    const UnifiedGraph& graph, int32_t root, int depth, int fanout, Rng rng,
    std::optional<std::pair<int32_t, int32_t>> exclude) {
  check(depth >= 0, "sampling depth must be nonnegative");
  check(fanout >= 0, "sampling fan-out must be nonnegative");

  NeighborhoodSample out;
  out.root = root;
  out.layer_size = fanout;
  out.max_depth = depth;

  const int32_t interact = graph.interact_relation();
  auto excluded = [&](int32_t from, const EdgeTo& e) {
    if (!exclude || e.relation != interact) return false;
    auto [a, b] = *exclude;
    return (from == a && e.neighbor == b) || (from == b && e.neighbor == a);
  };

  // Edges usable from `node`; only the excluded pair's endpoints need
  // filtering, every other node samples straight from its adjacency span.
  std::vector<EdgeTo> filtered;
  auto usable = [&](int32_t node) -> std::span<const EdgeTo> {
    auto all = graph.neighbors(node);
    if (!exclude || (node != exclude->first && node != exclude->second))
      return all;
    filtered.assign(all.begin(), all.end());
    std::erase_if(filtered, [&](const EdgeTo& e) { return excluded(node, e); });
    return filtered;
  };

  if (depth == 0 || fanout == 0) return out;
  {
    auto first = usable(root);
    if (first.empty()) return out;  // isolated root: empty neighborhood
  }

  // Grow layer by layer; every partial path is itself a route, so all depths
  // 1..depth contribute.
  std::vector<ChainRoute> frontier;
  frontier.push_back(ChainRoute{{root}});
  size_t total = 0;
  for (int d = 1; d <= depth; ++d) total = total * fanout + static_cast<size_t>(fanout);
  out.routes.reserve(total);

  for (int d = 1; d <= depth; ++d) {
    std::vector<ChainRoute> next_frontier;
    next_frontier.reserve(frontier.size() * static_cast<size_t>(fanout));
    for (const ChainRoute& path : frontier) {
      int32_t tip = path.elements.back();
      auto edges = usable(tip);
      // A reachable node always keeps the edge it was reached by, so a
      // non-isolated root never dead-ends mid-walk.
      check(!edges.empty(), "unexpected dead end during sampling");
      for (int k = 0; k < fanout; ++k) {
        const EdgeTo& pick = edges[rng.uniform_index(edges.size())];
        ChainRoute extended = path;
        extended.elements.push_back(pick.relation);
        extended.elements.push_back(pick.neighbor);
        out.routes.push_back(extended);
        next_frontier.push_back(std::move(extended));
      }
    }
    frontier = std::move(next_frontier);
  }
  return out;
}

}  // namespace dkse
