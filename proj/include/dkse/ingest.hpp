#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dkse/graph.hpp"
#include "dkse/rng.hpp"

namespace dkse {

// One raw ratings line. Timestamp is parsed but otherwise ignored.
struct InteractionRecord {
  std::string user;
  std::string item;
  std::optional<double> rating;
  std::optional<int64_t> timestamp;
};

struct LabeledPair {
  int32_t user = 0;
  int32_t item = 0;
  int8_t label = 0;
  auto operator<=>(const LabeledPair&) const = default;
};

// Bijection raw string id <-> dense integer id, in first-appearance order.
class IdMap {
 public:
  int32_t get_or_add(const std::string& name);
  // -1 when absent
  int32_t find(const std::string& name) const;
  const std::string& name_of(int32_t id) const;
  int32_t size() const { return static_cast<int32_t>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> index_;
};

struct DatasetSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> validation;
  std::vector<LabeledPair> test;
  IdMap user_ids;
  IdMap item_ids;
};

struct ImplicitPolicy {
  enum Kind { Threshold, AllPositive };
  Kind kind = Threshold;
  double threshold = 4.0;  // rating >= threshold counts as positive
};

std::vector<InteractionRecord> load_interactions(const std::string& path);

// Converts raw records to deduplicated positive pairs, assigning dense ids in
// first-appearance order. Sub-threshold records are dropped entirely;
// observed negatives come from sampling, never from low ratings.
std::vector<LabeledPair> to_implicit(const std::vector<InteractionRecord>& records,
                                     const ImplicitPolicy& policy, IdMap& users,
                                     IdMap& items);

// Iteratively peels users and items with fewer than k interactions until a
// fixed point. Preserves input order of surviving pairs.
std::vector<LabeledPair> k_core_filter(const std::vector<LabeledPair>& positives,
                                       int k);

// Re-densifies ids after filtering (ascending old id order) and shrinks the
// maps to surviving names.
void compact_ids(std::vector<LabeledPair>& positives, IdMap& users, IdMap& items);

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

// Uniform shuffle then contiguous cut; floor(N*train) / floor(N*validation) /
// remainder. The id maps of the result are filled in by the caller.
DatasetSplit split_dataset(const std::vector<LabeledPair>& positives,
                           const SplitRatios& ratios, uint64_t seed);

// Draws `ratio` label-0 pairs per positive, uniformly without replacement per
// user from items that user has no positive interaction with in any split.
// Users with an exhausted pool contribute fewer (possibly zero) negatives and
// are reported through `warnings`.
std::vector<LabeledPair> sample_negatives(
    const std::vector<LabeledPair>& split_positives, int32_t item_count,
    const std::vector<LabeledPair>& all_positives, int ratio, uint64_t seed,
    std::vector<std::string>* warnings = nullptr);

std::vector<Triple> load_kg(const std::string& path, IdMap& entities,
                            IdMap& relations);

// Rows naming an item absent from `items` are skipped (reported through
// `warnings`); unknown entity strings grow the entity map. Conflicting
// duplicate rows are rejected.
std::vector<std::pair<int32_t, int32_t>> load_alignment(
    const std::string& path, const IdMap& items, IdMap& entities,
    std::vector<std::string>* warnings = nullptr);

}  // namespace dkse
