#include "dkse/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <string_view>

#include "dkse/util.hpp"

namespace dkse {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view s, size_t line_no) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc() && p == s.data() + s.size() && std::isfinite(v),
        "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  return v;
}

int64_t parse_int(std::string_view s, size_t line_no) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc() && p == s.data() + s.size(),
        "line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  return v;
}

// Calls fn(line_no, fields) for every non-blank line, with CR stripped.
template <typename Fn>
void for_each_row(const std::string& path, Fn&& fn) {
  const std::string text = read_file(path);
  size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line_no, split_tabs(line));
    if (end == text.size()) break;
    start = end + 1;
  }
}

}  // namespace

int32_t IdMap::get_or_add(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, size());
  if (inserted) names_.push_back(name);
  return it->second;
}

int32_t IdMap::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

const std::string& IdMap::name_of(int32_t id) const {
  check(id >= 0 && id < size(), "dense id out of range");
  return names_[static_cast<size_t>(id)];
}

std::vector<InteractionRecord> load_interactions(const std::string& path) {
  std::vector<InteractionRecord> out;
  for_each_row(path, [&](size_t line_no, const std::vector<std::string_view>& f) {
    check(f.size() >= 2, "line " + std::to_string(line_no) +
                             ": expected at least user and item columns");
    check(!f[0].empty() && !f[1].empty(),
          "line " + std::to_string(line_no) + ": empty id");
    InteractionRecord rec;
    rec.user = std::string(f[0]);
    rec.item = std::string(f[1]);
    if (f.size() >= 3 && !f[2].empty()) rec.rating = parse_double(f[2], line_no);
    if (f.size() >= 4 && !f[3].empty()) rec.timestamp = parse_int(f[3], line_no);
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<LabeledPair> to_implicit(const std::vector<InteractionRecord>& records,
                                     const ImplicitPolicy& policy, IdMap& users,
                                     IdMap& items) {
  std::vector<LabeledPair> out;
  std::set<std::pair<int32_t, int32_t>> seen;
  for (const auto& rec : records) {
    if (policy.kind == ImplicitPolicy::Threshold) {
      check(rec.rating.has_value(),
            "threshold policy needs a rating for user '" + rec.user + "'");
      if (*rec.rating < policy.threshold) continue;
    }
    int32_t u = users.get_or_add(rec.user);
    int32_t v = items.get_or_add(rec.item);
    if (seen.emplace(u, v).second) out.push_back({u, v, 1});
  }
  return out;
}

std::vector<LabeledPair> k_core_filter(const std::vector<LabeledPair>& positives,
                                       int k) {
  check(k >= 1, "k-core requires k >= 1");
  std::vector<LabeledPair> cur = positives;
  while (true) {
    std::map<int32_t, int> user_deg, item_deg;
    for (const auto& p : cur) {
      ++user_deg[p.user];
      ++item_deg[p.item];
    }
    auto low = [&](const LabeledPair& p) {
      return user_deg[p.user] < k || item_deg[p.item] < k;
    };
    size_t before = cur.size();
    std::erase_if(cur, low);
    if (cur.size() == before) return cur;
  }
}

void compact_ids(std::vector<LabeledPair>& positives, IdMap& users, IdMap& items) {
  std::set<int32_t> live_users, live_items;
  for (const auto& p : positives) {
    live_users.insert(p.user);
    live_items.insert(p.item);
  }
  auto remap = [](const std::set<int32_t>& live, const IdMap& old) {
    std::unordered_map<int32_t, int32_t> to_new;
    IdMap fresh;
    for (int32_t id : live) to_new[id] = fresh.get_or_add(old.name_of(id));
    return std::pair(std::move(to_new), std::move(fresh));
  };
  auto [user_map, new_users] = remap(live_users, users);
  auto [item_map, new_items] = remap(live_items, items);
  for (auto& p : positives) {
    p.user = user_map.at(p.user);
    p.item = item_map.at(p.item);
  }
  users = std::move(new_users);
  items = std::move(new_items);
}

DatasetSplit split_dataset(const std::vector<LabeledPair>& positives,
                           const SplitRatios& ratios, uint64_t seed) {
  check(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0,
        "split ratios must be positive");
  check(std::abs(ratios.train + ratios.validation + ratios.test - 1.0) <= 1e-9,
        "split ratios must sum to 1");
  check(positives.size() >= 3, "need at least 3 positives to split");

  std::vector<LabeledPair> shuffled = positives;
  Rng rng(seed);
  rng.shuffle(shuffled);

  size_t n = shuffled.size();
  size_t n_train = static_cast<size_t>(static_cast<double>(n) * ratios.train);
  size_t n_valid = static_cast<size_t>(static_cast<double>(n) * ratios.validation);

  DatasetSplit out;
  out.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  out.validation.assign(shuffled.begin() + n_train,
                        shuffled.begin() + n_train + n_valid);
  out.test.assign(shuffled.begin() + n_train + n_valid, shuffled.end());
  return out;
}

std::vector<LabeledPair> sample_negatives(
    const std::vector<LabeledPair>& split_positives, int32_t item_count,
    const std::vector<LabeledPair>& all_positives, int ratio, uint64_t seed,
    std::vector<std::string>* warnings) {
  check(ratio >= 1, "negative ratio must be >= 1");

  std::map<int32_t, std::set<int32_t>> watched;  // across all splits
  for (const auto& p : all_positives) watched[p.user].insert(p.item);
  std::map<int32_t, size_t> wanted;
  for (const auto& p : split_positives)
    wanted[p.user] += static_cast<size_t>(ratio);

  std::vector<LabeledPair> out;
  for (const auto& [user, want] : wanted) {
    const auto& seen = watched[user];
    std::vector<int32_t> pool;
    pool.reserve(static_cast<size_t>(item_count) - seen.size());
    for (int32_t v = 0; v < item_count; ++v)
      if (!seen.count(v)) pool.push_back(v);
    if (pool.size() < want && warnings)
      warnings->push_back("user " + std::to_string(user) + " has only " +
                          std::to_string(pool.size()) + " unwatched items of " +
                          std::to_string(want) + " negatives wanted");
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(user)));
    rng.shuffle(pool);
    size_t take = std::min(want, pool.size());
    for (size_t i = 0; i < take; ++i) out.push_back({user, pool[i], 0});
  }
  return out;
}

std::vector<Triple> load_kg(const std::string& path, IdMap& entities,
                            IdMap& relations) {
  std::vector<Triple> out;
  std::set<Triple> seen;
  for_each_row(path, [&](size_t line_no, const std::vector<std::string_view>& f) {
    check(f.size() == 3, "line " + std::to_string(line_no) +
                             ": expected head\\trelation\\ttail");
    check(!f[0].empty() && !f[1].empty() && !f[2].empty(),
          "line " + std::to_string(line_no) + ": empty field");
    Triple t;
    t.head = entities.get_or_add(std::string(f[0]));
    t.relation = relations.get_or_add(std::string(f[1]));
    t.tail = entities.get_or_add(std::string(f[2]));
    if (seen.insert(t).second) out.push_back(t);
  });
  return out;
}

std::vector<std::pair<int32_t, int32_t>> load_alignment(
    const std::string& path, const IdMap& items, IdMap& entities,
    std::vector<std::string>* warnings) {
  std::vector<std::pair<int32_t, int32_t>> out;
  std::map<int32_t, int32_t> by_item, by_entity;
  for_each_row(path, [&](size_t line_no, const std::vector<std::string_view>& f) {
    check(f.size() == 2,
          "line " + std::to_string(line_no) + ": expected item\\tentity");
    check(!f[0].empty() && !f[1].empty(),
          "line " + std::to_string(line_no) + ": empty field");
    std::string item_name(f[0]);
    int32_t item = items.find(item_name);
    if (item < 0) {
      if (warnings)
        warnings->push_back("alignment line " + std::to_string(line_no) +
                            ": item '" + item_name + "' not in ratings, skipped");
      return;
    }
    int32_t entity = entities.get_or_add(std::string(f[1]));
    auto it = by_item.find(item);
    auto et = by_entity.find(entity);
    if (it != by_item.end() || et != by_entity.end()) {
      bool same = it != by_item.end() && it->second == entity;
      check(same, "line " + std::to_string(line_no) + ": conflicting alignment for '" +
                      item_name + "'");
      return;  // identical duplicate row
    }
    by_item[item] = entity;
    by_entity[entity] = item;
    out.emplace_back(item, entity);
  });
  return out;
}

}  // namespace dkse
