#include "dkse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dkse/util.hpp"

namespace dkse {

double auc(const std::vector<ScoredPair>& pairs) {
  int64_t pos = 0, neg = 0;
  for (const auto& p : pairs) {
    check(std::isfinite(p.score), "scores must be finite");
    (p.label ? pos : neg) += 1;
  }
  check(pos >= 1 && neg >= 1,
        "AUC undefined: need at least one positive and one negative");

  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return pairs[a].score < pairs[b].score;
  });

  // Doubled average ranks keep the statistic in integers: a tie group
  // occupying 1-based ranks lo+1..hi+1 assigns each member lo+hi+2.
  int64_t doubled_pos_ranks = 0;
  size_t lo = 0;
  while (lo < order.size()) {
    size_t hi = lo;
    while (hi + 1 < order.size() &&
           pairs[order[hi + 1]].score == pairs[order[lo]].score)
      ++hi;
    int64_t doubled = static_cast<int64_t>(lo) + static_cast<int64_t>(hi) + 2;
    for (size_t i = lo; i <= hi; ++i)
      if (pairs[order[i]].label) doubled_pos_ranks += doubled;
    lo = hi + 1;
  }
  int64_t numer = doubled_pos_ranks - pos * (pos + 1);
  return static_cast<double>(numer) / static_cast<double>(2 * pos * neg);
}

std::pair<double, double> acc_f1(const std::vector<ScoredPair>& pairs,
                                 double threshold) {
  check(!pairs.empty(), "need at least one scored pair");
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& p : pairs) {
    bool pred = p.score >= threshold;
    if (pred && p.label)
      ++tp;
    else if (pred)
      ++fp;
    else if (p.label)
      ++fn;
    else
      ++tn;
  }
  double acc = static_cast<double>(tp + tn) / static_cast<double>(pairs.size());
  double f1 = 0;
  if (2 * tp + fp + fn > 0)
    f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return {acc, f1};
}

std::vector<int32_t> topk_rank(std::vector<std::pair<int32_t, double>> scored,
                               int k) {
  check(k > 0, "k must be positive");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
  std::vector<int32_t> out;
  out.reserve(scored.size());
  for (const auto& [item, score] : scored) out.push_back(item);
  return out;
}

double precision_at_k(const std::vector<int32_t>& ranked,
                      const std::set<int32_t>& relevant, int k) {
  check(k > 0, "k must be positive");
  int64_t hits = 0;
  for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(k); ++i)
    hits += relevant.count(ranked[i]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double ndcg_at_k(const std::vector<int32_t>& ranked,
                 const std::set<int32_t>& relevant, int k) {
  check(k > 0, "k must be positive");
  if (relevant.empty()) return 0.0;
  double dcg = 0;
  for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(k); ++i)
    if (relevant.count(ranked[i]))
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  size_t ideal = std::min(static_cast<size_t>(k), relevant.size());
  double idcg = 0;
  for (size_t i = 0; i < ideal; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

std::string report_to_kv(const MetricsReport& r) {
  std::ostringstream out;
  out << "dataset=" << r.dataset << "\n";
  out << "seed=" << r.seed << "\n";
  out << "epoch=" << r.epoch << "\n";
  out << "positives=" << r.positives << "\n";
  out << "negatives=" << r.negatives << "\n";
  out << "users=" << r.users << "\n";
  out << "auc=" << format_double(r.auc) << "\n";
  out << "acc=" << format_double(r.acc) << "\n";
  out << "f1=" << format_double(r.f1) << "\n";
  for (const auto& [k, v] : r.precision_at_k)
    out << "precision@" << k << "=" << format_double(v) << "\n";
  for (const auto& [k, v] : r.ndcg_at_k)
    out << "ndcg@" << k << "=" << format_double(v) << "\n";
  return out.str();
}

std::string report_to_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "k,precision,ndcg\n";
  for (const auto& [k, p] : r.precision_at_k) {
    auto it = r.ndcg_at_k.find(k);
    double n = it == r.ndcg_at_k.end() ? 0.0 : it->second;
    out << k << "," << format_double(p) << "," << format_double(n) << "\n";
  }
  return out.str();
}

}  // namespace dkse
