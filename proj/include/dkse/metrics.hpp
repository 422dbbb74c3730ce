#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dkse {

struct ScoredPair {
  int32_t user = 0;
  int32_t item = 0;
  double score = 0;
  int8_t label = 0;
};

struct MetricsReport {
  double auc = 0;
  double acc = 0;
  double f1 = 0;
  std::map<int, double> precision_at_k;
  std::map<int, double> ndcg_at_k;
  int64_t positives = 0;
  int64_t negatives = 0;
  int64_t users = 0;
  uint64_t seed = 0;
  int epoch = -1;
  std::string dataset;
};

inline const std::vector<int>& default_k_grid() {
  static const std::vector<int> grid{1, 2, 5, 10, 20, 50, 100};
  return grid;
}

// Probability a random positive outranks a random negative, ties counted
// half. Integer rank statistic, so it agrees exactly with pair counting.
double auc(const std::vector<ScoredPair>& pairs);

// Threshold classifier metrics; prediction is score >= threshold.
std::pair<double, double> acc_f1(const std::vector<ScoredPair>& pairs,
                                 double threshold = 0.5);

// Items by score descending, ties by item id ascending, truncated to k.
std::vector<int32_t> topk_rank(std::vector<std::pair<int32_t, double>> scored,
                               int k);

double precision_at_k(const std::vector<int32_t>& ranked,
                      const std::set<int32_t>& relevant, int k);

// Binary gains, log2 discount, ideal DCG over min(k, |relevant|) hits.
double ndcg_at_k(const std::vector<int32_t>& ranked,
                 const std::set<int32_t>& relevant, int k);

// One flat key=value line per field.
std::string report_to_kv(const MetricsReport& report);

// "k,precision,ndcg" rows for plotting.
std::string report_to_csv(const MetricsReport& report);

}  // namespace dkse
