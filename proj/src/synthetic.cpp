#include "dkse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dkse/rng.hpp"
#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr uint64_t kSaltCluster = 0x636c7573;
constexpr uint64_t kSaltUser = 0x75736572;
constexpr uint64_t kSaltNoise = 0x6e6f6973;

std::vector<std::vector<double>> draw_latents(int32_t count, int32_t dim,
                                              Rng rng) {
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& row : out)
    for (double& x : row) x = rng.uniform(-1.0, 1.0);
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  data.clusters = std::max<int32_t>(
      2, static_cast<int32_t>(std::llround(std::sqrt(double(spec.items)))));
  const int32_t C = data.clusters;

  data.cluster_latent = draw_latents(C, spec.latent_dim,
                                     Rng(Rng::mix(spec.seed, kSaltCluster)));
  data.user_latent = draw_latents(spec.users, spec.latent_dim,
                                  Rng(Rng::mix(spec.seed, kSaltUser)));
  data.item_cluster.resize(spec.items);
  for (int32_t i = 0; i < spec.items; ++i) data.item_cluster[i] = i % C;

  // KG: item i's anchor entity is entity i; anchors link to further
  // entities of the same cluster (entity e belongs to cluster e mod C).
  std::string kg;
  for (int32_t i = 0; i < spec.items; ++i) {
    const int32_t c = data.item_cluster[i];
    const int64_t members = (spec.entities - 1 - c) / C + 1;  // ids c, c+C, ...
    const int64_t self = i / C;
    for (int32_t j = 1; j <= spec.kg_edges_per_item; ++j) {
      int64_t idx = (self + j) % members;
      if (idx == self && members > 1) idx = (idx + 1) % members;
      const int64_t target = c + idx * C;
      const int32_t r = (i + j) % spec.relations;
      kg += "e" + std::to_string(i) + "\tr" + std::to_string(r) + "\te" +
            std::to_string(target) + "\n";
    }
  }
  data.kg_tsv = std::move(kg);

  std::string alignment;
  for (int32_t i = 0; i < spec.items; ++i)
    alignment += "i" + std::to_string(i) + "\te" + std::to_string(i) + "\n";
  data.alignment_tsv = std::move(alignment);

  // Interactions: each user takes the items whose cluster matches best,
  // ties broken by item id; optional uniform score noise per (user, item).
  Rng noise_rng(Rng::mix(spec.seed, kSaltNoise));
  std::string interactions;
  std::vector<std::pair<double, int32_t>> ranked(spec.items);
  for (int32_t u = 0; u < spec.users; ++u) {
    std::vector<double> cluster_score(C);
    for (int32_t c = 0; c < C; ++c)
      cluster_score[c] = dot(data.user_latent[u], data.cluster_latent[c]);
    for (int32_t i = 0; i < spec.items; ++i) {
      double s = cluster_score[data.item_cluster[i]];
      if (spec.noise > 0) s += spec.noise * noise_rng.uniform(-1.0, 1.0);
      ranked[i] = {s, i};
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int32_t k = 0; k < spec.interactions_per_user; ++k)
      interactions += "u" + std::to_string(u) + "\ti" +
                      std::to_string(ranked[k].second) + "\t5\n";
  }
  data.interactions_tsv = std::move(interactions);
  return data;
}

SyntheticPaths write_synthetic(const SyntheticSpec& spec,
                               const std::string& dir) {
  SyntheticData data = generate_synthetic(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  check(!ec, "cannot create directory " + dir + ": " + ec.message());
  SyntheticPaths paths;
  paths.interactions = dir + "/interactions.tsv";
  paths.kg = dir + "/kg.tsv";
  paths.alignment = dir + "/alignment.tsv";
  write_file_atomic(paths.interactions, data.interactions_tsv);
  write_file_atomic(paths.kg, data.kg_tsv);
  write_file_atomic(paths.alignment, data.alignment_tsv);
  return paths;
}

}  // namespace dkse
