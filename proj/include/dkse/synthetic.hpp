#pragma once

#include <string>
#include <vector>

#include "dkse/config.hpp"

namespace dkse {

// Planted-structure corpus: items belong to latent clusters, each item's
// anchor entity links to other entities of the same cluster, and users
// prefer items whose cluster latent best matches their own latent. The KG
// therefore carries the signal a neighborhood model can exploit.
struct SyntheticData {
  std::string interactions_tsv;
  std::string kg_tsv;
  std::string alignment_tsv;

  // Planted ground truth, for verification.
  int32_t clusters = 0;
  std::vector<std::vector<double>> user_latent;
  std::vector<std::vector<double>> cluster_latent;
  std::vector<int32_t> item_cluster;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct SyntheticPaths {
  std::string interactions;
  std::string kg;
  std::string alignment;
};

// Writes interactions.tsv, kg.tsv, alignment.tsv under dir (created if
// needed), atomically, and returns their paths.
SyntheticPaths write_synthetic(const SyntheticSpec& spec,
                               const std::string& dir);

}  // namespace dkse
