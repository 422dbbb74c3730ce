#pragma once

#include <string>
#include <vector>

#include "dkse/ingest.hpp"
#include "dkse/train.hpp"

namespace dkse {

// Planted-structure generator settings (see synthetic.hpp for semantics).
struct SyntheticSpec {
  int32_t users = 200;
  int32_t items = 300;
  int32_t entities = 500;
  int32_t relations = 5;
  int32_t latent_dim = 8;
  int32_t interactions_per_user = 10;
  int32_t kg_edges_per_item = 3;
  double noise = 0.0;  // uniform perturbation amplitude on preference scores
  uint64_t seed = 0;

  void validate() const;
};

// Everything one run needs: input paths or a synthetic spec, the ingest
// pipeline knobs, hyper-parameters, and output location.
struct RunConfig {
  std::string interactions;  // TSV paths; unused when use_synthetic
  std::string kg;
  std::string alignment;
  bool use_synthetic = true;
  SyntheticSpec synthetic;

  ImplicitPolicy implicit;
  int k_core = 0;  // 0 disables the filter
  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double test_ratio = 0.2;

  HyperParams hyper;
  std::vector<int> k_grid = {1, 2, 5, 10, 20, 50, 100};

  std::string out_dir = "out";
  std::string preset;  // empty unless built by preset_config
  std::string dataset_tag = "synthetic";

  void validate() const;
};

// Flat key=value text, first line "DKSE-CONFIG v1". Encoding then decoding
// reproduces the struct exactly (doubles via shortest round-trip form).
std::string encode_config(const RunConfig& config);
RunConfig decode_config(const std::string& text);

void save_config(const std::string& path, const RunConfig& config);
RunConfig load_config(const std::string& path);

// Hyper-parameter presets for the three reference dataset settings:
// "lfm-1b", "movielens-1m", "amazon-book".
RunConfig preset_config(const std::string& name);

}  // namespace dkse
