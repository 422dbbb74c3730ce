#include "dkse/config.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr char kMagic[] = "DKSE-CONFIG v1";

const char* grouping_name(GroupingMode m) {
  switch (m) {
    case GroupingMode::Global: return "global";
    case GroupingMode::Vertical: return "vertical";
    case GroupingMode::Horizontal: return "horizontal";
    case GroupingMode::Base: return "base";
  }
  throw Error("unknown grouping mode");
}

GroupingMode grouping_of(const std::string& s) {
  if (s == "global") return GroupingMode::Global;
  if (s == "vertical") return GroupingMode::Vertical;
  if (s == "horizontal") return GroupingMode::Horizontal;
  if (s == "base") return GroupingMode::Base;
  throw Error("unknown grouping mode '" + s +
              "' (expected global|vertical|horizontal|base)");
}

std::string k_grid_text(const std::vector<int>& ks) {
  std::string out;
  for (size_t i = 0; i < ks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ks[i]);
  }
  return out;
}

class Decoder {
 public:
  explicit Decoder(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    bool saw_magic = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1) {
        check(line == kMagic, "not a DKSE-CONFIG v1 file");
        saw_magic = true;
        continue;
      }
      if (line.empty() || line[0] == '#') continue;
      size_t eq = line.find('=');
      check(eq != std::string::npos,
            "line " + std::to_string(line_no) + ": expected key=value");
      entries_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    check(saw_magic, "not a DKSE-CONFIG v1 file");
  }

  // Consumes a key so leftovers can be reported.
  std::string take(const std::string& key) {
    auto it = entries_.find(key);
    check(it != entries_.end(), "config is missing key '" + key + "'");
    std::string v = it->second;
    entries_.erase(it);
    return v;
  }
  int64_t take_int(const std::string& key) {
    std::string v = take(key);
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    check(ec == std::errc{} && p == v.data() + v.size(),
          "config key '" + key + "': bad integer '" + v + "'");
    return out;
  }
  double take_double(const std::string& key) {
    std::string v = take(key);
    check(!v.empty(), "config key '" + key + "': empty number");
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    check(end == v.c_str() + v.size(),
          "config key '" + key + "': bad number '" + v + "'");
    return out;
  }
  bool take_bool(const std::string& key) {
    std::string v = take(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error("config key '" + key + "': expected true or false");
  }
  void expect_empty() const {
    if (entries_.empty()) return;
    throw Error("config has unknown key '" + entries_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace

void SyntheticSpec::validate() const {
  check(users >= 1 && items >= 1 && entities >= 1 && relations >= 1,
        "synthetic counts must be >= 1");
  check(latent_dim >= 1, "synthetic latent dimension must be >= 1");
  check(interactions_per_user >= 1 && interactions_per_user <= items,
        "interactions per user must be in [1, item count]");
  check(kg_edges_per_item >= 1, "kg edges per item must be >= 1");
  check(entities >= items,
        "synthetic entity count must be >= item count (one anchor each)");
  check(noise >= 0 && std::isfinite(noise), "noise must be >= 0");
}

void RunConfig::validate() const {
  if (use_synthetic) {
    synthetic.validate();
  } else {
    check(!interactions.empty(), "config needs an interactions path");
  }
  check(k_core >= 0, "k-core must be >= 0");
  check(train_ratio > 0 && val_ratio > 0 && test_ratio > 0,
        "split ratios must be positive");
  check(std::abs(train_ratio + val_ratio + test_ratio - 1.0) <= 1e-9,
        "split ratios must sum to 1");
  check(!k_grid.empty(), "k grid must not be empty");
  int prev = 0;
  for (int k : k_grid) {
    check(k > prev, "k grid must be strictly increasing and positive");
    prev = k;
  }
  check(!out_dir.empty(), "output directory must be set");
  hyper.validate();
}

std::string encode_config(const RunConfig& c) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "interactions=" << c.interactions << '\n';
  out << "kg=" << c.kg << '\n';
  out << "alignment=" << c.alignment << '\n';
  out << "use_synthetic=" << (c.use_synthetic ? "true" : "false") << '\n';
  out << "synth_users=" << c.synthetic.users << '\n';
  out << "synth_items=" << c.synthetic.items << '\n';
  out << "synth_entities=" << c.synthetic.entities << '\n';
  out << "synth_relations=" << c.synthetic.relations << '\n';
  out << "synth_latent_dim=" << c.synthetic.latent_dim << '\n';
  out << "synth_interactions_per_user=" << c.synthetic.interactions_per_user
      << '\n';
  out << "synth_kg_edges_per_item=" << c.synthetic.kg_edges_per_item << '\n';
  out << "synth_noise=" << format_double(c.synthetic.noise) << '\n';
  out << "synth_seed=" << c.synthetic.seed << '\n';
  out << "implicit_policy="
      << (c.implicit.kind == ImplicitPolicy::Kind::Threshold ? "threshold"
                                                             : "all_positive")
      << '\n';
  out << "implicit_threshold=" << format_double(c.implicit.threshold) << '\n';
  out << "k_core=" << c.k_core << '\n';
  out << "train_ratio=" << format_double(c.train_ratio) << '\n';
  out << "val_ratio=" << format_double(c.val_ratio) << '\n';
  out << "test_ratio=" << format_double(c.test_ratio) << '\n';
  out << "l_u=" << c.hyper.l_u << '\n';
  out << "n_u=" << c.hyper.n_u << '\n';
  out << "l_v=" << c.hyper.l_v << '\n';
  out << "n_v=" << c.hyper.n_v << '\n';
  out << "d=" << c.hyper.d << '\n';
  out << "queries=" << c.hyper.n << '\n';
  out << "lambda=" << format_double(c.hyper.lambda) << '\n';
  out << "tau=" << format_double(c.hyper.tau) << '\n';
  out << "learning_rate=" << format_double(c.hyper.learning_rate) << '\n';
  out << "batch_size=" << c.hyper.batch_size << '\n';
  out << "epochs=" << c.hyper.epochs << '\n';
  out << "patience=" << c.hyper.patience << '\n';
  out << "negative_ratio=" << c.hyper.negative_ratio << '\n';
  out << "grouping=" << grouping_name(c.hyper.grouping) << '\n';
  out << "mask_user_item=" << (c.hyper.mask.user_item ? "true" : "false")
      << '\n';
  out << "mask_relation=" << (c.hyper.mask.relation ? "true" : "false") << '\n';
  out << "mask_head=" << (c.hyper.mask.head ? "true" : "false") << '\n';
  out << "mask_tail=" << (c.hyper.mask.tail ? "true" : "false") << '\n';
  out << "use_contrastive=" << (c.hyper.use_contrastive ? "true" : "false")
      << '\n';
  out << "contrastive_raw_logits="
      << (c.hyper.contrastive_raw_logits ? "true" : "false") << '\n';
  out << "strict_ratio_norm=" << (c.hyper.strict_ratio_norm ? "true" : "false")
      << '\n';
  out << "aggregate_terminals="
      << (c.hyper.aggregate_terminals ? "true" : "false") << '\n';
  out << "use_neighborhood=" << (c.hyper.use_neighborhood ? "true" : "false")
      << '\n';
  out << "seed=" << c.hyper.seed << '\n';
  out << "k_grid=" << k_grid_text(c.k_grid) << '\n';
  out << "out_dir=" << c.out_dir << '\n';
  out << "preset=" << c.preset << '\n';
  out << "dataset_tag=" << c.dataset_tag << '\n';
  return out.str();
}

RunConfig decode_config(const std::string& text) {
  Decoder d(text);
  RunConfig c;
  c.interactions = d.take("interactions");
  c.kg = d.take("kg");
  c.alignment = d.take("alignment");
  c.use_synthetic = d.take_bool("use_synthetic");
  c.synthetic.users = static_cast<int32_t>(d.take_int("synth_users"));
  c.synthetic.items = static_cast<int32_t>(d.take_int("synth_items"));
  c.synthetic.entities = static_cast<int32_t>(d.take_int("synth_entities"));
  c.synthetic.relations = static_cast<int32_t>(d.take_int("synth_relations"));
  c.synthetic.latent_dim = static_cast<int32_t>(d.take_int("synth_latent_dim"));
  c.synthetic.interactions_per_user =
      static_cast<int32_t>(d.take_int("synth_interactions_per_user"));
  c.synthetic.kg_edges_per_item =
      static_cast<int32_t>(d.take_int("synth_kg_edges_per_item"));
  c.synthetic.noise = d.take_double("synth_noise");
  c.synthetic.seed = static_cast<uint64_t>(d.take_int("synth_seed"));
  std::string policy = d.take("implicit_policy");
  if (policy == "threshold")
    c.implicit.kind = ImplicitPolicy::Kind::Threshold;
  else if (policy == "all_positive")
    c.implicit.kind = ImplicitPolicy::Kind::AllPositive;
  else
    throw Error("config key 'implicit_policy': expected threshold or "
                "all_positive");
  c.implicit.threshold = d.take_double("implicit_threshold");
  c.k_core = static_cast<int>(d.take_int("k_core"));
  c.train_ratio = d.take_double("train_ratio");
  c.val_ratio = d.take_double("val_ratio");
  c.test_ratio = d.take_double("test_ratio");
  c.hyper.l_u = static_cast<int>(d.take_int("l_u"));
  c.hyper.n_u = static_cast<int>(d.take_int("n_u"));
  c.hyper.l_v = static_cast<int>(d.take_int("l_v"));
  c.hyper.n_v = static_cast<int>(d.take_int("n_v"));
  c.hyper.d = static_cast<int>(d.take_int("d"));
  c.hyper.n = static_cast<int>(d.take_int("queries"));
  c.hyper.lambda = d.take_double("lambda");
  c.hyper.tau = d.take_double("tau");
  c.hyper.learning_rate = d.take_double("learning_rate");
  c.hyper.batch_size = static_cast<int>(d.take_int("batch_size"));
  c.hyper.epochs = static_cast<int>(d.take_int("epochs"));
  c.hyper.patience = static_cast<int>(d.take_int("patience"));
  c.hyper.negative_ratio = static_cast<int>(d.take_int("negative_ratio"));
  c.hyper.grouping = grouping_of(d.take("grouping"));
  c.hyper.mask.user_item = d.take_bool("mask_user_item");
  c.hyper.mask.relation = d.take_bool("mask_relation");
  c.hyper.mask.head = d.take_bool("mask_head");
  c.hyper.mask.tail = d.take_bool("mask_tail");
  c.hyper.use_contrastive = d.take_bool("use_contrastive");
  c.hyper.contrastive_raw_logits = d.take_bool("contrastive_raw_logits");
  c.hyper.strict_ratio_norm = d.take_bool("strict_ratio_norm");
  c.hyper.aggregate_terminals = d.take_bool("aggregate_terminals");
  c.hyper.use_neighborhood = d.take_bool("use_neighborhood");
  c.hyper.seed = static_cast<uint64_t>(d.take_int("seed"));
  c.k_grid.clear();
  std::string grid = d.take("k_grid");
  size_t start = 0;
  while (start <= grid.size() && !grid.empty()) {
    size_t end = grid.find(',', start);
    if (end == std::string::npos) end = grid.size();
    std::string tok = grid.substr(start, end - start);
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    check(ec == std::errc{} && p == tok.data() + tok.size(),
          "config key 'k_grid': bad integer '" + tok + "'");
    c.k_grid.push_back(v);
    if (end == grid.size()) break;
    start = end + 1;
  }
  c.out_dir = d.take("out_dir");
  c.preset = d.take("preset");
  c.dataset_tag = d.take("dataset_tag");
  d.expect_empty();
  return c;
}

void save_config(const std::string& path, const RunConfig& config) {
  write_file_atomic(path, encode_config(config));
}

RunConfig load_config(const std::string& path) {
  return decode_config(read_file(path));
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.dataset_tag = name;
  c.use_synthetic = false;
  c.k_core = 20;
  HyperParams& h = c.hyper;
  if (name == "lfm-1b") {
    h.l_u = 2; h.n_u = 64; h.l_v = 1; h.n_v = 32;
    h.d = 64; h.lambda = 1e-6; h.n = 6;
  } else if (name == "movielens-1m") {
    h.l_u = 1; h.n_u = 32; h.l_v = 2; h.n_v = 32;
    h.d = 32; h.lambda = 1e-5; h.n = 4;
  } else if (name == "amazon-book") {
    h.l_u = 2; h.n_u = 8; h.l_v = 3; h.n_v = 32;
    h.d = 64; h.lambda = 1e-5; h.n = 4;
  } else {
    throw Error("unknown preset '" + name +
                "' (expected lfm-1b, movielens-1m, or amazon-book)");
  }
  return c;
}

}  // namespace dkse
