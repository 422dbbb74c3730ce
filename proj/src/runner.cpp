#include "dkse/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "dkse/rng.hpp"
#include "dkse/train.hpp"
#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr uint64_t kSaltNegatives = 0x6e656773;

class OutputLock {
 public:
  explicit OutputLock(const std::string& dir) : path_(dir + "/.dkse.lock") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    check(!ec, "cannot create output directory " + dir + ": " + ec.message());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST)
        throw Error("output directory " + dir +
                    " is in use by another run (remove " + path_ +
                    " if that run is gone)");
      throw Error("cannot create lock file " + path_ + ": " +
                  std::strerror(errno));
    }
  }
  ~OutputLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

struct Inputs {
  std::string interactions;
  std::string kg;
  std::string alignment;
};

// Synthetic corpora are materialized under out_dir/data; regeneration is
// deterministic, so prepare/train/evaluate agree without relying on state.
Inputs resolve_inputs(const RunConfig& c) {
  if (!c.use_synthetic) return {c.interactions, c.kg, c.alignment};
  auto paths = write_synthetic(c.synthetic, c.out_dir + "/data");
  return {paths.interactions, paths.kg, paths.alignment};
}

struct GraphBundle {
  UnifiedGraph graph;
  int32_t entities = 0;
  int32_t kg_relations = 0;
  size_t triples = 0;
};

GraphBundle build_graph(const DatasetSplit& split, const Inputs& in) {
  IdMap entities, relations;
  std::vector<Triple> triples;
  std::vector<std::pair<int32_t, int32_t>> alignment;
  if (!in.kg.empty()) triples = load_kg(in.kg, entities, relations);
  if (!in.alignment.empty())
    alignment = load_alignment(in.alignment, split.item_ids, entities);

  std::vector<Interaction> train_pos;
  for (const auto& p : split.train)
    if (p.label) train_pos.push_back({p.user, p.item});

  GraphCounts counts{split.user_ids.size(), split.item_ids.size(),
                     entities.size(), relations.size()};
  GraphBundle bundle;
  bundle.entities = entities.size();
  bundle.kg_relations = relations.size();
  bundle.triples = triples.size();
  bundle.graph = UnifiedGraph::build(train_pos, triples, alignment, counts);
  return bundle;
}

std::string split_path(const RunConfig& c) { return c.out_dir + "/split.tsv"; }
std::string idmap_path(const RunConfig& c) { return c.out_dir + "/ids.tsv"; }

// CTR metrics over labeled pairs; optionally full-ranking top-K metrics
// averaged over the users that hold a positive in `pairs`.
MetricsReport evaluate_pairs(const UnifiedGraph& graph,
                             const ParameterSet& params,
                             const HyperParams& hyper,
                             const DatasetSplit& split,
                             const std::vector<LabeledPair>& pairs,
                             const std::vector<int>& k_grid,
                             const std::string& dataset_tag, int epoch,
                             bool with_topk) {
  check(!pairs.empty(), "no pairs to evaluate");
  const uint64_t stream = eval_stream(hyper.seed);

  MetricsReport r;
  r.seed = hyper.seed;
  r.epoch = epoch;
  r.dataset = dataset_tag;

  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) {
    double s = score_pair(graph, params, hyper, graph.user_node(p.user),
                          graph.item_node(p.item), stream);
    scored.push_back({p.user, p.item, s, p.label});
    (p.label ? r.positives : r.negatives) += 1;
  }
  r.auc = auc(scored);
  auto [acc, f1] = acc_f1(scored);
  r.acc = acc;
  r.f1 = f1;
  if (!with_topk) return r;

  std::map<int32_t, std::set<int32_t>> relevant;
  for (const auto& p : pairs)
    if (p.label) relevant[p.user].insert(p.item);
  std::map<int32_t, std::set<int32_t>> train_pos;
  for (const auto& p : split.train)
    if (p.label) train_pos[p.user].insert(p.item);

  const int32_t item_count = split.item_ids.size();
  int kmax = 0;
  for (int k : k_grid) kmax = std::max(kmax, k);
  for (int k : k_grid) {
    r.precision_at_k[k] = 0;
    r.ndcg_at_k[k] = 0;
  }
  for (const auto& [user, rel] : relevant) {
    const auto skip_it = train_pos.find(user);
    std::vector<std::pair<int32_t, double>> candidates;
    candidates.reserve(item_count);
    for (int32_t item = 0; item < item_count; ++item) {
      if (skip_it != train_pos.end() && skip_it->second.count(item)) continue;
      double s = score_pair(graph, params, hyper, graph.user_node(user),
                            graph.item_node(item), stream);
      candidates.push_back({item, s});
    }
    auto ranked = topk_rank(std::move(candidates), kmax);
    for (int k : k_grid) {
      r.precision_at_k[k] += precision_at_k(ranked, rel, k);
      r.ndcg_at_k[k] += ndcg_at_k(ranked, rel, k);
    }
  }
  r.users = static_cast<int64_t>(relevant.size());
  if (r.users > 0) {
    for (int k : k_grid) {
      r.precision_at_k[k] /= static_cast<double>(r.users);
      r.ndcg_at_k[k] /= static_cast<double>(r.users);
    }
  }
  return r;
}

double test_auc_of(const UnifiedGraph& graph, const DatasetSplit& split,
                   const HyperParams& hyper) {
  FitResult result = fit(split, graph, hyper);
  const uint64_t stream = eval_stream(hyper.seed);
  std::vector<ScoredPair> scored;
  scored.reserve(split.test.size());
  for (const auto& p : split.test) {
    double s = score_pair(graph, result.params, hyper, graph.user_node(p.user),
                          graph.item_node(p.item), stream);
    scored.push_back({p.user, p.item, s, p.label});
  }
  return auc(scored);
}

}  // namespace

PrepareOutput cmd_prepare(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out_dir);
  Inputs in = resolve_inputs(config);

  auto records = load_interactions(in.interactions);
  IdMap users, items;
  auto positives = to_implicit(records, config.implicit, users, items);
  if (config.k_core > 0) positives = k_core_filter(positives, config.k_core);
  check(!positives.empty(), "no interactions survive preprocessing");
  compact_ids(positives, users, items);

  SplitRatios ratios{config.train_ratio, config.val_ratio, config.test_ratio};
  DatasetSplit split = split_dataset(positives, ratios, config.hyper.seed);
  split.user_ids = users;
  split.item_ids = items;

  std::vector<std::string> warnings;
  const uint64_t neg_base = Rng::mix(config.hyper.seed, kSaltNegatives);
  uint64_t part = 0;
  for (auto* pairs : {&split.train, &split.validation, &split.test}) {
    auto negatives =
        sample_negatives(*pairs, items.size(), positives,
                         config.hyper.negative_ratio,
                         Rng::mix(neg_base, part++), &warnings);
    pairs->insert(pairs->end(), negatives.begin(), negatives.end());
  }

  GraphBundle bundle = build_graph(split, in);

  std::ostringstream stats;
  stats << "dataset=" << config.dataset_tag << '\n';
  stats << "users=" << users.size() << '\n';
  stats << "items=" << items.size() << '\n';
  stats << "interactions=" << positives.size() << '\n';
  stats << "avg_user_clicks="
        << format_double(double(positives.size()) / double(users.size()))
        << '\n';
  stats << "entities=" << bundle.entities << '\n';
  stats << "relations=" << bundle.kg_relations << '\n';
  stats << "triples=" << bundle.triples << '\n';
  stats << "train_pairs=" << split.train.size() << '\n';
  stats << "val_pairs=" << split.validation.size() << '\n';
  stats << "test_pairs=" << split.test.size() << '\n';
  stats << "negative_sampling_warnings=" << warnings.size() << '\n';

  save_split(split_path(config), idmap_path(config), split);
  write_file_atomic(config.out_dir + "/stats.txt", stats.str());

  PrepareOutput out;
  out.split = std::move(split);
  out.stats = stats.str();
  return out;
}

TrainOutput cmd_train(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out_dir);
  DatasetSplit split = load_split(split_path(config), idmap_path(config));
  GraphBundle bundle = build_graph(split, resolve_inputs(config));

  std::ostringstream log;
  FitResult result = fit(split, bundle.graph, config.hyper, &log);

  TrainOutput out;
  out.best_epoch = result.best_epoch;
  out.epochs_run = result.history.size();
  out.checkpoint = Checkpoint{config.hyper, std::move(result.params)};
  save_checkpoint(config.out_dir + "/model.ckpt", out.checkpoint);
  write_file_atomic(config.out_dir + "/train.log", log.str());

  out.validation = evaluate_pairs(bundle.graph, out.checkpoint.params,
                                  config.hyper, split, split.validation,
                                  config.k_grid, config.dataset_tag,
                                  out.best_epoch, true);
  out.test = evaluate_pairs(bundle.graph, out.checkpoint.params, config.hyper,
                            split, split.test, config.k_grid,
                            config.dataset_tag, out.best_epoch, true);
  write_file_atomic(config.out_dir + "/report_validation.txt",
                    report_to_kv(out.validation));
  write_file_atomic(config.out_dir + "/report_test.txt",
                    report_to_kv(out.test));
  return out;
}

EvaluateOutput cmd_evaluate(const RunConfig& config,
                            const std::string& checkpoint_path) {
  config.validate();
  OutputLock lock(config.out_dir);
  const std::string path = checkpoint_path.empty()
                               ? config.out_dir + "/model.ckpt"
                               : checkpoint_path;
  Checkpoint ckpt = load_checkpoint(path);
  DatasetSplit split = load_split(split_path(config), idmap_path(config));
  GraphBundle bundle = build_graph(split, resolve_inputs(config));

  check(ckpt.params.shape.nodes == bundle.graph.node_count(),
        "checkpoint was trained on a different node count than this dataset");
  check(ckpt.params.shape.relations == bundle.graph.relation_count(),
        "checkpoint was trained on a different relation count");
  check(ckpt.params.shape.dim == ckpt.hyper.d &&
            ckpt.params.shape.queries == ckpt.hyper.n,
        "checkpoint tensors disagree with its stored hyper-parameters");

  EvaluateOutput out;
  out.report = evaluate_pairs(bundle.graph, ckpt.params, ckpt.hyper, split,
                              split.test, config.k_grid, config.dataset_tag,
                              -1, true);
  out.topk_csv = report_to_csv(out.report);
  write_file_atomic(config.out_dir + "/evaluation.txt",
                    report_to_kv(out.report));
  write_file_atomic(config.out_dir + "/topk.csv", out.topk_csv);
  return out;
}

std::string cmd_ablate(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.out_dir);
  DatasetSplit split = load_split(split_path(config), idmap_path(config));
  GraphBundle bundle = build_graph(split, resolve_inputs(config));

  struct Variant {
    const char* name;
    HyperParams hyper;
  };
  std::vector<Variant> variants;
  variants.push_back({"full", config.hyper});
  const std::pair<const char*, GroupingMode> modes[] = {
      {"grouping-global", GroupingMode::Global},
      {"grouping-vertical", GroupingMode::Vertical},
      {"grouping-horizontal", GroupingMode::Horizontal},
      {"grouping-base", GroupingMode::Base}};
  for (auto [name, mode] : modes) {
    HyperParams h = config.hyper;
    h.grouping = mode;
    variants.push_back({name, h});
  }
  {
    HyperParams h = config.hyper;
    h.mask.user_item = false;
    variants.push_back({"no-user-item", h});
  }
  {
    HyperParams h = config.hyper;
    h.mask.head = false;
    variants.push_back({"no-head", h});
  }
  {
    HyperParams h = config.hyper;
    h.mask.relation = false;
    variants.push_back({"no-relation", h});
  }
  {
    HyperParams h = config.hyper;
    h.mask.tail = false;
    variants.push_back({"no-tail", h});
  }
  {
    HyperParams h = config.hyper;
    h.use_contrastive = false;
    variants.push_back({"no-contrastive", h});
  }

  std::ostringstream table;
  table << "variant\tauc\tacc\tf1\n";
  for (const auto& v : variants) {
    FitResult result = fit(split, bundle.graph, v.hyper);
    MetricsReport r =
        evaluate_pairs(bundle.graph, result.params, v.hyper, split, split.test,
                       config.k_grid, config.dataset_tag, -1, false);
    table << v.name << '\t' << format_double(r.auc) << '\t'
          << format_double(r.acc) << '\t' << format_double(r.f1) << '\n';
  }
  std::string text = table.str();
  write_file_atomic(config.out_dir + "/ablation.tsv", text);
  return text;
}

std::vector<SweepCell> sweep_grid(const std::string& axis) {
  std::vector<SweepCell> cells;
  if (axis == "depth") {
    for (int l = 1; l <= 4; ++l) cells.push_back({l, 0, 0});
  } else if (axis == "fanout") {
    for (int l = 1; l <= 4; ++l)
      for (int n : {4, 8, 16, 32, 64}) cells.push_back({l, n, 0});
  } else if (axis == "queries") {
    for (int n : {1, 2, 4, 6, 8}) cells.push_back({0, 0, n});
  } else {
    throw Error("unknown sweep axis '" + axis +
                "' (expected depth, fanout, or queries)");
  }
  return cells;
}

std::string cmd_sweep(const RunConfig& config, const std::string& axis,
                      const std::vector<SweepCell>* grid) {
  config.validate();
  std::vector<SweepCell> cells = sweep_grid(axis);  // also validates the axis
  if (grid) cells = *grid;
  OutputLock lock(config.out_dir);
  DatasetSplit split = load_split(split_path(config), idmap_path(config));
  GraphBundle bundle = build_graph(split, resolve_inputs(config));

  std::ostringstream csv;
  if (axis == "depth")
    csv << "l,auc\n";
  else if (axis == "fanout")
    csv << "l,n,auc\n";
  else
    csv << "queries,auc\n";

  for (const SweepCell& cell : cells) {
    HyperParams h = config.hyper;
    if (axis == "depth") {
      h.l_u = h.l_v = cell.l;
    } else if (axis == "fanout") {
      h.l_u = h.l_v = cell.l;
      h.n_u = h.n_v = cell.fanout;
    } else {
      h.n = cell.queries;
    }
    double auc_value = test_auc_of(bundle.graph, split, h);
    if (axis == "depth")
      csv << cell.l << ',' << format_double(auc_value) << '\n';
    else if (axis == "fanout")
      csv << cell.l << ',' << cell.fanout << ',' << format_double(auc_value)
          << '\n';
    else
      csv << cell.queries << ',' << format_double(auc_value) << '\n';
  }
  std::string text = csv.str();
  write_file_atomic(config.out_dir + "/sweep.csv", text);
  return text;
}

SyntheticPaths cmd_synth(const RunConfig& config) {
  config.synthetic.validate();
  OutputLock lock(config.out_dir);
  return write_synthetic(config.synthetic, config.out_dir);
}

}  // namespace dkse
