// Serialization formats, the synthetic corpus generator, and the command
// layer (prepare / train / evaluate / ablate / sweep / synth), including the
// installed binary's command-line surface.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dkse/cache.hpp"
#include "dkse/checkpoint.hpp"
#include "dkse/config.hpp"
#include "dkse/metrics.hpp"
#include "dkse/runner.hpp"
#include "dkse/synthetic.hpp"
#include "dkse/util.hpp"

using namespace dkse;
namespace fs = std::filesystem;

namespace {

const fs::path& test_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("dkse_pipeline_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string out_dir(const std::string& name) {
  return (test_root() / name).string();
}

// Small planted corpus plus small hypers: every fit in this file is cheap.
RunConfig tiny_config(const std::string& dir) {
  RunConfig c;
  c.use_synthetic = true;
  c.synthetic.users = 40;
  c.synthetic.items = 30;
  c.synthetic.entities = 60;
  c.synthetic.relations = 3;
  c.synthetic.latent_dim = 4;
  c.synthetic.interactions_per_user = 5;
  c.synthetic.kg_edges_per_item = 2;
  c.synthetic.seed = 5;
  c.hyper.l_u = 1;
  c.hyper.n_u = 4;
  c.hyper.l_v = 1;
  c.hyper.n_v = 4;
  c.hyper.d = 8;
  c.hyper.n = 2;
  c.hyper.batch_size = 64;
  c.hyper.epochs = 2;
  c.hyper.patience = 3;
  c.hyper.seed = 11;
  c.k_grid = {1, 5};
  c.out_dir = dir;
  c.dataset_tag = "tiny";
  return c;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool same_bits(double a, double b) {
  return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  std::string so = out_dir("cli_stdout.txt");
  std::string se = out_dir("cli_stderr.txt");
  std::string cmd = std::string(DKSE_BIN) + " " + args + " >" + so + " 2>" + se;
  int rc = std::system(cmd.c_str());
  CliResult r;
  if (rc != -1 && WIFEXITED(rc)) r.code = WEXITSTATUS(rc);
  r.out = read_file(so);
  r.err = read_file(se);
  return r;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact, including awkward doubles") {
  Checkpoint ckpt;
  ckpt.hyper.l_u = 3;
  ckpt.hyper.n_u = 7;
  ckpt.hyper.l_v = 2;
  ckpt.hyper.n_v = 9;
  ckpt.hyper.d = 4;
  ckpt.hyper.n = 2;
  ckpt.hyper.lambda = 0.125;
  ckpt.hyper.tau = 0.7;
  ckpt.hyper.learning_rate = 3e-4;
  ckpt.hyper.batch_size = 77;
  ckpt.hyper.epochs = 13;
  ckpt.hyper.patience = 2;
  ckpt.hyper.negative_ratio = 3;
  ckpt.hyper.grouping = GroupingMode::Horizontal;
  ckpt.hyper.mask.user_item = false;
  ckpt.hyper.mask.head = false;
  ckpt.hyper.use_contrastive = false;
  ckpt.hyper.contrastive_raw_logits = true;
  ckpt.hyper.strict_ratio_norm = true;
  ckpt.hyper.aggregate_terminals = true;
  ckpt.hyper.use_neighborhood = false;
  ckpt.hyper.seed = 0xDEADBEEF12345678ull;

  ckpt.params = ParameterSet::init({5, 3, 2, 4}, 99);
  ckpt.params.tensors[kNodeEmb][0] = 5e-324;  // smallest denormal
  ckpt.params.tensors[kNodeEmb][1] = -0.0;
  ckpt.params.tensors[kNodeEmb][2] = 1e300;
  ckpt.params.tensors[kNodeEmb][3] = 0.1;

  std::string bytes = encode_checkpoint(ckpt);
  Checkpoint back = decode_checkpoint(bytes);

  CHECK(back.params.shape == ckpt.params.shape);
  for (int t = 0; t < kTensorCount; ++t) {
    REQUIRE(back.params.tensors[t].size() == ckpt.params.tensors[t].size());
    for (size_t i = 0; i < ckpt.params.tensors[t].size(); ++i)
      CHECK(same_bits(back.params.tensors[t][i], ckpt.params.tensors[t][i]));
  }
  const HyperParams& a = ckpt.hyper;
  const HyperParams& b = back.hyper;
  CHECK(b.l_u == a.l_u);
  CHECK(b.n_u == a.n_u);
  CHECK(b.l_v == a.l_v);
  CHECK(b.n_v == a.n_v);
  CHECK(b.d == a.d);
  CHECK(b.n == a.n);
  CHECK(same_bits(b.lambda, a.lambda));
  CHECK(same_bits(b.tau, a.tau));
  CHECK(same_bits(b.learning_rate, a.learning_rate));
  CHECK(b.batch_size == a.batch_size);
  CHECK(b.epochs == a.epochs);
  CHECK(b.patience == a.patience);
  CHECK(b.negative_ratio == a.negative_ratio);
  CHECK(b.grouping == a.grouping);
  CHECK(b.mask.user_item == a.mask.user_item);
  CHECK(b.mask.relation == a.mask.relation);
  CHECK(b.mask.head == a.mask.head);
  CHECK(b.mask.tail == a.mask.tail);
  CHECK(b.use_contrastive == a.use_contrastive);
  CHECK(b.contrastive_raw_logits == a.contrastive_raw_logits);
  CHECK(b.strict_ratio_norm == a.strict_ratio_norm);
  CHECK(b.aggregate_terminals == a.aggregate_terminals);
  CHECK(b.use_neighborhood == a.use_neighborhood);
  CHECK(b.seed == a.seed);

  // Re-encode reproduces the byte stream, and so does a file round trip.
  CHECK(encode_checkpoint(back) == bytes);
  std::string path = out_dir("roundtrip.ckpt");
  save_checkpoint(path, ckpt);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
}

TEST_CASE("corrupt or truncated checkpoints are rejected") {
  Checkpoint ckpt;
  ckpt.hyper.d = 4;
  ckpt.hyper.n = 2;
  ckpt.params.shape = {5, 3, 2, 4};
  ckpt.params.tensors = ParameterSet::zeros(ckpt.params.shape);
  ckpt.params.tensors[kNodeEmb][0] = 0.5;
  const std::string bytes = encode_checkpoint(ckpt);

  for (size_t cut : {size_t{0}, size_t{4}, size_t{13}, bytes.size() / 3,
                     bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes + 'x'), Error);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), Error);

  // Fixed v1 layout: 13-byte magic, 32-byte shape, 80 bytes of ints,
  // 24 bytes of doubles, then the grouping byte and nine flag bytes.
  const size_t grouping_at = 13 + 32 + 80 + 24;
  std::string bad_grouping = bytes;
  bad_grouping[grouping_at] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad_grouping), Error);
  std::string bad_flag = bytes;
  bad_flag[grouping_at + 1] = 2;
  CHECK_THROWS_AS(decode_checkpoint(bad_flag), Error);

  // Patch the lone 0.5 payload to NaN; the finiteness gate must fire.
  uint64_t half_bits = std::bit_cast<uint64_t>(0.5);
  std::string needle(reinterpret_cast<const char*>(&half_bits), 8);
  size_t at = bytes.find(needle);
  REQUIRE(at != std::string::npos);
  uint64_t nan_bits =
      std::bit_cast<uint64_t>(std::numeric_limits<double>::quiet_NaN());
  std::string bad_payload = bytes;
  bad_payload.replace(at, 8, reinterpret_cast<const char*>(&nan_bits), 8);
  CHECK_THROWS_AS(decode_checkpoint(bad_payload), Error);
}

TEST_CASE("split cache and id map sidecar round trip") {
  DatasetSplit split;
  split.train = {{0, 1, 1}, {1, 0, 1}, {2, 2, 0}};
  split.validation = {{0, 0, 1}};
  split.test = {{1, 2, 0}, {2, 1, 1}};
  split.user_ids.get_or_add("alice");
  split.user_ids.get_or_add("bob b");
  split.user_ids.get_or_add("");  // empty names are legal TSV fields
  split.item_ids.get_or_add("x:1");
  split.item_ids.get_or_add("y 2");
  split.item_ids.get_or_add("");  // empty trailing name, the awkward case

  std::string split_path = out_dir("split.tsv");
  std::string idmap_path = out_dir("ids.tsv");
  save_split(split_path, idmap_path, split);
  DatasetSplit back = load_split(split_path, idmap_path);

  CHECK(back.train == split.train);
  CHECK(back.validation == split.validation);
  CHECK(back.test == split.test);
  CHECK(back.user_ids.names() == split.user_ids.names());
  CHECK(back.item_ids.names() == split.item_ids.names());
  CHECK(encode_split(back) == encode_split(split));
  CHECK(encode_idmaps(back.user_ids, back.item_ids) ==
        encode_idmaps(split.user_ids, split.item_ids));
}

TEST_CASE("malformed split caches and sidecars are rejected") {
  CHECK_THROWS_AS(decode_split("DKSE-SPLIT v2\n"), Error);
  CHECK_THROWS_AS(decode_split("DKSE-SPLIT v1\nfrain\t0\t1\t1\n"), Error);
  CHECK_THROWS_AS(decode_split("DKSE-SPLIT v1\ntrain\t0\t1\t7\n"), Error);
  CHECK_THROWS_AS(decode_split("DKSE-SPLIT v1\ntrain\t1.5\t1\t1\n"), Error);
  CHECK_THROWS_AS(decode_split("DKSE-SPLIT v1\ntrain\t0\t1\n"), Error);
  CHECK(decode_split("DKSE-SPLIT v1\n").train.empty());

  IdMap u, v;
  CHECK_THROWS_AS(decode_idmaps("DKSE-IDMAP v2\n", &u, &v), Error);
  // Count says two users but only one name follows.
  CHECK_THROWS_AS(
      decode_idmaps("DKSE-IDMAP v1\nusers\t2\nalice\nitems\t0\n", &u, &v),
      Error);
  CHECK_THROWS_AS(
      decode_idmaps("DKSE-IDMAP v1\nusers\t2\na\na\nitems\t0\n", &u, &v),
      Error);
  CHECK_THROWS_AS(
      decode_idmaps("DKSE-IDMAP v1\nusers\t1\na\nitems\t0\nextra\n", &u, &v),
      Error);
  CHECK_THROWS_AS(decode_idmaps("DKSE-IDMAP v1\nusers\t1\na\n", &u, &v), Error);

  decode_idmaps("DKSE-IDMAP v1\nusers\t2\na\n\nitems\t1\nz\n", &u, &v);
  CHECK(u.names() == std::vector<std::string>{"a", ""});
  CHECK(v.names() == std::vector<std::string>{"z"});
}

TEST_CASE("run configuration round trips byte-stably") {
  RunConfig c;
  c.interactions = "data/clicks.tsv";
  c.kg = "data/kg.tsv";
  c.alignment = "data/map.tsv";
  c.use_synthetic = false;
  c.synthetic.noise = 0.25;
  c.synthetic.seed = 17;
  c.implicit.kind = ImplicitPolicy::AllPositive;
  c.implicit.threshold = 3.5;
  c.k_core = 10;
  c.train_ratio = 0.7;
  c.val_ratio = 0.1;
  c.test_ratio = 0.2;
  c.hyper.l_u = 2;
  c.hyper.n_u = 16;
  c.hyper.grouping = GroupingMode::Base;
  c.hyper.mask.relation = false;
  c.hyper.contrastive_raw_logits = true;
  c.hyper.strict_ratio_norm = true;
  c.hyper.lambda = 1e-6;
  c.hyper.seed = 42;
  c.k_grid = {3, 14};
  c.out_dir = "runs/exp1";
  c.dataset_tag = "clicks";

  std::string text = encode_config(c);
  RunConfig back = decode_config(text);
  CHECK(encode_config(back) == text);
  CHECK(back.interactions == c.interactions);
  CHECK(back.use_synthetic == c.use_synthetic);
  CHECK(back.synthetic.noise == c.synthetic.noise);
  CHECK(back.synthetic.seed == c.synthetic.seed);
  CHECK(back.implicit.kind == c.implicit.kind);
  CHECK(back.implicit.threshold == c.implicit.threshold);
  CHECK(back.k_core == c.k_core);
  CHECK(back.train_ratio == c.train_ratio);
  CHECK(back.hyper.l_u == c.hyper.l_u);
  CHECK(back.hyper.n_u == c.hyper.n_u);
  CHECK(back.hyper.grouping == c.hyper.grouping);
  CHECK(back.hyper.mask.relation == c.hyper.mask.relation);
  CHECK(back.hyper.mask.user_item == true);
  CHECK(back.hyper.contrastive_raw_logits == c.hyper.contrastive_raw_logits);
  CHECK(back.hyper.strict_ratio_norm == c.hyper.strict_ratio_norm);
  CHECK(back.hyper.lambda == c.hyper.lambda);
  CHECK(back.hyper.seed == c.hyper.seed);
  CHECK(back.k_grid == c.k_grid);
  CHECK(back.out_dir == c.out_dir);
  CHECK(back.dataset_tag == c.dataset_tag);

  std::string path = out_dir("run.cfg");
  save_config(path, c);
  CHECK(encode_config(load_config(path)) == text);

  // After the magic line, comments and blank lines are tolerated; unknown or
  // missing keys are not.
  std::string body = text.substr(text.find('\n') + 1);
  RunConfig commented = decode_config("DKSE-CONFIG v1\n# a comment\n\n" + body +
                                      "# trailing\n");
  CHECK(encode_config(commented) == text);
  CHECK_THROWS_AS(decode_config(text + "mystery_knob=1\n"), Error);
  std::string missing = text;
  missing.erase(missing.find("tau="), missing.find('\n', missing.find("tau=")) -
                                          missing.find("tau=") + 1);
  CHECK_THROWS_AS(decode_config(missing), Error);
  CHECK_THROWS_AS(decode_config("not a config\n"), Error);
  std::string bad_bool = text;
  size_t at = bad_bool.find("use_contrastive=");
  bad_bool.replace(at, bad_bool.find('\n', at) - at, "use_contrastive=maybe");
  CHECK_THROWS_AS(decode_config(bad_bool), Error);
}

TEST_CASE("presets carry the pinned per-dataset settings") {
  RunConfig lfm = preset_config("lfm-1b");
  CHECK(lfm.hyper.l_u == 2);
  CHECK(lfm.hyper.n_u == 64);
  CHECK(lfm.hyper.l_v == 1);
  CHECK(lfm.hyper.n_v == 32);
  CHECK(lfm.hyper.d == 64);
  CHECK(lfm.hyper.lambda == 1e-6);
  CHECK(lfm.hyper.n == 6);
  CHECK(lfm.k_core == 20);
  CHECK(lfm.use_synthetic == false);
  CHECK(lfm.preset == "lfm-1b");
  CHECK(lfm.dataset_tag == "lfm-1b");

  RunConfig ml = preset_config("movielens-1m");
  CHECK(ml.hyper.l_u == 1);
  CHECK(ml.hyper.n_u == 32);
  CHECK(ml.hyper.l_v == 2);
  CHECK(ml.hyper.n_v == 32);
  CHECK(ml.hyper.d == 32);
  CHECK(ml.hyper.lambda == 1e-5);
  CHECK(ml.hyper.n == 4);

  RunConfig az = preset_config("amazon-book");
  CHECK(az.hyper.l_u == 2);
  CHECK(az.hyper.n_u == 8);
  CHECK(az.hyper.l_v == 3);
  CHECK(az.hyper.n_v == 32);
  CHECK(az.hyper.d == 64);
  CHECK(az.hyper.lambda == 1e-5);
  CHECK(az.hyper.n == 4);

  CHECK_THROWS_AS(preset_config("netflix"), Error);

  // Presets survive the text format unchanged.
  CHECK(encode_config(decode_config(encode_config(lfm))) ==
        encode_config(lfm));
}

TEST_CASE("synthetic corpus has the promised shape and is deterministic") {
  SyntheticSpec spec;
  spec.users = 40;
  spec.items = 30;
  spec.entities = 60;
  spec.relations = 3;
  spec.latent_dim = 4;
  spec.interactions_per_user = 5;
  spec.kg_edges_per_item = 2;
  spec.seed = 123;

  SyntheticData data = generate_synthetic(spec);
  CHECK(lines_of(data.interactions_tsv).size() == 40u * 5u);
  CHECK(lines_of(data.kg_tsv).size() == 30u * 2u);
  CHECK(lines_of(data.alignment_tsv).size() == 30u);

  // Alignment pins item k to its anchor entity k.
  auto alignment = lines_of(data.alignment_tsv);
  for (size_t k = 0; k < alignment.size(); ++k)
    CHECK(alignment[k] ==
          "i" + std::to_string(k) + "\te" + std::to_string(k));

  // Every KG edge stays inside one cluster and never self-loops.
  REQUIRE(data.clusters > 0);
  for (const std::string& line : lines_of(data.kg_tsv)) {
    auto tab1 = line.find('\t');
    auto tab2 = line.find('\t', tab1 + 1);
    int head = std::stoi(line.substr(1, tab1 - 1));
    std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    int tail = std::stoi(line.substr(tab2 + 2));
    CHECK(head % data.clusters == tail % data.clusters);
    CHECK(head != tail);
    CHECK(rel[0] == 'r');
    CHECK(std::stoi(rel.substr(1)) < spec.relations);
  }

  SyntheticData again = generate_synthetic(spec);
  CHECK(again.interactions_tsv == data.interactions_tsv);
  CHECK(again.kg_tsv == data.kg_tsv);
  CHECK(again.alignment_tsv == data.alignment_tsv);
  spec.seed = 124;
  CHECK(generate_synthetic(spec).interactions_tsv != data.interactions_tsv);
}

TEST_CASE("zero-noise interactions match the planted preferences exactly") {
  SyntheticSpec spec;
  spec.users = 25;
  spec.items = 18;
  spec.entities = 40;
  spec.relations = 4;
  spec.latent_dim = 3;
  spec.interactions_per_user = 4;
  spec.kg_edges_per_item = 3;
  spec.noise = 0.0;
  spec.seed = 321;
  SyntheticData data = generate_synthetic(spec);

  REQUIRE(data.user_latent.size() == 25u);
  REQUIRE(data.item_cluster.size() == 18u);
  std::string expected;
  for (int32_t u = 0; u < spec.users; ++u) {
    // Brute-force ranking from the returned ground truth.
    std::vector<std::pair<double, int32_t>> ranked;
    for (int32_t i = 0; i < spec.items; ++i) {
      double s = 0;
      for (int32_t k = 0; k < spec.latent_dim; ++k)
        s += data.user_latent[u][k] *
             data.cluster_latent[data.item_cluster[i]][k];
      ranked.emplace_back(s, i);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int32_t j = 0; j < spec.interactions_per_user; ++j)
      expected += "u" + std::to_string(u) + "\ti" +
                  std::to_string(ranked[j].second) + "\t5\n";
  }
  CHECK(data.interactions_tsv == expected);
}

TEST_CASE("synthetic spec rejects impossible shapes") {
  SyntheticSpec spec;
  spec.entities = spec.items - 1;  // anchors would not fit
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.interactions_per_user = spec.items + 1;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.users = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.noise = -0.1;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("prepare caches the split and reports corpus statistics") {
  RunConfig c = tiny_config(out_dir("prep"));
  PrepareOutput out = cmd_prepare(c);

  for (const char* key :
       {"dataset=tiny", "users=", "items=", "interactions=", "entities=",
        "relations=", "triples=", "train_pairs=", "val_pairs=", "test_pairs=",
        "negative_sampling_warnings="})
    CHECK(out.stats.find(key) != std::string::npos);

  CHECK(!out.split.train.empty());
  CHECK(!out.split.validation.empty());
  CHECK(!out.split.test.empty());
  CHECK(fs::exists(fs::path(c.out_dir) / "split.tsv"));
  CHECK(fs::exists(fs::path(c.out_dir) / "ids.tsv"));
  CHECK(fs::exists(fs::path(c.out_dir) / "stats.txt"));
  CHECK(fs::exists(fs::path(c.out_dir) / "data" / "interactions.tsv"));
  CHECK(read_file((fs::path(c.out_dir) / "stats.txt").string()) == out.stats);

  // The cache reloads to the same split.
  DatasetSplit cached =
      load_split((fs::path(c.out_dir) / "split.tsv").string(),
                 (fs::path(c.out_dir) / "ids.tsv").string());
  CHECK(cached.train == out.split.train);
  CHECK(cached.validation == out.split.validation);
  CHECK(cached.test == out.split.test);

  // Negatives were added: every split holds both labels.
  for (const auto* part : {&cached.train, &cached.validation, &cached.test}) {
    bool has0 = false, has1 = false;
    for (const auto& p : *part) (p.label ? has1 : has0) = true;
    CHECK(has0);
    CHECK(has1);
  }
}

TEST_CASE("train writes the checkpoint, log, and reports") {
  RunConfig c = tiny_config(out_dir("trainrun"));
  cmd_prepare(c);
  TrainOutput out = cmd_train(c);

  CHECK(out.epochs_run >= 1);
  CHECK(out.checkpoint.hyper.d == c.hyper.d);
  CHECK(out.checkpoint.hyper.seed == c.hyper.seed);
  CHECK(out.checkpoint.params.all_finite());
  CHECK(out.test.positives > 0);
  CHECK(out.test.negatives > 0);
  CHECK(out.test.auc >= 0.0);
  CHECK(out.test.auc <= 1.0);
  CHECK(out.test.precision_at_k.count(1) == 1);
  CHECK(out.test.precision_at_k.count(5) == 1);

  fs::path dir(c.out_dir);
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "train.log"));
  CHECK(fs::exists(dir / "report_validation.txt"));
  CHECK(fs::exists(dir / "report_test.txt"));
  std::string log = read_file((dir / "train.log").string());
  CHECK(log.rfind("epoch=0 ", 0) == 0);
  CHECK(lines_of(log).size() == out.epochs_run);

  Checkpoint saved = load_checkpoint((dir / "model.ckpt").string());
  CHECK(encode_checkpoint(saved) == encode_checkpoint(out.checkpoint));
}

TEST_CASE("evaluate is deterministic and rejects mismatched checkpoints") {
  RunConfig c = tiny_config(out_dir("evalrun"));
  cmd_prepare(c);
  cmd_train(c);

  EvaluateOutput a = cmd_evaluate(c);
  EvaluateOutput b = cmd_evaluate(c);
  CHECK(report_to_kv(a.report) == report_to_kv(b.report));
  CHECK(a.topk_csv == b.topk_csv);
  CHECK(a.topk_csv.rfind("k,precision,ndcg\n", 0) == 0);
  CHECK(lines_of(a.topk_csv).size() == 1u + c.k_grid.size());
  CHECK(fs::exists(fs::path(c.out_dir) / "evaluation.txt"));
  CHECK(fs::exists(fs::path(c.out_dir) / "topk.csv"));

  // A checkpoint whose recorded width disagrees with its tensors is refused.
  Checkpoint tampered =
      load_checkpoint((fs::path(c.out_dir) / "model.ckpt").string());
  tampered.hyper.d += 1;
  std::string bad_path = out_dir("tampered.ckpt");
  save_checkpoint(bad_path, tampered);
  CHECK_THROWS_AS(cmd_evaluate(c, bad_path), Error);
  CHECK_THROWS_AS(cmd_evaluate(c, out_dir("no_such.ckpt")), Error);
}

TEST_CASE("ablate emits exactly the ten variants") {
  RunConfig c = tiny_config(out_dir("ablaterun"));
  c.hyper.epochs = 1;  // one pass per variant is enough to exercise the path
  cmd_prepare(c);
  std::string table = cmd_ablate(c);

  auto rows = lines_of(table);
  REQUIRE(rows.size() == 11u);
  CHECK(rows[0] == "variant\tauc\tacc\tf1");
  std::set<std::string> variants;
  for (size_t i = 1; i < rows.size(); ++i) {
    auto tab = rows[i].find('\t');
    variants.insert(rows[i].substr(0, tab));
    double auc = std::stod(rows[i].substr(tab + 1));
    CHECK(auc >= 0.0);
    CHECK(auc <= 1.0);
  }
  CHECK(variants == std::set<std::string>{
                        "full", "grouping-global", "grouping-vertical",
                        "grouping-horizontal", "grouping-base", "no-user-item",
                        "no-head", "no-relation", "no-tail", "no-contrastive"});
  CHECK(read_file((fs::path(c.out_dir) / "ablation.tsv").string()) == table);
}

TEST_CASE("sweep grids have the standard shapes and the runner honors them") {
  CHECK(sweep_grid("depth").size() == 4u);
  CHECK(sweep_grid("fanout").size() == 20u);
  CHECK(sweep_grid("queries").size() == 5u);
  CHECK_THROWS_AS(sweep_grid("bogus"), Error);

  RunConfig c = tiny_config(out_dir("sweeprun"));
  c.hyper.epochs = 1;
  cmd_prepare(c);

  std::vector<SweepCell> two_cells(2);
  two_cells[0].l = 1;
  two_cells[1].l = 2;
  std::string depth_csv = cmd_sweep(c, "depth", &two_cells);
  auto depth_rows = lines_of(depth_csv);
  REQUIRE(depth_rows.size() == 3u);
  CHECK(depth_rows[0] == "l,auc");
  CHECK(depth_rows[1].rfind("1,", 0) == 0);
  CHECK(depth_rows[2].rfind("2,", 0) == 0);

  std::vector<SweepCell> one_cell(1);
  one_cell[0].l = 1;
  one_cell[0].fanout = 2;
  std::string fanout_csv = cmd_sweep(c, "fanout", &one_cell);
  auto fanout_rows = lines_of(fanout_csv);
  REQUIRE(fanout_rows.size() == 2u);
  CHECK(fanout_rows[0] == "l,n,auc");
  CHECK(fanout_rows[1].rfind("1,2,", 0) == 0);
  CHECK(read_file((fs::path(c.out_dir) / "sweep.csv").string()) == fanout_csv);

  std::vector<SweepCell> q_cell(1);
  q_cell[0].queries = 3;
  std::string q_csv = cmd_sweep(c, "queries", &q_cell);
  CHECK(lines_of(q_csv)[0] == "queries,auc");
  CHECK(lines_of(q_csv)[1].rfind("3,", 0) == 0);
}

TEST_CASE("a stale lock blocks the run and a finished run leaves none") {
  RunConfig c = tiny_config(out_dir("lockrun"));
  cmd_prepare(c);
  fs::path lock = fs::path(c.out_dir) / ".dkse.lock";
  CHECK(!fs::exists(lock));  // released after success

  { std::ofstream(lock.string()) << ""; }
  CHECK_THROWS_WITH_AS(cmd_train(c), doctest::Contains("in use"), Error);
  fs::remove(lock);
  cmd_train(c);
  CHECK(!fs::exists(lock));
}

TEST_CASE("the command line drives the full pipeline") {
  RunConfig c = tiny_config(out_dir("cli_out"));
  std::string cfg = out_dir("cli.cfg");
  save_config(cfg, c);

  CliResult prep = run_cli("prepare --config " + cfg);
  CHECK(prep.code == 0);
  CHECK(prep.err.empty());
  CHECK(prep.out.find("train_pairs=") != std::string::npos);

  CliResult train = run_cli("train --config " + cfg);
  CHECK(train.code == 0);
  CHECK(train.out.find("# validation") != std::string::npos);
  CHECK(train.out.find("# test") != std::string::npos);
  CHECK(train.out.find("auc=") != std::string::npos);
  CHECK(fs::exists(fs::path(c.out_dir) / "model.ckpt"));

  CliResult eval = run_cli("evaluate --config " + cfg);
  CHECK(eval.code == 0);
  CHECK(eval.out.find("auc=") != std::string::npos);

  // --out and --seed override the file; a fresh directory means a fresh run.
  CliResult prep2 = run_cli("prepare --config " + cfg + " --out " +
                            out_dir("cli_out2") + " --seed 99");
  CHECK(prep2.code == 0);
  CHECK(fs::exists(fs::path(out_dir("cli_out2")) / "split.tsv"));

  CliResult synth = run_cli("synth --config " + cfg + " --out " +
                            out_dir("cli_synth"));
  CHECK(synth.code == 0);
  CHECK(fs::exists(fs::path(out_dir("cli_synth")) / "kg.tsv"));
}

TEST_CASE("the command line reports contract violations on stderr") {
  CliResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("prepare") != std::string::npos);

  CliResult nosub = run_cli("frobnicate");
  CHECK(nosub.code != 0);

  CliResult noaxis = run_cli("sweep --out " + out_dir("nowhere"));
  CHECK(noaxis.code != 0);

  CliResult conflict =
      run_cli("train --config x.cfg --preset lfm-1b --out " + out_dir("nw2"));
  CHECK(conflict.code == 1);
  CHECK(conflict.err.rfind("error: ", 0) == 0);
  CHECK(conflict.err.find("mutually exclusive") != std::string::npos);

  CliResult badgrid = run_cli("prepare --k-grid 1,,5 --out " + out_dir("nw3"));
  CHECK(badgrid.code == 1);
  CHECK(badgrid.err.find("bad integer") != std::string::npos);

  // evaluate without a trained model in the output directory
  CliResult nockpt = run_cli("evaluate --out " + out_dir("nw4"));
  CHECK(nockpt.code == 1);
  CHECK(nockpt.err.rfind("error: ", 0) == 0);

  // preset datasets need real input paths
  CliResult preset = run_cli("prepare --preset lfm-1b --out " + out_dir("nw5"));
  CHECK(preset.code == 1);
  CHECK(preset.err.rfind("error: ", 0) == 0);
}
