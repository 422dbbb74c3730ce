#include <charconv>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dkse/config.hpp"
#include "dkse/runner.hpp"
#include "dkse/util.hpp"

namespace {

std::vector<int> parse_k_grid(const std::string& text) {
  std::vector<int> out;
  size_t start = 0;
  while (start <= text.size() && !text.empty()) {
    size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string tok = text.substr(start, end - start);
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    dkse::check(ec == std::errc{} && p == tok.data() + tok.size(),
                "--k-grid: bad integer '" + tok + "'");
    out.push_back(v);
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

struct Flags {
  std::string config_path;
  std::string preset;
  std::string out;
  std::string k_grid;
  std::string axis;
  std::string checkpoint;
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path,
                  "run configuration file (DKSE-CONFIG v1)");
  sub->add_option("--preset", f.preset,
                  "hyper-parameter preset: lfm-1b | movielens-1m | amazon-book");
  sub->add_option("--seed", f.seed, "run seed (splits, training, evaluation)")
      ->each([&f](const std::string&) { f.seed_set = true; });
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--k-grid", f.k_grid, "comma-separated top-K cut-offs");
}

dkse::RunConfig make_config(const Flags& f) {
  dkse::check(f.config_path.empty() || f.preset.empty(),
              "--config and --preset are mutually exclusive");
  dkse::RunConfig c;
  if (!f.config_path.empty()) c = dkse::load_config(f.config_path);
  if (!f.preset.empty()) c = dkse::preset_config(f.preset);
  if (f.seed_set) c.hyper.seed = f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.k_grid.empty()) c.k_grid = parse_k_grid(f.k_grid);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DKSE experiments: prepare, train, evaluate, ablate, sweep, "
               "synth"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* prepare =
      app.add_subcommand("prepare", "build and cache the dataset split");
  CLI::App* train = app.add_subcommand("train", "fit on the cached split");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score the test split with a checkpoint");
  CLI::App* ablate =
      app.add_subcommand("ablate", "train grouping and component variants");
  CLI::App* sweep =
      app.add_subcommand("sweep", "grid over depth, fanout, or query count");
  CLI::App* synth =
      app.add_subcommand("synth", "write a planted-structure corpus");
  for (CLI::App* sub : {prepare, train, evaluate, ablate, sweep, synth})
    add_common(sub, f);
  evaluate->add_option("--checkpoint", f.checkpoint,
                       "checkpoint path (default OUT/model.ckpt)");
  sweep->add_option("--axis", f.axis, "depth | fanout | queries")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    dkse::RunConfig config = make_config(f);
    if (prepare->parsed()) {
      auto out = dkse::cmd_prepare(config);
      std::cout << out.stats;
    } else if (train->parsed()) {
      auto out = dkse::cmd_train(config);
      std::cout << "epochs_run=" << out.epochs_run
                << " best_epoch=" << out.best_epoch << '\n';
      std::cout << "# validation\n" << dkse::report_to_kv(out.validation);
      std::cout << "# test\n" << dkse::report_to_kv(out.test);
    } else if (evaluate->parsed()) {
      auto out = dkse::cmd_evaluate(config, f.checkpoint);
      std::cout << dkse::report_to_kv(out.report);
    } else if (ablate->parsed()) {
      std::cout << dkse::cmd_ablate(config);
    } else if (sweep->parsed()) {
      std::cout << dkse::cmd_sweep(config, f.axis);
    } else if (synth->parsed()) {
      auto paths = dkse::cmd_synth(config);
      std::cout << paths.interactions << '\n'
                << paths.kg << '\n'
                << paths.alignment << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
