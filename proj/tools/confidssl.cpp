#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "confidssl/config.hpp"
#include "confidssl/data_synth.hpp"
#include "confidssl/errors.hpp"
#include "confidssl/serialize.hpp"
#include "confidssl/text.hpp"
#include "confidssl/trainer.hpp"
#include "confidssl/version.hpp"

namespace fs = std::filesystem;
using namespace confidssl;

namespace {

std::string iso8601_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "'");
  os << content;
  if (!os) throw DataError("write failed for '" + path + "'");
}

SplitDataset load_splits(const std::string& path) {
  const auto loaded = load_dataset_csv(path);
  return make_splits(loaded.population, loaded.tags);
}

struct GenerateCli {
  std::string spec;
  std::string out;
  std::uint64_t seed = 1;
  std::optional<double> labeled_fraction;
};

int run_generate(const GenerateCli& c) {
  GenerateSpec gs;
  if (c.spec.empty()) {
    gs.dataset = default_benchmark_spec();
  } else {
    gs = generate_spec_from_kv(parse_kv_file(c.spec));
  }
  if (c.labeled_fraction) gs.labeled_fraction = *c.labeled_fraction;
  const Dataset pop = generate(gs.dataset, c.seed);
  // Split with its own stream so feature noise and split choice stay
  // uncorrelated; both are pinned by --seed.
  const auto tags = split(pop, gs.labeled_fraction, c.seed + 1);
  write_dataset_csv(c.out, pop, tags);
  std::size_t n_lab = 0, n_unl = 0, n_test = 0;
  for (const auto tag : tags) {
    if (tag == SplitTag::Labeled) ++n_lab;
    else if (tag == SplitTag::Unlabeled) ++n_unl;
    else ++n_test;
  }
  std::cout << "wrote " << c.out << ": " << pop.size() << " rows, " << pop.num_classes
            << " classes (" << n_lab << " labeled, " << n_unl << " unlabeled, "
            << n_test << " test)\n";
  return 0;
}

struct TrainCli {
  std::string data;
  std::string out;
  std::string config_file;
  std::string resume;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<std::string> mapping;
  std::optional<std::size_t> resample_period;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> stop_at;
  bool resample_labeled_on = false;
  bool resample_labeled_off = false;
  bool resample_unlabeled_on = false;
  bool resample_unlabeled_off = false;
  bool print_config = false;
};

nlohmann::json train_manifest(const TrainerConfig& cfg, const std::string& dataset,
                              const std::string& out_dir) {
  return nlohmann::json{{"tool", "confidssl"},
                        {"tool_version", kVersion},
                        {"created_utc", iso8601_utc_now()},
                        {"dataset", dataset},
                        {"out_dir", out_dir},
                        {"config", to_json(cfg)}};
}

int run_train(const TrainCli& c) {
  TrainerConfig cfg;
  TrainerState resume_state;
  const bool resuming = !c.resume.empty();
  std::string dataset_path = c.data;

  if (resuming) {
    const bool has_overrides = !c.config_file.empty() || c.method.has_value() ||
                               c.seed.has_value() || c.tau.has_value() ||
                               c.mapping.has_value() || c.resample_period.has_value() ||
                               c.epochs.has_value() || c.resample_labeled_on ||
                               c.resample_labeled_off || c.resample_unlabeled_on ||
                               c.resample_unlabeled_off;
    if (has_overrides)
      throw ConfigError(
          "train: --resume runs under the checkpoint's config; drop the other "
          "config options");
    auto ck = load_checkpoint(c.resume);
    cfg = ck.config;
    resume_state = std::move(ck.state);
    if (dataset_path.empty()) dataset_path = ck.dataset_path;
  } else {
    if (!c.config_file.empty())
      cfg = trainer_config_from_kv(parse_kv_file(c.config_file), cfg);
    if (c.method) {
      const auto m = method_from_string(*c.method);
      if (!m) throw ConfigError("train: unknown method '" + *c.method + "'");
      cfg.method = *m;
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.tau) cfg.tau = *c.tau;
    if (c.mapping) {
      const auto m = mapping_from_string(*c.mapping);
      if (!m) throw ConfigError("train: unknown mapping '" + *c.mapping + "'");
      cfg.mapping = *m;
    }
    if (c.resample_period) cfg.resample_period = *c.resample_period;
    if (c.epochs) cfg.epochs = *c.epochs;
    if (c.resample_labeled_on && c.resample_labeled_off)
      throw ConfigError("train: both --resample-labeled and --no-resample-labeled given");
    if (c.resample_unlabeled_on && c.resample_unlabeled_off)
      throw ConfigError(
          "train: both --resample-unlabeled and --no-resample-unlabeled given");
    if (c.resample_labeled_on) cfg.resample_labeled = true;
    if (c.resample_labeled_off) cfg.resample_labeled = false;
    if (c.resample_unlabeled_on) cfg.resample_unlabeled = true;
    if (c.resample_unlabeled_off) cfg.resample_unlabeled = false;
  }

  if (c.print_config) {
    std::cout << format_config(cfg);
    return 0;
  }
  validate(cfg);
  if (dataset_path.empty()) throw ConfigError("train: --data is required");
  if (c.out.empty()) throw ConfigError("train: --out is required");

  auto splits = load_splits(dataset_path);
  fs::create_directories(c.out);

  auto manifest = train_manifest(cfg, dataset_path, c.out);
  if (resuming) manifest["resumed_from"] = c.resume;
  if (c.stop_at) manifest["stop_at"] = *c.stop_at;
  write_text_file(c.out + "/manifest.json", manifest.dump(2) + "\n");

  Trainer trainer = resuming ? Trainer(cfg, std::move(splits), std::move(resume_state))
                             : Trainer(cfg, std::move(splits));
  trainer.run_to(c.stop_at ? *c.stop_at : cfg.epochs);

  write_metrics_jsonl(c.out + "/metrics.jsonl", trainer.metrics());
  const EvalResult ev = evaluate(trainer.params(), trainer.test_set());
  write_summary_csv(c.out + "/summary.csv", cfg, ev);
  write_checkpoint(c.out + "/checkpoint.json", cfg, trainer.snapshot(), dataset_path);

  std::cout << "trained " << to_string(cfg.method) << " seed " << cfg.seed
            << " to epoch " << trainer.epoch() << ": overall_acc "
            << format_double(ev.overall_acc) << " mean_acc "
            << format_double(ev.mean_class_acc) << "\n";
  std::cout << "outputs in " << c.out
            << " (manifest.json, metrics.jsonl, summary.csv, checkpoint.json)\n";
  return 0;
}

struct SweepCli {
  std::string grid;
  std::string out;
  std::string data;
  std::size_t jobs = 1;
};

std::string run_dir_name(const TrainerConfig& cfg) {
  std::string name{to_string(cfg.method)};
  name += "_tau";
  name += format_double(cfg.tau);
  name += "_";
  name += to_string(cfg.mapping);
  name += "_seed";
  name += std::to_string(cfg.seed);
  return name;
}

int run_sweep(const SweepCli& c) {
  auto grid = sweep_grid_from_kv(parse_kv_file(c.grid));
  if (!c.data.empty()) grid.data_path = c.data;
  if (grid.data_path.empty())
    throw ConfigError("sweep: no dataset given (grid key 'data' or --data)");
  const SplitDataset splits = load_splits(grid.data_path);

  struct Cell {
    MethodVariant method;
    double tau;
    MappingKind mapping;
  };
  std::vector<Cell> cells;
  for (const auto m : grid.methods)
    for (const auto tau : grid.taus)
      for (const auto mapping : grid.mappings) cells.push_back({m, tau, mapping});

  struct Run {
    std::size_t cell = 0;
    TrainerConfig cfg;
    EvalResult ev;
  };
  std::vector<Run> runs;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (const auto seed : grid.seeds) {
      Run r;
      r.cell = ci;
      r.cfg = grid.base;
      r.cfg.method = cells[ci].method;
      r.cfg.tau = cells[ci].tau;
      r.cfg.mapping = cells[ci].mapping;
      r.cfg.seed = seed;
      validate(r.cfg);
      runs.push_back(std::move(r));
    }
  }

  fs::create_directories(c.out + "/runs");
  nlohmann::json manifest{{"tool", "confidssl"},
                          {"tool_version", kVersion},
                          {"created_utc", iso8601_utc_now()},
                          {"grid_file", c.grid},
                          {"dataset", grid.data_path},
                          {"cells", cells.size()},
                          {"seeds", grid.seeds},
                          {"jobs", c.jobs},
                          {"out_dir", c.out}};
  write_text_file(c.out + "/manifest.json", manifest.dump(2) + "\n");

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        Run& run = runs[i];
        Trainer t(run.cfg, splits);
        t.run_all();
        run.ev = evaluate(t.params(), t.test_set());
        const std::string dir = c.out + "/runs/" + run_dir_name(run.cfg);
        fs::create_directories(dir);
        write_metrics_jsonl(dir + "/metrics.jsonl", t.metrics());
        write_summary_csv(dir + "/summary.csv", run.cfg, run.ev);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(c.jobs, runs.size()));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  std::string agg = "method,tau,mapping,seeds,overall_acc_mean,overall_acc_std,"
                    "mean_acc_mean,mean_acc_std\n";
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    std::vector<double> overall, mean_acc;
    for (const auto& run : runs) {
      if (run.cell != ci) continue;
      overall.push_back(run.ev.overall_acc);
      mean_acc.push_back(run.ev.mean_class_acc);
    }
    const auto stats = [](const std::vector<double>& v) {
      double m = 0.0;
      for (const double x : v) m += x;
      m /= static_cast<double>(v.size());
      double s2 = 0.0;
      for (const double x : v) s2 += (x - m) * (x - m);
      const double sd = v.size() > 1
                            ? std::sqrt(s2 / static_cast<double>(v.size() - 1))
                            : 0.0;
      return std::pair<double, double>(m, sd);
    };
    const auto [om, osd] = stats(overall);
    const auto [mm, msd] = stats(mean_acc);
    agg += std::string(to_string(cells[ci].method)) + "," + format_double(cells[ci].tau) +
           "," + std::string(to_string(cells[ci].mapping)) + "," +
           std::to_string(overall.size()) + "," + format_double(om) + "," +
           format_double(osd) + "," + format_double(mm) + "," + format_double(msd) +
           "\n";
  }
  write_text_file(c.out + "/aggregate.csv", agg);
  std::cout << "swept " << runs.size() << " runs (" << cells.size() << " cells x "
            << grid.seeds.size() << " seeds) into " << c.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("confidssl ") + kVersion +
               " - class-confidence semi-supervised learning on synthetic data"};
  app.require_subcommand(1);

  GenerateCli gen_cli;
  auto* gen = app.add_subcommand("generate", "synthesize an imbalanced dataset CSV");
  gen->add_option("--spec", gen_cli.spec,
                  "dataset spec file (key = value); default: built-in benchmark");
  gen->add_option("--seed", gen_cli.seed, "generation seed (split uses seed+1)");
  gen->add_option("--out", gen_cli.out, "output CSV path")->required();
  gen->add_option("--labeled-fraction", gen_cli.labeled_fraction,
                  "labeled share per class (overrides spec file)");

  TrainCli train_cli;
  auto* tr = app.add_subcommand("train", "train one method on a dataset CSV");
  tr->add_option("--data", train_cli.data, "dataset CSV from generate");
  tr->add_option("--out", train_cli.out, "output directory");
  tr->add_option("--config", train_cli.config_file, "config file (key = value)");
  tr->add_option("--method", train_cli.method,
                 "supervised|pl|fixmatch|confid_pl|confid_match|"
                 "confid_threshold_only|confid_resample_only");
  tr->add_option("--seed", train_cli.seed, "training seed");
  tr->add_option("--tau", train_cli.tau, "base confidence threshold in (0.5, 1)");
  tr->add_option("--mapping", train_cli.mapping, "concave|linear|exp");
  tr->add_option("--resample-period", train_cli.resample_period,
                 "epochs between loader rebuilds");
  tr->add_option("--epochs", train_cli.epochs, "total training epochs");
  tr->add_option("--stop-at", train_cli.stop_at,
                 "pause after this epoch (checkpoint.json resumes the run)");
  tr->add_option("--resume", train_cli.resume, "checkpoint.json to resume from");
  tr->add_flag("--resample-labeled", train_cli.resample_labeled_on,
               "resample the labeled loader (default on)");
  tr->add_flag("--no-resample-labeled", train_cli.resample_labeled_off,
               "keep the labeled loader unweighted");
  tr->add_flag("--resample-unlabeled", train_cli.resample_unlabeled_on,
               "resample the unlabeled loader (default on)");
  tr->add_flag("--no-resample-unlabeled", train_cli.resample_unlabeled_off,
               "keep the unlabeled loader unweighted");
  tr->add_flag("--print-config", train_cli.print_config,
               "print the effective config and exit");

  SweepCli sweep_cli;
  auto* sw = app.add_subcommand("sweep", "run a grid of configurations");
  sw->add_option("--grid", sweep_cli.grid, "grid file (key = value)")->required();
  sw->add_option("--out", sweep_cli.out, "output directory")->required();
  sw->add_option("--data", sweep_cli.data, "dataset CSV (overrides grid key 'data')");
  sw->add_option("--jobs", sweep_cli.jobs, "worker threads (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_generate(gen_cli);
    if (tr->parsed()) return run_train(train_cli);
    if (sw->parsed()) return run_sweep(sweep_cli);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
