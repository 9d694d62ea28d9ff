#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "orient/checkpoint.hpp"
#include "orient/config.hpp"
#include "orient/evaluation.hpp"
#include "orient/mining.hpp"
#include "orient/synthetic.hpp"
#include "orient/theory.hpp"
#include "orient/trainer.hpp"
#include "orient/version.hpp"

namespace orient::cli {
namespace {

namespace fs = std::filesystem;

/// Bad input from the user: exit code 1.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Routes library logging to `err` for the duration of one command.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("orientdg", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

struct Paths {
  std::string config;
  std::string data;
  std::string out;
  std::string ckpt;
};

struct Command {
  CLI::App* app = nullptr;
  Paths paths;
  std::map<std::string, std::string> overrides;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RunConfig resolve_config(const Command& command, const CLI::App& app) {
  std::string text;
  if (!command.paths.config.empty()) {
    if (!fs::is_regular_file(command.paths.config)) {
      throw usage_error("config file not found: " + command.paths.config);
    }
    text = read_file(command.paths.config);
  }
  ConfigOverrides overrides;
  for (const auto& key : config_keys()) {
    const auto it = command.overrides.find(key.name);
    if (app.count("--" + key.name) > 0 && it != command.overrides.end()) {
      overrides.emplace_back(key.name, it->second);
    }
  }
  ConfigResult result = validate_config(text, overrides);
  if (!result.ok()) {
    std::string message = "invalid configuration:";
    for (const auto& e : result.errors) message += "\n  " + e.to_string();
    throw usage_error(message);
  }
  return result.config;
}

void require_directory(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw usage_error(fmt::format("{} not found: {}", what, path));
}

fs::path domain_dir(const fs::path& data, std::string_view domain) {
  if (fs::is_regular_file(data / domain / "manifest.csv")) return data / domain;
  if (fs::is_regular_file(data / "manifest.csv")) return data;
  throw usage_error(fmt::format("no {} dataset under {} (expected {} or {})", domain, data.string(),
                                (data / domain / "manifest.csv").string(),
                                (data / "manifest.csv").string()));
}

std::optional<Split> to_split(EvalSplit split) {
  switch (split) {
    case EvalSplit::train:
      return Split::train;
    case EvalSplit::test:
      return Split::test;
    case EvalSplit::all:
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<PointCloud> load_clouds(const fs::path& data, std::string_view domain,
                                    std::optional<Split> split, int* num_classes = nullptr) {
  const Dataset dataset = load_dataset(domain_dir(data, domain));
  if (num_classes != nullptr) *num_classes = static_cast<int>(dataset.class_names.size());
  auto clouds = dataset.clouds(split);
  if (clouds.empty()) {
    throw usage_error(fmt::format("{} dataset under {} has no samples in the requested split", domain,
                                  data.string()));
  }
  return clouds;
}

ModelParams load_model(const std::string& ckpt, EvalModel which) {
  const fs::path path(ckpt);
  if (fs::is_directory(path)) {
    const fs::path file = path / (which == EvalModel::student ? "student.json" : "teacher.json");
    if (!fs::is_regular_file(file)) throw usage_error("checkpoint not found: " + file.string());
    return load_checkpoint(file);
  }
  if (!fs::is_regular_file(path)) throw usage_error("checkpoint not found: " + ckpt);
  return load_checkpoint(path);
}

std::string_view domain_name(EvalDomain d) { return d == EvalDomain::source ? "source" : "target"; }

int cmd_gen(const Command& c, const RunConfig& config) {
  const Benchmark benchmark = build_benchmark(config.benchmark, config.train.workers);
  write_benchmark(benchmark, c.paths.out);
  spdlog::info("wrote {} source and {} target samples to {}", benchmark.source.samples.size(),
               benchmark.target.samples.size(), c.paths.out);
  return kExitOk;
}

int cmd_train(const Command& c, RunConfig config) {
  require_directory(c.paths.data, "data directory");
  int num_classes = 0;
  const auto clouds = load_clouds(c.paths.data, "source", Split::train, &num_classes);
  config.train.num_classes = num_classes;
  const fs::path out(c.paths.out);
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "run.cfg");
    cfg << render_config(config);
  }
  TrainCallbacks callbacks;
  if (config.checkpoint_every > 0) {
    callbacks.on_epoch = [&](const EpochRecord& r, const ModelParams& student, const ModelParams& teacher) {
      if ((r.epoch + 1) % config.checkpoint_every == 0) {
        save_model_pair(out / "checkpoints" / fmt::format("epoch_{:04d}", r.epoch + 1), student, teacher);
      }
    };
  }
  const TrainResult result = train(config.train, clouds, callbacks);
  write_train_log_csv(out / "train_log.csv", result.log);
  save_model_pair(out / "final", result.student, result.teacher);
  spdlog::info("wrote {} and {}", (out / "train_log.csv").string(), (out / "final").string());
  return kExitOk;
}

int cmd_mine(const Command& c, const RunConfig& config) {
  require_directory(c.paths.data, "data directory");
  const ModelParams model = load_model(c.paths.ckpt, EvalModel::student);
  const auto clouds = load_clouds(c.paths.data, "source", Split::train);
  const IntricateSet set = build_intricate_set(
      model, clouds, config.train.mining, derive_seed(config.train.seed, {stream::kRefresh, 0}),
      config.train.workers, 0);
  const fs::path path = fs::path(c.paths.out) / "intricate.csv";
  write_intricate_csv(path, set);
  spdlog::info("wrote {} orientations for {} samples to {}", set.entry_count(), set.sample_count(),
               path.string());
  return kExitOk;
}

int cmd_eval(const Command& c, const RunConfig& config) {
  require_directory(c.paths.data, "data directory");
  const ModelParams model = load_model(c.paths.ckpt, config.eval_model);
  const auto clouds = load_clouds(c.paths.data, domain_name(config.eval_domain), to_split(config.eval_split));
  EvalOptions options;
  options.workers = config.train.workers;
  options.per_sample_maps = config.eval_per_sample;
  const EvalReport report = evaluate(model, clouds, options);
  const fs::path out(c.paths.out);
  write_metrics_json(out / "metrics.json", report);
  write_series_csv(out / "series.csv", report);
  spdlog::info("acc {:.4f} +- {:.4f}, avg {:.4f} +- {:.4f}, cst {:.6f}", report.acc_mean,
               report.acc_std, report.avg_mean, report.avg_std, report.cst);
  return kExitOk;
}

int cmd_ablate(const Command& c, RunConfig config) {
  require_directory(c.paths.data, "data directory");
  int num_classes = 0;
  const auto train_set = load_clouds(c.paths.data, "source", Split::train, &num_classes);
  const auto eval_set = load_clouds(c.paths.data, domain_name(config.eval_domain), to_split(config.eval_split));
  config.train.num_classes = num_classes;
  AblationOptions options;
  options.seeds = config.ablate_seeds;
  options.evaluate_teacher = config.eval_model == EvalModel::teacher;
  options.eval.workers = config.train.workers;
  const auto rows = run_ablation_matrix(config.train, train_set, eval_set, options);
  const fs::path path = fs::path(c.paths.out) / "ablation.csv";
  write_ablation_csv(path, rows);
  spdlog::info("wrote {} rows to {}", rows.size(), path.string());
  return kExitOk;
}

int cmd_theory(const Command& c, const RunConfig& config, std::ostream& out) {
  const TheoryReport report = run_theory_check(config.theory_trials, config.theory_seed);
  std::size_t gain_failures = 0;
  std::size_t identity_failures = 0;
  for (const auto& t : report.trials) {
    const bool must_gain = t.mutual_information > 1e-3 || t.u_nonuniformity > 1e-3;
    if (t.gain < -1e-12 || (must_gain && t.gain <= 1e-6)) ++gain_failures;
    if (t.two_path_gap > 1e-10 || t.decomposition_gap > 1e-10) ++identity_failures;
  }
  auto verdict = [](std::size_t failures) { return failures == 0 ? "PASS" : "FAIL"; };
  out << fmt::format("{:<44} {:>8} {:>8}  {}\n", "check", "trials", "failed", "result");
  out << fmt::format("{:<44} {:>8} {:>8}  {}\n", "augmentation entropy gain", report.trials.size(),
                     gain_failures, verdict(gain_failures));
  out << fmt::format("{:<44} {:>8} {:>8}  {}\n", "entropy and mutual-information identities",
                     report.trials.size(), identity_failures, verdict(identity_failures));
  out << fmt::format("min gain {:.3e}, max two-path gap {:.3e}, max decomposition gap {:.3e}\n",
                     report.min_gain, report.max_two_path_gap, report.max_decomposition_gap);
  if (!c.paths.out.empty()) write_theory_json(fs::path(c.paths.out) / "theory.json", report);
  return report.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotation-adaptive point-cloud domain generalization", "orientdg"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::map<std::string, Command> commands;
  auto add_command = [&](const std::string& name, const std::string& description, bool data, bool out_dir,
                         bool ckpt) {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, description);
    c.app->add_option("--config", c.paths.config, "flat key = value configuration file");
    if (data) c.app->add_option("--data", c.paths.data, "benchmark or dataset directory")->required();
    if (out_dir) c.app->add_option("--out", c.paths.out, "output directory")->required();
    if (ckpt) c.app->add_option("--ckpt", c.paths.ckpt, "checkpoint directory or .json file")->required();
    for (const auto& key : config_keys()) {
      c.app->add_option("--" + key.name, c.overrides[key.name],
                        fmt::format("{} (default {})", key.description, key.default_value));
    }
  };
  add_command("gen", "build the synthetic benchmark", false, true, false);
  add_command("train", "train student and teacher on the source domain", true, true, false);
  add_command("mine", "mine an intricate orientation set with a checkpoint", true, true, true);
  add_command("eval", "evaluate a checkpoint over the 64-rotation series", true, true, true);
  add_command("ablate", "run the six-variant ablation matrix", true, true, false);
  add_command("theory-check", "randomized entropy and KL bound checks", false, false, false);
  commands["theory-check"].app->add_option("--out", commands["theory-check"].paths.out,
                                           "directory for theory.json");

  const Command* selected = nullptr;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (const auto& [name, c] : commands) {
      if (c.app->parsed()) selected = &c;
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* context = &app;
    for (const auto& [name, c] : commands) {
      if (c.app->parsed()) context = c.app;
    }
    err << context->help();
    return kExitValidation;
  }

  LogScope logging(err);
  const std::string name = selected->app->get_name();
  try {
    const RunConfig config = resolve_config(*selected, *selected->app);
    if (name == "gen") return cmd_gen(*selected, config);
    if (name == "train") return cmd_train(*selected, config);
    if (name == "mine") return cmd_mine(*selected, config);
    if (name == "eval") return cmd_eval(*selected, config);
    if (name == "ablate") return cmd_ablate(*selected, config);
    return cmd_theory(*selected, config, out);
  } catch (const usage_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << name << " failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace orient::cli
