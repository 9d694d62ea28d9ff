#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "orient/synthetic.hpp"
#include "orient/trainer.hpp"

namespace orient {

enum class EvalDomain { source, target };
enum class EvalSplit { train, test, all };
enum class EvalModel { student, teacher };

/// Everything one CLI invocation can be configured with.
struct RunConfig {
  TrainConfig train;
  BenchmarkSpec benchmark;
  EvalDomain eval_domain = EvalDomain::target;
  EvalSplit eval_split = EvalSplit::test;
  EvalModel eval_model = EvalModel::student;
  bool eval_per_sample = false;
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3};
  int checkpoint_every = 0;  // epochs between intermediate checkpoints, 0 = final only
  int theory_trials = 1000;
  std::uint64_t theory_seed = 1;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

/// Every accepted key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

struct ConfigError {
  std::string key;
  std::string value;
  std::string message;

  std::string to_string() const;
};

struct ConfigResult {
  RunConfig config;
  std::vector<ConfigError> errors;

  bool ok() const { return errors.empty(); }
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses flat `key = value` text (`#` starts a comment), applies the
/// overrides on top, and reports every violated constraint at once.
ConfigResult validate_config(std::string_view text, const ConfigOverrides& overrides = {});

/// The resolved configuration as `key = value` lines, one per key.
std::string render_config(const RunConfig& config);

}  // namespace orient
