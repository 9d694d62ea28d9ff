#include "orient/config.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

#include <fmt/format.h>

namespace orient {
namespace {

using ParseFn = std::function<std::optional<std::string>(RunConfig&, std::string_view)>;
using RenderFn = std::function<std::string(const RunConfig&)>;

struct KeySpec {
  std::string name;
  std::string description;
  ParseFn parse;    // returns the violated constraint, if any
  RenderFn render;
};

template <class T>
using Access = T& (*)(RunConfig&);

template <class T>
const T& read(Access<T> access, const RunConfig& config) {
  return access(const_cast<RunConfig&>(config));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

KeySpec int_key(std::string name, std::string description, Access<int> access, long min,
                long max = INT_MAX) {
  ParseFn parse = [access, min, max](RunConfig& c, std::string_view text) -> std::optional<std::string> {
    const auto v = parse_number<long>(text);
    if (!v) return "must be an integer";
    if (*v < min || *v > max) {
      if (max == INT_MAX) return fmt::format("must be >= {}", min);
      return fmt::format("must lie in [{}, {}]", min, max);
    }
    access(c) = static_cast<int>(*v);
    return std::nullopt;
  };
  RenderFn render = [access](const RunConfig& c) { return std::to_string(read(access, c)); };
  return {std::move(name), std::move(description), parse, render};
}

KeySpec seed_key(std::string name, std::string description, Access<std::uint64_t> access) {
  ParseFn parse = [access](RunConfig& c, std::string_view text) -> std::optional<std::string> {
    const auto v = parse_number<std::uint64_t>(text);
    if (!v) return "must be a non-negative integer";
    access(c) = *v;
    return std::nullopt;
  };
  RenderFn render = [access](const RunConfig& c) { return std::to_string(read(access, c)); };
  return {std::move(name), std::move(description), parse, render};
}

struct Range {
  double lo;
  bool lo_open;
  double hi;
  bool hi_open;
  const char* text;

  bool contains(double v) const {
    return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  }
};

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Range kPositive{0.0, true, kInf, true, "must be > 0"};
constexpr Range kNonNegative{0.0, false, kInf, true, "must be >= 0"};
constexpr Range kUnitClosed{0.0, false, 1.0, false, "must lie in [0, 1]"};
constexpr Range kUnitOpen{0.0, true, 1.0, true, "must lie in (0, 1)"};
constexpr Range kOcclusion{0.0, false, 0.5, false, "must lie in [0, 0.5]"};
constexpr Range kAtLeastOne{1.0, false, kInf, true, "must be >= 1"};

KeySpec real_key(std::string name, std::string description, Access<double> access, Range range) {
  ParseFn parse = [access, range](RunConfig& c, std::string_view text) -> std::optional<std::string> {
    const auto v = parse_number<double>(text);
    if (!v || !std::isfinite(*v)) return "must be a finite number";
    if (!range.contains(*v)) return std::string(range.text);
    access(c) = *v;
    return std::nullopt;
  };
  RenderFn render = [access](const RunConfig& c) { return fmt::format("{}", read(access, c)); };
  return {std::move(name), std::move(description), parse, render};
}

template <class E>
KeySpec enum_key(std::string name, std::string description, Access<E> access,
                 std::vector<std::pair<std::string, E>> choices) {
  std::string allowed;
  for (const auto& [label, value] : choices) allowed += (allowed.empty() ? "" : "|") + label;
  ParseFn parse = [access, choices, allowed](RunConfig& c, std::string_view text) -> std::optional<std::string> {
    for (const auto& [label, value] : choices) {
      if (label == text) {
        access(c) = value;
        return std::nullopt;
      }
    }
    return "must be one of " + allowed;
  };
  RenderFn render = [access, choices](const RunConfig& c) {
    for (const auto& [label, value] : choices) {
      if (value == read(access, c)) return label;
    }
    return std::string("?");
  };
  return {std::move(name), std::move(description), parse, render};
}

KeySpec bool_key(std::string name, std::string description, Access<bool> access) {
  return enum_key<bool>(std::move(name), std::move(description), access, {{"false", false}, {"true", true}});
}

KeySpec seed_list_key(std::string name, std::string description) {
  ParseFn parse = [](RunConfig& c, std::string_view text) -> std::optional<std::string> {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
      const auto v = parse_number<std::uint64_t>(item);
      if (!v) return "must be a comma-separated list of non-negative integers";
      seeds.push_back(*v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    c.ablate_seeds = std::move(seeds);
    return std::nullopt;
  };
  RenderFn render = [](const RunConfig& c) {
    std::string out;
    for (std::uint64_t s : c.ablate_seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
    return out;
  };
  return {std::move(name), std::move(description), parse, render};
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    // Training.
    t.push_back(seed_key("seed", "training seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    t.push_back(int_key("epochs", "training epochs", [](RunConfig& c) -> int& { return c.train.epochs; }, 1));
    t.push_back(int_key("batch_size", "samples per batch", [](RunConfig& c) -> int& { return c.train.batch_size; }, 2));
    t.push_back(real_key("lr0", "initial learning rate", [](RunConfig& c) -> double& { return c.train.lr0; }, kPositive));
    t.push_back(real_key("gamma", "learning-rate decay gamma", [](RunConfig& c) -> double& { return c.train.gamma; }, kNonNegative));
    t.push_back(real_key("beta", "learning-rate decay exponent", [](RunConfig& c) -> double& { return c.train.beta; }, kNonNegative));
    t.push_back(real_key("weight_decay", "decoupled weight decay", [](RunConfig& c) -> double& { return c.train.weight_decay; }, kNonNegative));
    t.push_back(real_key("ema_momentum", "teacher EMA momentum", [](RunConfig& c) -> double& { return c.train.ema_momentum; }, kUnitClosed));
    t.push_back(int_key("workers", "worker threads, 0 = all available", [](RunConfig& c) -> int& { return c.train.workers; }, 0));
    t.push_back(int_key("checkpoint_every", "epochs between checkpoints, 0 = final only", [](RunConfig& c) -> int& { return c.checkpoint_every; }, 0));
    // Mining.
    t.push_back(int_key("T", "epochs between intricate-set refreshes", [](RunConfig& c) -> int& { return c.train.mining.refresh_period; }, 1));
    t.push_back(int_key("AT", "mined orientations per sample", [](RunConfig& c) -> int& { return c.train.mining.repetitions; }, 1));
    t.push_back(int_key("mining_steps", "gradient-ascent steps, 0 = random orientations", [](RunConfig& c) -> int& { return c.train.mining.steps; }, 0));
    t.push_back(real_key("mining_step_size", "ascent step in radians", [](RunConfig& c) -> double& { return c.train.mining.step_size; }, kPositive));
    // Losses.
    t.push_back(int_key("V", "intricate variants per sample in a batch", [](RunConfig& c) -> int& { return c.train.variants; }, 1));
    t.push_back(real_key("tau_s", "student temperature", [](RunConfig& c) -> double& { return c.train.weights.tau_s; }, kPositive));
    t.push_back(real_key("tau_t", "teacher temperature", [](RunConfig& c) -> double& { return c.train.weights.tau_t; }, kPositive));
    t.push_back(real_key("tau_prime", "margin separation temperature", [](RunConfig& c) -> double& { return c.train.weights.tau_prime; }, kPositive));
    t.push_back(real_key("lambda_oc", "orientation consistency weight", [](RunConfig& c) -> double& { return c.train.weights.lambda_oc; }, kNonNegative));
    t.push_back(real_key("lambda_ms", "margin separation weight", [](RunConfig& c) -> double& { return c.train.weights.lambda_ms; }, kNonNegative));
    t.push_back(enum_key<OcTarget>("oc_target", "which view the teacher sees",
                                   [](RunConfig& c) -> OcTarget& { return c.train.oc_target; },
                                   {{"teacher_on_intricate", OcTarget::teacher_on_intricate},
                                    {"teacher_on_original", OcTarget::teacher_on_original}}));
    // Synthetic benchmark.
    t.push_back(int_key("classes", "primitive classes", [](RunConfig& c) -> int& { return c.benchmark.classes; }, 2, kPrimitiveCount));
    t.push_back(int_key("per_class", "samples per class and domain", [](RunConfig& c) -> int& { return c.benchmark.per_class; }, 10));
    t.push_back(int_key("points", "points per cloud", [](RunConfig& c) -> int& { return c.benchmark.points; }, 32));
    t.push_back(real_key("train_fraction", "train share of each class", [](RunConfig& c) -> double& { return c.benchmark.train_fraction; }, kUnitOpen));
    t.push_back(seed_key("data_seed", "benchmark generation seed", [](RunConfig& c) -> std::uint64_t& { return c.benchmark.seed; }));
    t.push_back(real_key("src_jitter", "source jitter sigma", [](RunConfig& c) -> double& { return c.benchmark.source.jitter_sigma; }, kNonNegative));
    t.push_back(real_key("src_density_bias", "source density bias", [](RunConfig& c) -> double& { return c.benchmark.source.density_bias; }, kNonNegative));
    t.push_back(real_key("src_occlusion", "source occlusion fraction", [](RunConfig& c) -> double& { return c.benchmark.source.occlusion_fraction; }, kOcclusion));
    t.push_back(real_key("src_aniso", "source anisotropic scale bound", [](RunConfig& c) -> double& { return c.benchmark.source.aniso_scale; }, kAtLeastOne));
    t.push_back(real_key("tgt_jitter", "target jitter sigma", [](RunConfig& c) -> double& { return c.benchmark.target.jitter_sigma; }, kNonNegative));
    t.push_back(real_key("tgt_density_bias", "target density bias", [](RunConfig& c) -> double& { return c.benchmark.target.density_bias; }, kNonNegative));
    t.push_back(real_key("tgt_occlusion", "target occlusion fraction", [](RunConfig& c) -> double& { return c.benchmark.target.occlusion_fraction; }, kOcclusion));
    t.push_back(real_key("tgt_aniso", "target anisotropic scale bound", [](RunConfig& c) -> double& { return c.benchmark.target.aniso_scale; }, kAtLeastOne));
    // Evaluation and experiments.
    t.push_back(enum_key<EvalDomain>("eval_domain", "domain evaluated by eval and ablate",
                                     [](RunConfig& c) -> EvalDomain& { return c.eval_domain; },
                                     {{"source", EvalDomain::source}, {"target", EvalDomain::target}}));
    t.push_back(enum_key<EvalSplit>("eval_split", "split evaluated by eval and ablate",
                                    [](RunConfig& c) -> EvalSplit& { return c.eval_split; },
                                    {{"train", EvalSplit::train}, {"test", EvalSplit::test}, {"all", EvalSplit::all}}));
    t.push_back(enum_key<EvalModel>("eval_model", "network evaluated",
                                    [](RunConfig& c) -> EvalModel& { return c.eval_model; },
                                    {{"student", EvalModel::student}, {"teacher", EvalModel::teacher}}));
    t.push_back(bool_key("eval_per_sample", "write per-sample P_m and Ent_m", [](RunConfig& c) -> bool& { return c.eval_per_sample; }));
    t.push_back(seed_list_key("ablate_seeds", "seeds of the ablation matrix"));
    t.push_back(int_key("theory_trials", "random joints in theory-check", [](RunConfig& c) -> int& { return c.theory_trials; }, 1));
    t.push_back(seed_key("theory_seed", "theory-check seed", [](RunConfig& c) -> std::uint64_t& { return c.theory_seed; }));
    return t;
  }();
  return table;
}

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void apply(RunConfig& config, std::vector<ConfigError>& errors, std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) {
    errors.push_back({std::string(key), std::string(value), "unknown key"});
    return;
  }
  if (auto problem = spec->parse(config, value)) {
    errors.push_back({std::string(key), std::string(value), *problem});
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    const RunConfig defaults;
    std::vector<ConfigKey> out;
    for (const auto& k : key_table()) out.push_back({k.name, k.render(defaults), k.description});
    return out;
  }();
  return keys;
}

std::string ConfigError::to_string() const {
  return fmt::format("{} = '{}': {}", key, value, message);
}

ConfigResult validate_config(std::string_view text, const ConfigOverrides& overrides) {
  ConfigResult result;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto newline = text.find('\n', start);
    std::string_view line = text.substr(start, newline == std::string_view::npos ? text.npos : newline - start);
    start = newline == std::string_view::npos ? text.size() : newline + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      result.errors.push_back({fmt::format("line {}", line_no), std::string(line), "expected key = value"});
      continue;
    }
    apply(result.config, result.errors, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [key, value] : overrides) apply(result.config, result.errors, key, trim(value));

  const RunConfig& c = result.config;
  if (c.train.variants > c.train.mining.repetitions) {
    result.errors.push_back({"V", std::to_string(c.train.variants),
                             fmt::format("V must be ≤ AT (AT = {})", c.train.mining.repetitions)});
  }
  const int train_per_class =
      static_cast<int>(std::lround(c.benchmark.train_fraction * c.benchmark.per_class));
  if (train_per_class < 1 || train_per_class >= c.benchmark.per_class) {
    result.errors.push_back({"train_fraction", fmt::format("{}", c.benchmark.train_fraction),
                             fmt::format("must leave at least one train and one test sample per class "
                                         "(per_class = {})",
                                         c.benchmark.per_class)});
  }
  result.config.train.num_classes = c.benchmark.classes;
  return result;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : key_table()) out += fmt::format("{} = {}\n", k.name, k.render(config));
  return out;
}

}  // namespace orient
