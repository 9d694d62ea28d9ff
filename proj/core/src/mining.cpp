#include "orient/mining.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "orient/errors.hpp"
#include "orient/losses.hpp"
#include "orient/parallel.hpp"

namespace orient {
namespace {

PointCloud rotated(const PointCloud& cloud, const EulerAngles& angles) {
  return apply_rotation(compose_euler(angles), cloud);
}

}  // namespace

void MiningConfig::validate() const {
  if (repetitions < 1) throw std::invalid_argument("mining repetitions (AT) must be >= 1");
  if (steps < 0) throw std::invalid_argument("mining steps must be >= 0");
  if (!(step_size > 0.0)) throw std::invalid_argument("mining step_size must be > 0");
  if (refresh_period < 1) throw std::invalid_argument("refresh period T must be >= 1");
}

double rotated_loss(const ModelParams& model, const PointCloud& cloud, int label,
                    const EulerAngles& angles) {
  const PointCloud view = rotated(cloud, angles);
  const auto out = forward(model, std::span(&view, 1), 1, CacheMode::discard);
  const int labels[] = {label};
  return classification_loss(out.logits, labels).value;
}

RotatedLossGrad rotated_loss_grad(const ModelParams& model, const PointCloud& cloud, int label,
                                  const EulerAngles& angles) {
  const PointCloud view = rotated(cloud, angles);
  const auto out = forward(model, std::span(&view, 1));
  const int labels[] = {label};
  const LogitLoss ce = classification_loss(out.logits, labels);
  RotatedLossGrad result;
  result.loss = ce.value;
  if (!std::isfinite(ce.value)) return result;
  const Gradients g = backward(model, out.cache, ce.grad, RowMatrix());
  result.grad = grad_euler(angles, cloud.points, g.points[0]);
  return result;
}

MinedOrientation mine_orientation(const ModelParams& model, const PointCloud& cloud, int label,
                                  const EulerAngles& init, const MiningConfig& config) {
  config.validate();
  MinedOrientation best{init, 0.0, 0.0};
  EulerAngles current = wrap_angles(init);
  bool have_best = false;

  for (int step = 0;; ++step) {
    const bool last = step == config.steps;
    RotatedLossGrad eval;
    if (last) {
      eval.loss = rotated_loss(model, cloud, label, current);
    } else {
      eval = rotated_loss_grad(model, cloud, label, current);
    }
    if (step == 0) best.initial_loss = eval.loss;
    if (!std::isfinite(eval.loss)) break;
    if (!have_best || eval.loss > best.loss) {
      best.angles = current;
      best.loss = eval.loss;
      have_best = true;
    }
    if (last) break;

    const double scale = std::max({std::abs(eval.grad[0]), std::abs(eval.grad[1]),
                                   std::abs(eval.grad[2])});
    if (!(scale > 0.0) || !std::isfinite(scale)) break;
    const double k = config.step_size / scale;
    current = wrap_angles({current.theta_x + k * eval.grad[0], current.theta_y + k * eval.grad[1],
                           current.theta_z + k * eval.grad[2]});
  }
  if (!have_best) best.angles = init;
  return best;
}

void IntricateSet::set(SampleId id, std::vector<EulerAngles> entries) {
  entries_[id] = std::move(entries);
}

const std::vector<EulerAngles>& IntricateSet::at(SampleId id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw not_found("intricate set has no entries for sample " + std::to_string(id));
  }
  return it->second;
}

std::size_t IntricateSet::entry_count() const {
  std::size_t n = 0;
  for (const auto& [id, list] : entries_) n += list.size();
  return n;
}

IntricateSet build_intricate_set(const ModelParams& model, std::span<const PointCloud> dataset,
                                 const MiningConfig& config, std::uint64_t seed, int workers,
                                 int refresh_epoch) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("build_intricate_set: dataset is empty");

  const auto reps = static_cast<std::size_t>(config.repetitions);
  std::vector<EulerAngles> results(dataset.size() * reps);
  parallel_for(results.size(), workers, [&](std::size_t task) {
    const PointCloud& cloud = dataset[task / reps];
    const std::size_t rep = task % reps;
    Rng rng = make_stream(seed, {stream::kMining, cloud.id, rep});
    const EulerAngles init{uniform_angle(rng), uniform_angle(rng), uniform_angle(rng)};
    if (config.steps == 0) {
      results[task] = init;
      return;
    }
    try {
      results[task] = mine_orientation(model, cloud, cloud.label, init, config).angles;
    } catch (const std::exception& e) {
      spdlog::warn("mining failed for sample {} repetition {}: {}; keeping random start", cloud.id,
                   rep, e.what());
      results[task] = init;
    }
  });

  IntricateSet set(refresh_epoch);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    set.set(dataset[i].id, std::vector<EulerAngles>(results.begin() + static_cast<long>(i * reps),
                                                    results.begin() + static_cast<long>((i + 1) * reps)));
  }
  return set;
}

std::vector<EulerAngles> sample_intricate(const IntricateSet& set, SampleId id, int count, Rng& rng) {
  const auto& entries = set.at(id);
  if (count < 1 || static_cast<std::size_t>(count) > entries.size()) {
    throw std::invalid_argument("sample_intricate: requested " + std::to_string(count) +
                                " variants but sample " + std::to_string(id) + " holds " +
                                std::to_string(entries.size()));
  }
  // Partial Fisher-Yates over the index list.
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<EulerAngles> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < static_cast<std::size_t>(count); ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
    out.push_back(entries[idx[k]]);
  }
  return out;
}

void write_intricate_csv(const std::filesystem::path& path, const IntricateSet& set) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,rep,theta_x,theta_y,theta_z\n";
  for (const auto& [id, list] : set.entries()) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      out << fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", id, r, list[r].theta_x,
                         list[r].theta_y, list[r].theta_z);
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

IntricateSet read_intricate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "id,rep,theta_x,theta_y,theta_z") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::map<SampleId, std::vector<EulerAngles>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    try {
      if (f.size() != 5) throw std::invalid_argument("expected 5 fields");
      const SampleId id = std::stoull(f[0]);
      const std::size_t rep = std::stoull(f[1]);
      auto& list = rows[id];
      if (rep != list.size()) throw std::invalid_argument("repetitions out of order");
      list.push_back({std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  IntricateSet set;
  for (auto& [id, list] : rows) set.set(id, std::move(list));
  return set;
}

}  // namespace orient
