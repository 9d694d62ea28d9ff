#include "orient/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "orient/errors.hpp"
#include "orient/optim.hpp"
#include "orient/rng.hpp"

namespace orient {
namespace {

void check_dataset(const TrainConfig& config, std::span<const PointCloud> dataset) {
  if (dataset.size() < static_cast<std::size_t>(config.batch_size)) {
    throw std::invalid_argument(fmt::format("train: dataset has {} samples, fewer than batch_size {}",
                                            dataset.size(), config.batch_size));
  }
  std::set<SampleId> ids;
  std::vector<std::size_t> per_class(static_cast<std::size_t>(config.num_classes), 0);
  for (const auto& cloud : dataset) {
    validate_cloud(cloud);
    if (cloud.label < 0 || cloud.label >= config.num_classes) {
      throw std::invalid_argument(fmt::format("train: sample {} has label {} outside [0, {})",
                                              cloud.id, cloud.label, config.num_classes));
    }
    if (!ids.insert(cloud.id).second) {
      throw std::invalid_argument(fmt::format("train: duplicate sample id {}", cloud.id));
    }
    per_class[static_cast<std::size_t>(cloud.label)] += 1;
  }
  const auto present = std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n > 0; });
  if (present < 2) throw std::invalid_argument("train: dataset needs at least two classes");
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    if (per_class[k] == 0) spdlog::warn("train: class {} has no samples", k);
  }
}

// Views of one batch laid out in a single forward pass:
// [originals (when the student needs them)] [consistency view] [variant 0] ... [variant V-1].
struct BatchLayout {
  Eigen::Index batch = 0;
  Eigen::Index originals = -1;  // -1 when absent
  Eigen::Index pair = 0;
  Eigen::Index variants = 0;
  Eigen::Index total = 0;

  Eigen::Index variant_row(int v, Eigen::Index member) const { return variants + v * batch + member; }
};

struct BatchStep {
  BatchReport report;
};

BatchStep train_batch(const TrainConfig& config, std::span<const PointCloud> dataset,
                      std::span<const std::size_t> members, const IntricateSet& intricate, int epoch,
                      int batch_index, double lr, ModelParams& student, ModelParams& teacher,
                      AdamState& adam) {
  const auto B = static_cast<Eigen::Index>(members.size());
  const int V = config.variants;
  const bool student_on_original = config.oc_target == OcTarget::teacher_on_intricate;

  BatchLayout layout;
  layout.batch = B;
  Eigen::Index next = 0;
  if (student_on_original) {
    layout.originals = 0;
    next = B;
  }
  layout.pair = next;
  layout.variants = next + B;
  layout.total = layout.variants + V * B;

  std::vector<PointCloud> views(static_cast<std::size_t>(layout.total));
  std::vector<PointCloud> teacher_views(static_cast<std::size_t>(B));
  std::vector<int> labels(static_cast<std::size_t>(B));
  for (Eigen::Index i = 0; i < B; ++i) {
    const PointCloud& cloud = dataset[members[static_cast<std::size_t>(i)]];
    labels[static_cast<std::size_t>(i)] = cloud.label;
    Rng rng = make_stream(config.seed, {stream::kBatch, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(batch_index), cloud.id});
    const auto& entries = intricate.at(cloud.id);
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    const EulerAngles pair_angles = entries[pick(rng)];
    const auto variant_angles = sample_intricate(intricate, cloud.id, V, rng);

    const PointCloud pair_view = apply_rotation(compose_euler(pair_angles), cloud);
    if (student_on_original) {
      views[static_cast<std::size_t>(layout.originals + i)] = cloud;
      teacher_views[static_cast<std::size_t>(i)] = pair_view;
    } else {
      teacher_views[static_cast<std::size_t>(i)] = cloud;
    }
    views[static_cast<std::size_t>(layout.pair + i)] = pair_view;
    for (int v = 0; v < V; ++v) {
      views[static_cast<std::size_t>(layout.variant_row(v, i))] =
          apply_rotation(compose_euler(variant_angles[static_cast<std::size_t>(v)]), cloud);
    }
  }

  const ForwardOutput out = forward(student, views, config.workers);
  const RowMatrix teacher_logits =
      forward(teacher, teacher_views, config.workers, CacheMode::discard).logits;
  if (!out.logits.allFinite() || !out.features.allFinite() || !teacher_logits.allFinite()) {
    throw numeric_divergence(
        fmt::format("non-finite network output at epoch {} batch {}", epoch, batch_index));
  }

  // Classification on every intricate view: the consistency view and the V variants.
  const Eigen::Index cls_rows = (V + 1) * B;
  std::vector<int> cls_labels(static_cast<std::size_t>(cls_rows));
  for (Eigen::Index r = 0; r < cls_rows; ++r) {
    cls_labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(r % B)];
  }
  const LogitLoss cls = classification_loss(out.logits.middleRows(layout.pair, cls_rows), cls_labels);

  const Eigen::Index student_oc_rows = student_on_original ? layout.originals : layout.pair;
  const LogitLoss oc = orientation_consistency_loss(out.logits.middleRows(student_oc_rows, B),
                                                    teacher_logits, config.weights.tau_s,
                                                    config.weights.tau_t);

  MemberFeatures members_features;
  members_features.labels = labels;
  members_features.variants.resize(static_cast<std::size_t>(B));
  for (Eigen::Index i = 0; i < B; ++i) {
    RowMatrix z(V, kFeatureDim);
    for (int v = 0; v < V; ++v) z.row(v) = out.features.row(layout.variant_row(v, i));
    members_features.variants[static_cast<std::size_t>(i)] = std::move(z);
  }
  const FeatureLoss ms = margin_separation_loss(members_features, config.weights.tau_prime);

  BatchStep step;
  step.report = {epoch, batch_index, cls.value, oc.value, ms.value,
                 total_loss(cls.value, oc.value, ms.value, config.weights)};
  if (!std::isfinite(step.report.l_final)) {
    throw numeric_divergence(fmt::format(
        "non-finite loss at epoch {} batch {} (l_cls={}, l_oc={}, l_ms={})", epoch, batch_index,
        cls.value, oc.value, ms.value));
  }

  RowMatrix dlogits = RowMatrix::Zero(layout.total, student.num_classes());
  dlogits.middleRows(layout.pair, cls_rows) = cls.grad;
  dlogits.middleRows(student_oc_rows, B) += config.weights.lambda_oc * oc.grad;
  RowMatrix dfeatures = RowMatrix::Zero(layout.total, kFeatureDim);
  for (Eigen::Index i = 0; i < B; ++i) {
    const RowMatrix& g = ms.grads[static_cast<std::size_t>(i)];
    for (int v = 0; v < V; ++v) {
      dfeatures.row(layout.variant_row(v, i)) = config.weights.lambda_ms * g.row(v);
    }
  }

  const Gradients grads = backward(student, out.cache, dlogits, dfeatures, config.workers);
  AdamConfig adam_config;
  adam_config.weight_decay = config.weight_decay;
  try {
    adam_update(student, grads.params, adam, lr, adam_config);
  } catch (const std::invalid_argument&) {
    throw numeric_divergence(
        fmt::format("non-finite gradient at epoch {} batch {}", epoch, batch_index));
  }
  ema_update(teacher, student, config.ema_momentum);
  return step;
}

}  // namespace

std::string_view oc_target_name(OcTarget target) {
  switch (target) {
    case OcTarget::teacher_on_intricate:
      return "teacher_on_intricate";
    case OcTarget::teacher_on_original:
      return "teacher_on_original";
  }
  throw std::invalid_argument("unknown OcTarget");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw std::invalid_argument("lr0 must be > 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be >= 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw std::invalid_argument("weight_decay must be >= 0");
  }
  if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) {
    throw std::invalid_argument("ema_momentum must lie in [0, 1]");
  }
  mining.validate();
  weights.validate();
  if (variants < 1) throw std::invalid_argument("V must be >= 1");
  if (variants > mining.repetitions) throw std::invalid_argument("V must be <= AT");
}

TrainResult train(const TrainConfig& config, std::span<const PointCloud> dataset,
                  const TrainCallbacks& callbacks) {
  config.validate();
  check_dataset(config, dataset);

  ModelParams student = init_params(derive_seed(config.seed, {stream::kInit}), config.num_classes);
  ModelParams teacher = student;
  AdamState adam = AdamState::zeros_like(student);
  TrainLog log;
  IntricateSet intricate;

  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches = dataset.size() / batch_size;
  std::vector<std::size_t> order(dataset.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.refreshed = epoch % config.mining.refresh_period == 0;
    if (record.refreshed) {
      const ModelParams frozen = student;
      intricate = build_intricate_set(frozen, dataset, config.mining,
                                      derive_seed(config.seed, {stream::kRefresh, static_cast<std::uint64_t>(epoch)}),
                                      config.workers, epoch);
    }
    record.lr = lr_schedule(epoch, config.epochs, config.lr0, config.gamma, config.beta);

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_stream(config.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }

    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> members(order.data() + b * batch_size, batch_size);
      const BatchStep step = train_batch(config, dataset, members, intricate, epoch, static_cast<int>(b),
                                         record.lr, student, teacher, adam);
      record.l_cls += step.report.l_cls;
      record.l_oc += step.report.l_oc;
      record.l_ms += step.report.l_ms;
      record.l_final += step.report.l_final;
      if (callbacks.on_batch) callbacks.on_batch(step.report, student, teacher);
    }
    const double n = static_cast<double>(batches);
    record.l_cls /= n;
    record.l_oc /= n;
    record.l_ms /= n;
    record.l_final /= n;
    log.epochs.push_back(record);
    spdlog::info("epoch {}/{}: l_final={:.6f} l_cls={:.6f} l_oc={:.6f} l_ms={:.6f} lr={:.6g}{}",
                 epoch + 1, config.epochs, record.l_final, record.l_cls, record.l_oc, record.l_ms,
                 record.lr, record.refreshed ? " (refreshed)" : "");
    if (callbacks.on_epoch) callbacks.on_epoch(record, student, teacher);
  }
  return {std::move(student), std::move(teacher), std::move(log)};
}

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,l_cls,l_oc,l_ms,l_final,lr,refreshed\n";
  for (const auto& r : log.epochs) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.epoch, r.l_cls, r.l_oc,
                       r.l_ms, r.l_final, r.lr, r.refreshed ? 1 : 0);
  }
}

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::baseline:
      return "baseline";
    case Variant::iom_only:
      return "V1";
    case Variant::iom_oc:
      return "V2";
    case Variant::iom_ms:
      return "V3";
    case Variant::random_oc_ms:
      return "V4";
    case Variant::full:
      return "full";
  }
  throw std::invalid_argument("unknown Variant");
}

TrainConfig configure_variant(TrainConfig config, Variant variant) {
  constexpr int kDefaultSteps = 20;
  const int mined_steps = config.mining.steps > 0 ? config.mining.steps : kDefaultSteps;
  const double lambda_oc = config.weights.lambda_oc;
  const double lambda_ms = config.weights.lambda_ms;
  auto set = [&](bool mined, bool oc, bool ms) {
    config.mining.steps = mined ? mined_steps : 0;
    config.weights.lambda_oc = oc ? lambda_oc : 0.0;
    config.weights.lambda_ms = ms ? lambda_ms : 0.0;
  };
  switch (variant) {
    case Variant::baseline:
      set(false, false, false);
      break;
    case Variant::iom_only:
      set(true, false, false);
      break;
    case Variant::iom_oc:
      set(true, true, false);
      break;
    case Variant::iom_ms:
      set(true, false, true);
      break;
    case Variant::random_oc_ms:
      set(false, true, true);
      break;
    case Variant::full:
      set(true, true, true);
      break;
  }
  return config;
}

std::vector<AblationRow> run_ablation_matrix(const TrainConfig& config,
                                             std::span<const PointCloud> train_set,
                                             std::span<const PointCloud> eval_set,
                                             const AblationOptions& options) {
  if (options.seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  if (eval_set.empty()) throw std::invalid_argument("ablation: evaluation set is empty");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : options.seeds) {
    for (Variant variant : kAllVariants) {
      TrainConfig cfg = configure_variant(config, variant);
      cfg.seed = seed;
      spdlog::info("ablation: seed {} variant {}", seed, variant_name(variant));
      const TrainResult result = train(cfg, train_set);
      const EvalReport report =
          evaluate(options.evaluate_teacher ? result.teacher : result.student, eval_set, options.eval);
      rows.push_back({seed, variant, report.acc_mean, report.acc_std, report.avg_mean,
                      report.avg_std, report.cst});
    }
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "seed,variant,acc_mean,acc_std,avg_mean,avg_std,cst\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.seed,
                       variant_name(r.variant), r.acc_mean, r.acc_std, r.avg_mean, r.avg_std, r.cst);
  }
}

}  // namespace orient
