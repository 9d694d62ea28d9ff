#include "orient/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "orient/parallel.hpp"

namespace orient {
namespace {

void check_probability_rows(const RowMatrix& p) {
  if (p.rows() == 0 || p.cols() == 0) throw std::invalid_argument("empty probability matrix");
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if (!p.row(r).allFinite() || p.row(r).minCoeff() < 0.0 || std::abs(p.row(r).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("row " + std::to_string(r) + " is not a probability vector");
    }
  }
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::RowVectorXd e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
    p.row(r) = e / e.sum();
  }
  return p;
}

}  // namespace

std::vector<EulerAngles> test_rotation_series() {
  constexpr double pi = std::numbers::pi;
  const double grid[] = {pi / 2.0, pi, 3.0 * pi / 2.0, 2.0 * pi};
  std::vector<EulerAngles> series;
  series.reserve(kSeriesLength);
  for (double x : grid) {
    for (double y : grid) {
      for (double z : grid) series.push_back(wrap_angles({x, y, z}));
    }
  }
  return series;
}

std::vector<int> argmax_rows(const RowMatrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double micro_accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("micro_accuracy: need matching, non-empty prediction and label lists");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double macro_precision(std::span<const int> predicted, std::span<const int> labels, int num_classes) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("macro_precision: need matching, non-empty prediction and label lists");
  }
  std::vector<long> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> pp(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predicted[i];
    if (p < 0 || p >= num_classes) throw std::invalid_argument("prediction outside class range");
    pp[static_cast<std::size_t>(p)] += 1;
    if (p == labels[i]) tp[static_cast<std::size_t>(p)] += 1;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    if (pp[k] > 0) sum += static_cast<double>(tp[k]) / static_cast<double>(pp[k]);
  }
  return sum / static_cast<double>(num_classes);
}

double sample_consistency(const RowMatrix& probabilities) {
  check_probability_rows(probabilities);
  const Eigen::RowVectorXd mean = probabilities.colwise().mean();
  double total = 0.0;
  for (Eigen::Index a = 0; a < probabilities.rows(); ++a) {
    for (Eigen::Index k = 0; k < probabilities.cols(); ++k) {
      const double p = probabilities(a, k);
      if (p > 0.0) total += p * std::log(p / mean(k));
    }
  }
  return total / static_cast<double>(probabilities.rows());
}

double consistency_metric(std::span<const RowMatrix> per_sample) {
  if (per_sample.empty()) throw std::invalid_argument("consistency_metric: no samples");
  double total = 0.0;
  for (const auto& p : per_sample) total += sample_consistency(p);
  return total / static_cast<double>(per_sample.size());
}

EntropyMap entropy_map(const RowMatrix& probabilities) {
  check_probability_rows(probabilities);
  EntropyMap m;
  m.mean_probability = probabilities.colwise().mean().transpose();
  m.entropy = Vector::Zero(probabilities.cols());
  for (Eigen::Index k = 0; k < probabilities.cols(); ++k) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < probabilities.rows(); ++a) {
      s += xlogy(probabilities(a, k), probabilities(a, k));
    }
    m.entropy(k) = s / static_cast<double>(probabilities.rows());
  }
  return m;
}

EvalReport evaluate_predictor(const Predictor& predict, std::span<const PointCloud> dataset,
                              int num_classes, const EvalOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  if (num_classes < 2) throw std::invalid_argument("evaluate: need at least two classes");
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& c : dataset) {
    if (c.label < 0 || c.label >= num_classes) {
      throw std::invalid_argument("evaluate: label " + std::to_string(c.label) + " of sample " +
                                  std::to_string(c.id) + " is outside the class range");
    }
    labels.push_back(c.label);
  }

  const auto series = test_rotation_series();
  std::vector<RowMatrix> probs(series.size());
  parallel_for(series.size(), options.workers, [&](std::size_t s) {
    const Mat3 m = compose_euler(series[s]);
    std::vector<PointCloud> rotated;
    rotated.reserve(dataset.size());
    for (const auto& c : dataset) rotated.push_back(apply_rotation(m, c));
    probs[s] = predict(rotated);
    if (probs[s].rows() != static_cast<Eigen::Index>(dataset.size()) || probs[s].cols() != num_classes) {
      throw std::invalid_argument("evaluate: predictor returned a matrix of the wrong shape");
    }
  });

  EvalReport report;
  report.num_classes = num_classes;
  std::vector<double> accs, avgs;
  std::size_t identity_index = series.size() - 1;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto pred = argmax_rows(probs[s]);
    SeriesMetrics m{series[s], micro_accuracy(pred, labels), macro_precision(pred, labels, num_classes)};
    accs.push_back(m.acc);
    avgs.push_back(m.avg);
    report.series.push_back(m);
    if (series[s] == EulerAngles{}) identity_index = s;
  }
  std::tie(report.acc_mean, report.acc_std) = mean_std(accs);
  std::tie(report.avg_mean, report.avg_std) = mean_std(avgs);

  report.confusion.assign(static_cast<std::size_t>(num_classes),
                          std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  const auto identity_pred = argmax_rows(probs[identity_index]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    report.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(identity_pred[i])] += 1;
  }

  // Regroup into one series x class matrix per sample.
  std::vector<RowMatrix> per_sample(dataset.size(), RowMatrix(static_cast<Eigen::Index>(series.size()), num_classes));
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      per_sample[i].row(static_cast<Eigen::Index>(s)) = probs[s].row(static_cast<Eigen::Index>(i));
    }
  }
  report.cst = consistency_metric(per_sample);
  if (options.per_sample_maps) {
    for (const auto& p : per_sample) report.per_sample.push_back(entropy_map(p));
  }
  return report;
}

EvalReport evaluate(const ModelParams& model, std::span<const PointCloud> dataset,
                    const EvalOptions& options) {
  const Predictor predict = [&model](std::span<const PointCloud> batch) {
    return softmax_rows(forward(model, batch, 1, CacheMode::discard).logits);
  };
  return evaluate_predictor(predict, dataset, model.num_classes(), options);
}

double median_pairwise_distance(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (d.empty()) return 0.0;
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(mid), d.end());
  if (d.size() % 2 == 1) return d[mid];
  const double upper = d[mid];
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<long>(mid));
  return 0.5 * (lower + upper);
}

double mmd2(const RowMatrix& a, const RowMatrix& b, std::optional<double> bandwidth) {
  if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("mmd2: each set needs at least two rows");
  if (a.cols() != b.cols()) throw std::invalid_argument("mmd2: feature dimensions differ");
  double s = bandwidth ? *bandwidth : median_pairwise_distance(a, b);
  if (bandwidth && !(s > 0.0)) throw std::invalid_argument("mmd2: bandwidth must be > 0");
  if (!(s > 0.0)) s = 1.0;
  const double inv = 1.0 / (2.0 * s * s);
  auto kernel_sum = [inv](const RowMatrix& x, const RowMatrix& y, bool skip_diagonal) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        if (skip_diagonal && i == j) continue;
        total += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv);
      }
    }
    return total;
  };
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  return kernel_sum(a, a, true) / (m * (m - 1.0)) + kernel_sum(b, b, true) / (n * (n - 1.0)) -
         2.0 * kernel_sum(a, b, false) / (m * n);
}

void write_metrics_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json doc;
  doc["acc_mean"] = report.acc_mean;
  doc["acc_std"] = report.acc_std;
  doc["avg_mean"] = report.avg_mean;
  doc["avg_std"] = report.avg_std;
  doc["cst"] = report.cst;
  doc["num_classes"] = report.num_classes;
  nlohmann::json series = nlohmann::json::array();
  std::vector<double> acc, avg;
  for (const auto& s : report.series) {
    series.push_back({s.angles.theta_x, s.angles.theta_y, s.angles.theta_z});
    acc.push_back(s.acc);
    avg.push_back(s.avg);
  }
  doc["series_angles"] = series;
  doc["series_acc"] = acc;
  doc["series_avg"] = avg;
  doc["confusion"] = report.confusion;
  if (!report.per_sample.empty()) {
    nlohmann::json maps = nlohmann::json::array();
    for (const auto& m : report.per_sample) {
      maps.push_back({{"p_m", std::vector<double>(m.mean_probability.begin(), m.mean_probability.end())},
                      {"ent_m", std::vector<double>(m.entropy.begin(), m.entropy.end())}});
    }
    doc["per_sample"] = maps;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_series_csv(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "theta_x,theta_y,theta_z,acc,avg\n";
  for (const auto& s : report.series) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.angles.theta_x,
                       s.angles.theta_y, s.angles.theta_z, s.acc, s.avg);
  }
}

}  // namespace orient
