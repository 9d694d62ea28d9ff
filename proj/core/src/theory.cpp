#include "orient/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace orient {
namespace {

constexpr double kMassTolerance = 1e-12;

void check_distribution(std::span<const double> p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty distribution");
  double mass = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument(std::string(what) + ": entries must be finite and non-negative");
    }
    mass += x;
  }
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw std::invalid_argument(std::string(what) + ": total mass must be 1");
  }
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Entropy without re-validating, for quantities derived from a valid joint.
double entropy_unchecked(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double entropy_of(const RowMatrix& p) {
  return entropy_unchecked({p.data(), static_cast<std::size_t>(p.size())});
}

}  // namespace

DiscreteJoint::DiscreteJoint(RowMatrix probabilities) : p_(std::move(probabilities)) {
  check_distribution({p_.data(), static_cast<std::size_t>(p_.size())}, "DiscreteJoint");
}

Vector DiscreteJoint::marginal_u() const { return p_.rowwise().sum(); }
Vector DiscreteJoint::marginal_v() const { return p_.colwise().sum().transpose(); }

double entropy(std::span<const double> p) {
  check_distribution(p, "entropy");
  return entropy_unchecked(p);
}

double entropy(const Vector& p) { return entropy(as_span(p)); }

double joint_entropy(const DiscreteJoint& joint) { return entropy_of(joint.matrix()); }

double mutual_information(const DiscreteJoint& joint) {
  return entropy_unchecked(as_span(joint.marginal_u())) + entropy_unchecked(as_span(joint.marginal_v())) -
         joint_entropy(joint);
}

double mutual_information_direct(const DiscreteJoint& joint) {
  const Vector pu = joint.marginal_u();
  const Vector pv = joint.marginal_v();
  const RowMatrix& p = joint.matrix();
  double mi = 0.0;
  for (Eigen::Index u = 0; u < p.rows(); ++u) {
    for (Eigen::Index v = 0; v < p.cols(); ++v) {
      if (p(u, v) > 0.0) mi += p(u, v) * std::log(p(u, v) / (pu(u) * pv(v)));
    }
  }
  return mi;
}

DiscreteJoint augmented_joint(const DiscreteJoint& joint) {
  const Vector pv = joint.marginal_v();
  RowMatrix p(joint.u_size(), joint.v_size());
  const double uniform = 1.0 / static_cast<double>(joint.u_size());
  for (Eigen::Index u = 0; u < p.rows(); ++u) p.row(u) = uniform * pv.transpose();
  return DiscreteJoint(std::move(p));
}

double aug_entropy_gain(const DiscreteJoint& joint) {
  return joint_entropy(augmented_joint(joint)) - joint_entropy(joint);
}

double aug_entropy_gain_decomposed(const DiscreteJoint& joint) {
  return std::log(static_cast<double>(joint.u_size())) - entropy_unchecked(as_span(joint.marginal_u())) +
         mutual_information_direct(joint);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  check_distribution(p, "kl_divergence p");
  check_distribution(q, "kl_divergence q");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw std::invalid_argument("kl_divergence: q is 0 at index " + std::to_string(i) +
                                  " where p is positive");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double kl_divergence(const Vector& p, const Vector& q) { return kl_divergence(as_span(p), as_span(q)); }

DiscreteJoint sample_dirichlet_joint(Eigen::Index u_size, Eigen::Index v_size, double alpha, Rng& rng) {
  if (u_size < 1 || v_size < 1) throw std::invalid_argument("joint sizes must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("Dirichlet alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  RowMatrix p(u_size, v_size);
  double total = 0.0;
  do {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = gamma(rng);
    total = p.sum();
  } while (!(total > 0.0));
  p /= total;
  return DiscreteJoint(std::move(p));
}

TheoryReport run_theory_check(int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("theory check needs at least one trial");
  constexpr double kAlphas[] = {0.2, 0.5, 1.0, 2.0, 10.0};
  TheoryReport report;
  report.min_gain = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> size(2, 8);
  std::uniform_int_distribution<std::size_t> alpha_pick(0, std::size(kAlphas) - 1);
  for (int t = 0; t < trials; ++t) {
    TheoryTrial trial;
    trial.u_size = size(rng);
    trial.v_size = size(rng);
    trial.alpha = kAlphas[alpha_pick(rng)];
    const DiscreteJoint joint = sample_dirichlet_joint(trial.u_size, trial.v_size, trial.alpha, rng);

    const Vector pu = joint.marginal_u();
    trial.mutual_information = mutual_information_direct(joint);
    trial.u_nonuniformity = (pu.array() - 1.0 / static_cast<double>(trial.u_size)).abs().sum();
    trial.gain = aug_entropy_gain(joint);
    trial.two_path_gap = std::abs(trial.gain - aug_entropy_gain_decomposed(joint));
    const double h_u = entropy_unchecked(as_span(pu));
    const double h_v = entropy_unchecked(as_span(joint.marginal_v()));
    trial.decomposition_gap = std::abs(joint_entropy(joint) - (h_u + h_v - trial.mutual_information));

    const bool must_gain = trial.mutual_information > 1e-3 || trial.u_nonuniformity > 1e-3;
    trial.passed = trial.gain >= -1e-12 && (!must_gain || trial.gain > 1e-6) &&
                   trial.two_path_gap <= 1e-10 && trial.decomposition_gap <= 1e-10;
    if (!trial.passed) ++report.failures;
    report.min_gain = std::min(report.min_gain, trial.gain);
    report.max_two_path_gap = std::max(report.max_two_path_gap, trial.two_path_gap);
    report.max_decomposition_gap = std::max(report.max_decomposition_gap, trial.decomposition_gap);
    report.trials.push_back(trial);
  }
  return report;
}

void write_theory_json(const std::filesystem::path& path, const TheoryReport& report) {
  nlohmann::json doc;
  doc["trials"] = report.trials.size();
  doc["failures"] = report.failures;
  doc["passed"] = report.passed();
  doc["min_gain"] = report.min_gain;
  doc["max_two_path_gap"] = report.max_two_path_gap;
  doc["max_decomposition_gap"] = report.max_decomposition_gap;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : report.trials) {
    rows.push_back({{"u_size", t.u_size},
                    {"v_size", t.v_size},
                    {"alpha", t.alpha},
                    {"mutual_information", t.mutual_information},
                    {"u_nonuniformity", t.u_nonuniformity},
                    {"gain", t.gain},
                    {"two_path_gap", t.two_path_gap},
                    {"decomposition_gap", t.decomposition_gap},
                    {"passed", t.passed}});
  }
  doc["results"] = rows;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace orient
