#include "orient/losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace orient {
namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be > 0");
}

// log softmax(row / tau), max-shifted.
Vector log_softmax(const Eigen::Ref<const Vector>& logits, double tau) {
  const Vector scaled = logits / tau;
  const double shift = scaled.maxCoeff();
  const double log_z = std::log((scaled.array() - shift).exp().sum()) + shift;
  return scaled.array() - log_z;
}

struct Cosine {
  double value;
  Vector grad_a;
  Vector grad_b;
};

Cosine cosine_with_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw std::invalid_argument("cosine similarity undefined for a zero-norm feature vector");
  }
  const double c = a.dot(b) / (na * nb);
  return {c, b / (na * nb) - c * a / (na * na), a / (na * nb) - c * b / (nb * nb)};
}

void check_features(const MemberFeatures& f) {
  if (f.labels.size() != f.variants.size()) {
    throw std::invalid_argument("member labels and variant lists differ in length");
  }
  for (std::size_t i = 0; i < f.variants.size(); ++i) {
    if (f.variants[i].rows() < 1 || f.variants[i].rows() != f.variants[0].rows() ||
        f.variants[i].cols() != f.variants[0].cols()) {
      throw std::invalid_argument("member " + std::to_string(i) +
                                  " has an inconsistent variant matrix shape");
    }
  }
}

std::vector<RowMatrix> zero_grads(const MemberFeatures& f) {
  std::vector<RowMatrix> g;
  g.reserve(f.variants.size());
  for (const auto& v : f.variants) g.push_back(RowMatrix::Zero(v.rows(), v.cols()));
  return g;
}

std::map<int, std::vector<std::size_t>> group_by_class(const MemberFeatures& f) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < f.labels.size(); ++i) groups[f.labels[i]].push_back(i);
  return groups;
}

}  // namespace

void LossWeights::validate() const {
  require_positive(tau_s, "tau_s");
  require_positive(tau_t, "tau_t");
  require_positive(tau_prime, "tau_prime");
  if (!(lambda_oc >= 0.0)) throw std::invalid_argument("lambda_oc must be >= 0");
  if (!(lambda_ms >= 0.0)) throw std::invalid_argument("lambda_ms must be >= 0");
}

Vector tempered_softmax(const Eigen::Ref<const Vector>& logits, double tau) {
  require_positive(tau, "temperature");
  if (!logits.allFinite()) throw std::invalid_argument("tempered_softmax: non-finite logits");
  const Vector scaled = logits / tau;
  Vector e = (scaled.array() - scaled.maxCoeff()).exp();
  return e / e.sum();
}

LogitLoss orientation_consistency_loss(const RowMatrix& student_logits,
                                       const RowMatrix& teacher_logits, double tau_s,
                                       double tau_t) {
  require_positive(tau_s, "tau_s");
  require_positive(tau_t, "tau_t");
  if (student_logits.rows() != teacher_logits.rows() ||
      student_logits.cols() != teacher_logits.cols() || student_logits.rows() == 0) {
    throw std::invalid_argument("orientation_consistency_loss: student and teacher logits differ in shape");
  }
  const auto n = student_logits.rows();
  LogitLoss out{0.0, RowMatrix(n, student_logits.cols())};
  for (Eigen::Index m = 0; m < n; ++m) {
    const Vector target = tempered_softmax(teacher_logits.row(m).transpose(), tau_t);
    const Vector log_s = log_softmax(student_logits.row(m).transpose(), tau_s);
    out.value -= target.dot(log_s);
    // d/dp of -t.log softmax(p/tau) = (softmax(p/tau) - t) / tau, since sum(t) = 1.
    out.grad.row(m) = ((log_s.array().exp() - target.array()) / tau_s).matrix().transpose();
  }
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

FeatureLoss positive_pair_loss(const MemberFeatures& features, double tau_prime) {
  require_positive(tau_prime, "tau_prime");
  check_features(features);
  FeatureLoss out{0.0, zero_grads(features)};
  if (features.variants.empty()) return out;
  const auto v_count = static_cast<double>(features.variants[0].rows());

  const auto groups = group_by_class(features);
  int active = 0;
  for (const auto& [label, members] : groups) {
    if (members.size() >= 2) ++active;
  }
  if (active == 0) return out;

  for (const auto& [label, members] : groups) {
    if (members.size() < 2) continue;
    const double n = static_cast<double>(members.size());
    const double coeff = -1.0 / (static_cast<double>(active) * v_count * n * n * tau_prime);
    for (std::size_t i : members) {
      for (std::size_t j : members) {
        if (i == j) continue;
        const auto& zi = features.variants[i];
        const Vector zj = features.variants[j].row(0).transpose();
        for (Eigen::Index v = 0; v < zi.rows(); ++v) {
          const Cosine c = cosine_with_grad(zi.row(v).transpose(), zj);
          out.value += coeff * c.value;
          out.grads[i].row(v) += coeff * c.grad_a.transpose();
          out.grads[j].row(0) += coeff * c.grad_b.transpose();
        }
      }
    }
  }
  return out;
}

FeatureLoss negative_pair_loss(const MemberFeatures& features, double tau_prime) {
  require_positive(tau_prime, "tau_prime");
  check_features(features);
  FeatureLoss out{0.0, zero_grads(features)};
  const auto groups = group_by_class(features);
  if (groups.size() < 2) return out;

  const double k = static_cast<double>(groups.size());
  const std::size_t total = features.labels.size();
  for (const auto& [label, members] : groups) {
    const double n_pos = static_cast<double>(members.size());
    const double n_neg = static_cast<double>(total - members.size());
    const double coeff = 1.0 / (k * n_pos * n_neg * tau_prime);
    for (std::size_t i : members) {
      const Vector zi = features.variants[i].row(0).transpose();
      for (std::size_t j = 0; j < total; ++j) {
        if (features.labels[j] == label) continue;
        const Cosine c = cosine_with_grad(zi, features.variants[j].row(0).transpose());
        out.value += coeff * c.value;
        out.grads[i].row(0) += coeff * c.grad_a.transpose();
        out.grads[j].row(0) += coeff * c.grad_b.transpose();
      }
    }
  }
  return out;
}

FeatureLoss margin_separation_loss(const MemberFeatures& features, double tau_prime) {
  FeatureLoss pos = positive_pair_loss(features, tau_prime);
  const FeatureLoss neg = negative_pair_loss(features, tau_prime);
  pos.value += neg.value;
  for (std::size_t i = 0; i < pos.grads.size(); ++i) pos.grads[i] += neg.grads[i];
  return pos;
}

LogitLoss classification_loss(const RowMatrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size() || logits.rows() == 0) {
    throw std::invalid_argument("classification_loss: need one label per logit row");
  }
  const auto n = logits.rows();
  const auto k = logits.cols();
  LogitLoss out{0.0, RowMatrix(n, k)};
  for (Eigen::Index m = 0; m < n; ++m) {
    const int y = labels[static_cast<std::size_t>(m)];
    if (y < 0 || y >= k) {
      throw std::invalid_argument("classification_loss: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(k) + ")");
    }
    const Vector log_p = log_softmax(logits.row(m).transpose(), 1.0);
    out.value -= log_p(y);
    Vector g = log_p.array().exp();
    g(y) -= 1.0;
    out.grad.row(m) = g.transpose();
  }
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

double total_loss(double l_cls, double l_oc, double l_ms, const LossWeights& weights) {
  return l_cls + weights.lambda_oc * l_oc + weights.lambda_ms * l_ms;
}

}  // namespace orient
