#pragma once

#include <span>
#include <vector>

#include "orient/linalg.hpp"

namespace orient {

struct LossWeights {
  double lambda_oc = 0.01;
  double lambda_ms = 0.01;
  double tau_s = 0.5;
  double tau_t = 0.5;
  double tau_prime = 0.07;

  void validate() const;
};

/// Value of a loss over logits together with its gradient (same shape).
struct LogitLoss {
  double value = 0.0;
  RowMatrix grad;
};

/// Per-member embeddings for the margin separation terms. variants[i] holds
/// the V intricate-variant embeddings of member i, one per row; row 0 is the
/// variant that stands for the member on the partner side of a pair.
struct MemberFeatures {
  std::vector<int> labels;
  std::vector<RowMatrix> variants;
};

struct FeatureLoss {
  double value = 0.0;
  std::vector<RowMatrix> grads;  // shaped like MemberFeatures::variants
};

/// softmax(logits / tau), max-shifted.
Vector tempered_softmax(const Eigen::Ref<const Vector>& logits, double tau);

/// -(1/N) sum_m softmax(teacher_m / tau_t) . log softmax(student_m / tau_s).
/// The teacher side is a constant; the gradient is w.r.t. student logits.
LogitLoss orientation_consistency_loss(const RowMatrix& student_logits,
                                       const RowMatrix& teacher_logits, double tau_s, double tau_t);

/// Pulls same-class intricate variants together:
///   -(1/K') sum_k 1/(V n_k^2) sum_{i != j in k} sum_v cos(z_{i,v}, z_{j,0}) / tau'
/// K' counts classes with at least two members; smaller classes are skipped.
FeatureLoss positive_pair_loss(const MemberFeatures& features, double tau_prime);

/// Pushes different classes apart using each member's row-0 embedding:
///   (1/K) sum_k 1/(n_k m_k) sum_{i in k} sum_{j not in k} cos(z_i, z_j) / tau'
/// K counts classes present. Zero when only one class is present.
FeatureLoss negative_pair_loss(const MemberFeatures& features, double tau_prime);

/// positive_pair_loss + negative_pair_loss.
FeatureLoss margin_separation_loss(const MemberFeatures& features, double tau_prime);

/// Mean cross-entropy with plain softmax.
LogitLoss classification_loss(const RowMatrix& logits, std::span<const int> labels);

/// l_cls + lambda_oc * l_oc + lambda_ms * l_ms.
double total_loss(double l_cls, double l_oc, double l_ms, const LossWeights& weights);

}  // namespace orient
