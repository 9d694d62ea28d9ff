#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "orient/linalg.hpp"
#include "orient/rng.hpp"

namespace orient {

// All logarithms are natural. U stands for the orientation variable (rows)
// and V for the orientation-independent content (columns); a continuous
// rotation domain is modelled by a finite alphabet for U.

/// Non-negative |U| x |V| matrix with total mass 1 within 1e-12.
class DiscreteJoint {
 public:
  explicit DiscreteJoint(RowMatrix probabilities);

  const RowMatrix& matrix() const { return p_; }
  Eigen::Index u_size() const { return p_.rows(); }
  Eigen::Index v_size() const { return p_.cols(); }
  Vector marginal_u() const;
  Vector marginal_v() const;

 private:
  RowMatrix p_;
};

/// -sum p log p with 0 log 0 = 0. Throws on a negative entry or mass != 1.
double entropy(std::span<const double> p);
double entropy(const Vector& p);
double joint_entropy(const DiscreteJoint& joint);

/// H(U) + H(V) - H(U, V).
double mutual_information(const DiscreteJoint& joint);
/// sum p log(p / (p_u p_v)), the direct form.
double mutual_information_direct(const DiscreteJoint& joint);

/// uniform(U) x marginal_V: the distribution after uniform rotation augmentation.
DiscreteJoint augmented_joint(const DiscreteJoint& joint);

/// H(X_a) - H(X_s), computed from the two joint entropies.
double aug_entropy_gain(const DiscreteJoint& joint);
/// [log |U| - H(U)] + I(U; V), the closed form of the same quantity.
double aug_entropy_gain_decomposed(const DiscreteJoint& joint);

/// sum p log(p / q). Throws when q is 0 where p is positive.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const Vector& p, const Vector& q);

/// Joint drawn from a symmetric Dirichlet(alpha) over all cells.
DiscreteJoint sample_dirichlet_joint(Eigen::Index u_size, Eigen::Index v_size, double alpha, Rng& rng);

struct TheoryTrial {
  Eigen::Index u_size = 0;
  Eigen::Index v_size = 0;
  double alpha = 0.0;
  double mutual_information = 0.0;
  double u_nonuniformity = 0.0;  // L1 distance of p(U) from uniform
  double gain = 0.0;
  double two_path_gap = 0.0;       // |gain - decomposed gain|
  double decomposition_gap = 0.0;  // |H(X) - (H(U) + H(V) - I_direct)|
  bool passed = false;
};

struct TheoryReport {
  std::vector<TheoryTrial> trials;
  std::size_t failures = 0;
  double min_gain = 0.0;
  double max_two_path_gap = 0.0;
  double max_decomposition_gap = 0.0;

  bool passed() const { return failures == 0; }
};

/// Random Dirichlet joints of random size. A trial passes when the gain is
/// >= -1e-12, exceeds 1e-6 whenever I(U;V) > 1e-3 or p(U) is more than 1e-3
/// (L1) from uniform, and both identities hold within 1e-10.
TheoryReport run_theory_check(int trials, std::uint64_t seed);

void write_theory_json(const std::filesystem::path& path, const TheoryReport& report);

}  // namespace orient
