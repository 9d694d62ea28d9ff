#include "orient/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace orient {

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState s;
  s.first_moment.assign(params.size(), 0.0);
  s.second_moment.assign(params.size(), 0.0);
  return s;
}

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                 const AdamConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_update: parameter, gradient and state sizes differ");
  }
  if (!grads.all_finite()) throw std::invalid_argument("adam_update: non-finite gradient");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - lr * config.weight_decay;

  auto w = params.mutable_values();
  const auto g = grads.values();
  for (const auto& seg : params.segments()) {
    for (std::size_t k = seg.offset; k < seg.offset + seg.size(); ++k) {
      double& m = state.first_moment[k];
      double& v = state.second_moment[k];
      m = config.beta1 * m + (1.0 - config.beta1) * g[k];
      v = config.beta2 * v + (1.0 - config.beta2) * g[k] * g[k];
      if (!seg.is_bias && config.weight_decay != 0.0) w[k] *= decay;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double lr_schedule(int ep, int ep_max, double lr0, double gamma, double beta) {
  if (ep_max <= 0) throw std::invalid_argument("lr_schedule: ep_max must be positive");
  if (ep < 0 || ep > ep_max) {
    throw std::invalid_argument("lr_schedule: epoch " + std::to_string(ep) + " outside [0, " +
                                std::to_string(ep_max) + "]");
  }
  return lr0 * std::pow(1.0 + gamma * static_cast<double>(ep) / static_cast<double>(ep_max), -beta);
}

void ema_update(ModelParams& teacher, const ModelParams& student, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw std::invalid_argument("ema_update: momentum must lie in [0, 1]");
  }
  if (teacher.size() != student.size()) {
    throw std::invalid_argument("ema_update: teacher and student shapes differ");
  }
  auto t = teacher.mutable_values();
  const auto s = student.values();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = momentum * t[k] + (1.0 - momentum) * s[k];
}

}  // namespace orient
