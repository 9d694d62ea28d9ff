#pragma once

#include <cstdint>
#include <vector>

#include "orient/model.hpp"

namespace orient {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled decay, applied to weights only: w <- w * (1 - lr * decay).
  double weight_decay = 1e-4;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

/// One bias-corrected Adam step. Throws std::invalid_argument, leaving params
/// and state untouched, if any gradient entry is non-finite.
void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                 const AdamConfig& config = {});

/// lr0 * (1 + gamma * ep / ep_max)^(-beta).
double lr_schedule(int ep, int ep_max, double lr0 = 1e-3, double gamma = 10.0, double beta = 0.75);

/// teacher <- m * teacher + (1 - m) * student, element-wise.
void ema_update(ModelParams& teacher, const ModelParams& student, double momentum);

}  // namespace orient
