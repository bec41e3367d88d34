// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/optim.hpp"

#include <cmath>

namespace dnas {

ParamSlot ParamSlot::clone() const {
  ParamSlot copy(value.clone());
  copy.first_moment = first_moment;
  copy.second_moment = second_moment;
  copy.steps = steps;
  return copy;
}

void adam_step(ParamSlot& slot, const AdamSettings& s) {
  const auto grad = slot.value.grad();
  if (grad.empty()) return;
  auto values = slot.value.mutable_values();
  slot.first_moment.resize(values.size(), 0.0);
  slot.second_moment.resize(values.size(), 0.0);
  ++slot.steps;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(slot.steps));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(slot.steps));
  for (std::size_t i = 0; i < values.size(); ++i) {
    double& m = slot.first_moment[i];
    double& v = slot.second_moment[i];
    m = s.beta1 * m + (1.0 - s.beta1) * grad[i];
    v = s.beta2 * v + (1.0 - s.beta2) * grad[i] * grad[i];
    values[i] -= s.lr * (m / c1) / (std::sqrt(v / c2) + s.eps);
  }
}

void rmsprop_step(ParamSlot& slot, const RmspropSettings& s) {
  const auto grad = slot.value.grad();
  if (grad.empty()) return;
  auto values = slot.value.mutable_values();
  slot.second_moment.resize(values.size(), 0.0);
  ++slot.steps;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double& v = slot.second_moment[i];
    v = s.decay * v + (1.0 - s.decay) * grad[i] * grad[i];
    values[i] -= s.lr * grad[i] / (std::sqrt(v) + s.eps);
  }
}

}  // namespace dnas
