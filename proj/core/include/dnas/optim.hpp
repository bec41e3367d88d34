// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas {

// A trainable leaf plus the optimizer moments that travel with it. Keeping the
// moments next to the tensor lets a SuperNet be cloned (warmup checkpoints)
// without re-keying optimizer state.
struct ParamSlot {
  Tensor value;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t steps = 0;

  ParamSlot() = default;
  explicit ParamSlot(Tensor t) : value(std::move(t)) {}

  ParamSlot clone() const;
};

struct AdamSettings {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct RmspropSettings {
  double lr = 0.002;
  double decay = 0.99;
  double eps = 1e-8;
};

// Both steps are no-ops for a slot whose tensor holds no gradient.
void adam_step(ParamSlot& slot, const AdamSettings& settings);
void rmsprop_step(ParamSlot& slot, const RmspropSettings& settings);

}  // namespace dnas
