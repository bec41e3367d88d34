// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Coarse pruning of the SuperNet between epochs: blocks whose choice
// probability falls below a scheduled threshold leave their layer, and a
// shape-preserving layer about to lose its penultimate block receives a skip
// connection in its place.

#pragma once

#include <string>
#include <vector>

#include "dnas/supernet.hpp"

namespace dnas {

struct ThresholdPolicy {
  enum class Kind { kLinear, kConstant };
  Kind kind = Kind::kLinear;
  double t_initial = 0.15;
  double t_final = 0.55;
  int e_warmup = 70;
  int e_total = 200;
};

// Checks the policy against the widest layer (max_blocks = max N_l).
// Throws ConfigError.
void validate(const ThresholdPolicy& policy, std::size_t max_blocks);

// Throws ScheduleError for e outside [e_warmup, e_total].
double threshold_at(const ThresholdPolicy& policy, int epoch);

struct BlockProbability {
  int group = 0;
  double probability = 0.0;
};

// Noise-free softmax over the layer's theta; a Prunode's probability is the
// sum over its two candidates.
std::vector<BlockProbability> block_probabilities(const StochasticLayer& layer);

struct RemovedBlock {
  int layer = 0;
  std::string block;  // variant id, or "skip"
  double probability = 0.0;
};

struct PruningReport {
  std::vector<RemovedBlock> removed;
  std::vector<int> injections;  // layers that received a skip
};

// Removes blocks below `threshold` in ascending-probability order, re-normalizing
// after each removal. Never removes the last block. Returns what happened to
// this layer; `report` entries are appended.
void prune_layer(StochasticLayer& layer, double threshold, PruningReport& report);

// Keeps the highest-probability block of a multi-block layer (ties go to the
// block whose latency `cost` is lower, then to the lower group id).
void collapse_to_argmax(StochasticLayer& layer, const std::vector<double>& group_cost);

std::string block_label(const StochasticLayer& layer, int group);

}  // namespace dnas
