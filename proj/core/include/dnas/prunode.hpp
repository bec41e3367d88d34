// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Prunode: two shared-weight copies of one block that differ only in a
// channel mask over the inner hidden dimension. The masks walk toward the
// preferred width and close in on each other as the search progresses, so
// every hidden width is searchable while only two candidates are ever live.

#pragma once

namespace dnas {

struct MaskState {
  double weight = 0.0;  // last preference signal applied (0 after a reset)
  double update = 0.0;  // momentum accumulator
  double s = 0.5;       // small-mask fraction of max_channels
  double l = 1.0;       // large-mask fraction of max_channels
  int max_channels = 0;
  int granularity = 0;
  int small_mask = 0;
  int large_mask = 0;
  double c = 0.8;
  double max_distance = 0.6;
  double momentum = 0.4;

  // (l - s) * max_channels <= granularity: the masks are adjacent choices.
  bool frozen() const { return (l - s) * max_channels <= granularity; }
};

struct MaskUpdate {
  MaskState state;
  // The caller must equalize the two candidates' architecture weights.
  bool reset_weights = false;
};

// Nearest multiple of `granularity`, ties away from zero.
int round_to_granularity(double x, int granularity);

// Throws ConfigError unless granularity divides max_channels and
// max_channels >= 2 * granularity.
MaskState init_mask_state(int max_channels, int granularity);

// One step of the mask walk, called after each architecture-weight update with
// progress in [0, 1]. A frozen state is returned unchanged.
MaskUpdate update_masks(const MaskState& state, double progress, double weight_signal);

// Positive means the larger mask is preferred.
inline double weight_signal(double theta_small, double theta_large) {
  return theta_large - theta_small;
}

struct ThetaPair {
  double small;
  double large;
};

// Both weights become their mean.
ThetaPair reset_candidate_weights(double theta_small, double theta_large);

}  // namespace dnas
