// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/prunode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnas/error.hpp"

namespace dnas {

int round_to_granularity(double x, int granularity) {
  return static_cast<int>(std::round(x / granularity)) * granularity;
}

MaskState init_mask_state(int max_channels, int granularity) {
  if (granularity <= 0 || max_channels % granularity != 0) {
    throw ConfigError("prunode: granularity " + std::to_string(granularity) +
                      " must divide max_channels " + std::to_string(max_channels));
  }
  if (max_channels < 2 * granularity) {
    throw ConfigError("prunode: max_channels " + std::to_string(max_channels) +
                      " < 2 * granularity " + std::to_string(granularity));
  }
  MaskState st;
  st.max_channels = max_channels;
  st.granularity = granularity;
  st.small_mask = std::clamp(round_to_granularity(st.s * max_channels, granularity), granularity,
                             max_channels - granularity);
  st.large_mask = max_channels;
  return st;
}

MaskUpdate update_masks(const MaskState& state, double progress, double weight_signal) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw ScheduleError("prunode: progress " + std::to_string(progress) + " outside [0, 1]");
  }
  MaskUpdate out{state, false};
  if (state.frozen()) return out;

  MaskState& st = out.state;
  st.weight = weight_signal;
  st.update = st.update * st.momentum + st.weight;
  const double distance = st.max_distance * (1.0 - progress) * (1.0 - progress);
  st.s = st.s + st.update;
  if (st.s > 0) {
    st.weight = 0.0;
    out.reset_weights = true;
    st.s = std::min(st.s, 1.0 - st.c * distance);
  } else {
    st.s = 0.0;
  }
  st.l = st.s + distance;
  const int g = st.granularity;
  const int m = st.max_channels;
  st.small_mask = std::clamp(round_to_granularity(st.s * m, g), g, m - g);
  st.large_mask = std::clamp(round_to_granularity(st.l * m, g), st.small_mask + g, m);
  return out;
}

ThetaPair reset_candidate_weights(double theta_small, double theta_large) {
  const double mean = 0.5 * (theta_small + theta_large);
  return {mean, mean};
}

}  // namespace dnas
