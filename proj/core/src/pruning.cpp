// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dnas/error.hpp"

namespace dnas {

void validate(const ThresholdPolicy& p, std::size_t max_blocks) {
  if (p.e_warmup < 0) throw ConfigError("threshold: warmup epochs must be non-negative");
  if (p.e_warmup >= p.e_total) {
    throw ConfigError("threshold: warmup epochs (" + std::to_string(p.e_warmup) +
                      ") must be below total epochs (" + std::to_string(p.e_total) + ")");
  }
  if (max_blocks > 0 && p.t_initial > 1.0 / static_cast<double>(max_blocks) + 1e-12) {
    throw ConfigError("threshold: initial value " + std::to_string(p.t_initial) +
                      " exceeds 1/max(N_l) = " + std::to_string(1.0 / max_blocks));
  }
  if (p.kind == ThresholdPolicy::Kind::kLinear && p.t_final < 0.5) {
    throw ConfigError("threshold: final value " + std::to_string(p.t_final) +
                      " is below 0.5, layers would not reduce to one block");
  }
}

double threshold_at(const ThresholdPolicy& p, int epoch) {
  if (epoch < p.e_warmup) {
    throw ScheduleError("threshold requested for warmup epoch " + std::to_string(epoch));
  }
  if (epoch > p.e_total) {
    throw ScheduleError("threshold requested past the last epoch " + std::to_string(epoch));
  }
  if (p.kind == ThresholdPolicy::Kind::kConstant) return p.t_initial;
  const double frac = static_cast<double>(epoch - p.e_warmup) / (p.e_total - p.e_warmup);
  return p.t_initial + (p.t_final - p.t_initial) * frac;
}

std::vector<BlockProbability> block_probabilities(const StochasticLayer& layer) {
  std::vector<BlockProbability> out;
  if (layer.candidates.empty()) return out;
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& c : layer.candidates) mx = std::max(mx, c.theta.value.item());
  double z = 0.0;
  for (const auto& c : layer.candidates) z += std::exp(c.theta.value.item() - mx);
  for (const auto& c : layer.candidates) {
    const double p = std::exp(c.theta.value.item() - mx) / z;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const BlockProbability& b) { return b.group == c.group; });
    if (it == out.end()) {
      out.push_back({c.group, p});
    } else {
      it->probability += p;
    }
  }
  return out;
}

std::string block_label(const StochasticLayer& layer, int group) {
  for (const auto& c : layer.candidates) {
    if (c.group != group) continue;
    if (c.role == CandidateRole::kSkip) return "skip";
    return layer.spec.variants[c.variant].id();
  }
  return "?";
}

namespace {

void erase_group(StochasticLayer& layer, int group) {
  std::erase_if(layer.candidates, [group](const CandidateBlock& c) { return c.group == group; });
  std::erase_if(layer.prunodes, [group](const PrunodeMask& p) { return p.group == group; });
}

// log-sum-exp of the group's theta: the skip inherits the group's whole
// probability mass.
double group_theta(const StochasticLayer& layer, int group) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& c : layer.candidates) {
    if (c.group == group) mx = std::max(mx, c.theta.value.item());
  }
  double z = 0.0;
  for (const auto& c : layer.candidates) {
    if (c.group == group) z += std::exp(c.theta.value.item() - mx);
  }
  return mx + std::log(z);
}

int next_group_id(const StochasticLayer& layer) {
  int g = 0;
  for (const auto& c : layer.candidates) g = std::max(g, c.group + 1);
  return g;
}

}  // namespace

void prune_layer(StochasticLayer& layer, double threshold, PruningReport& report) {
  while (layer.groups().size() > 1) {
    const auto probs = block_probabilities(layer);
    // Lowest probability first; ties remove the later group.
    auto lowest = std::min_element(probs.begin(), probs.end(),
                                   [](const BlockProbability& a, const BlockProbability& b) {
                                     if (a.probability != b.probability) {
                                       return a.probability < b.probability;
                                     }
                                     return a.group > b.group;
                                   });
    if (!(lowest->probability < threshold)) break;

    const int group = lowest->group;
    report.removed.push_back({layer.spec.index, block_label(layer, group), lowest->probability});

    if (probs.size() == 2 && layer.spec.skippable && layer.skip == SkipState::kNone) {
      // Penultimate block of a removable layer: a skip takes its place.
      CandidateBlock skip;
      skip.role = CandidateRole::kSkip;
      skip.group = next_group_id(layer);
      skip.theta = ParamSlot(Tensor::scalar(group_theta(layer, group), true));
      erase_group(layer, group);
      layer.candidates.push_back(std::move(skip));
      layer.skip = SkipState::kInjected;
      report.injections.push_back(layer.spec.index);
      break;
    }

    erase_group(layer, group);
    if (layer.groups().size() == 1 && layer.skip == SkipState::kInjected) {
      layer.skip = layer.has_skip() ? SkipState::kSoleSurvivor : SkipState::kNone;
    }
  }
}

void collapse_to_argmax(StochasticLayer& layer, const std::vector<double>& group_cost) {
  auto probs = block_probabilities(layer);
  if (probs.size() <= 1) return;
  auto cost_of = [&](int group) {
    return static_cast<std::size_t>(group) < group_cost.size() ? group_cost[group] : 0.0;
  };
  const auto best = std::max_element(
      probs.begin(), probs.end(), [&](const BlockProbability& a, const BlockProbability& b) {
        if (a.probability != b.probability) return a.probability < b.probability;
        if (cost_of(a.group) != cost_of(b.group)) return cost_of(a.group) > cost_of(b.group);
        return a.group > b.group;
      });
  const int keep = best->group;
  for (const auto& p : probs) {
    if (p.group != keep) erase_group(layer, p.group);
  }
  if (layer.skip == SkipState::kInjected) {
    layer.skip = layer.has_skip() ? SkipState::kSoleSurvivor : SkipState::kNone;
  }
}

}  // namespace dnas
