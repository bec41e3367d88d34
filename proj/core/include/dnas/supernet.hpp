// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Layer-wise stochastic SuperNet. Each layer mixes its live candidate blocks
// with Gumbel-Softmax coefficients drawn from per-candidate architecture
// weights (theta); network weights (psi) live in BlockWeights.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnas/config.hpp"
#include "dnas/optim.hpp"
#include "dnas/prunode.hpp"
#include "dnas/rng.hpp"
#include "dnas/tensor.hpp"

namespace dnas {

// psi fragment of one block variant. Conv-like blocks use only `w1`/`b1`.
struct BlockWeights {
  ParamSlot w1, b1;        // expand [in, hidden] (conv: [in, out])
  ParamSlot se_w, se_b;    // SE gate [1, hidden], [hidden]
  ParamSlot w2, b2;        // project [hidden, out]

  std::vector<ParamSlot*> slots();
};

enum class CandidateRole { kSmall, kLarge, kFixed, kSkip };

struct CandidateBlock {
  int variant = -1;  // index into LayerSpec::variants, -1 for skip
  std::shared_ptr<BlockWeights> weights;
  int mask_width = 0;  // active hidden channels; 0 for conv and skip
  CandidateRole role = CandidateRole::kFixed;
  int group = 0;  // candidates of one Prunode share a group
  ParamSlot theta;
};

enum class SkipState {
  kNone,
  kInjected,      // {block * lambda, skip * phi}
  kSoleSurvivor,  // the skip is the only candidate left
};

struct PrunodeMask {
  int group = 0;
  MaskState mask;
};

struct StochasticLayer {
  LayerSpec spec;
  std::vector<CandidateBlock> candidates;
  std::vector<PrunodeMask> prunodes;
  SkipState skip = SkipState::kNone;

  std::size_t live_count() const { return candidates.size(); }
  // Distinct blocks (a Prunode counts once).
  std::vector<int> groups() const;
  bool has_skip() const;
  // Multipliers are active exactly while the layer holds {one block, skip}.
  bool multipliers_active() const;
  PrunodeMask* prunode(int group);
  const PrunodeMask* prunode(int group) const;
  // Index of the candidate in `group` with `role`, or -1.
  int find(int group, CandidateRole role) const;
  std::vector<Tensor> theta_tensors() const;
};

struct SkipMultipliers {
  double phi = 1.1;
  double lambda = 0.55;
};

struct SuperNet {
  SuperNetConfig config;
  std::vector<StochasticLayer> layers;
  ParamSlot head_w, head_b;  // classifier [last filters, classes]

  // Deep copy; shared Prunode weights stay shared inside the copy.
  SuperNet clone() const;

  std::vector<ParamSlot*> psi_slots();
  std::vector<ParamSlot*> theta_slots();
  std::size_t live_candidates() const;
};

// Weights uniform in +-sqrt(1 / fan_in); theta initialized to 1/N_l.
SuperNet build_supernet(const SuperNetConfig& config, Rng& rng);

// Fresh psi for one variant of a layer.
std::shared_ptr<BlockWeights> init_block_weights(const LayerSpec& layer, const VariantSpec& variant,
                                                 Rng& rng);

// a_i = exp((theta_i + g_i)/tau) / sum_j exp((theta_j + g_j)/tau).
Tensor gumbel_softmax(const Tensor& theta, double tau, std::span<const double> noise);

// Block forward on x:[batch, layer.in]. Skip candidates return x.
Tensor block_forward(const LayerSpec& layer, const CandidateBlock& block, const Tensor& x);

// Identity; throws ConfigError when the layer is not shape-preserving.
Tensor skip_forward(const LayerSpec& layer, const Tensor& x);

// Weighted sum of candidate outputs with coefficients `a` (one per
// candidate). Applies phi/lambda while the layer holds {block, skip}.
Tensor layer_forward(const StochasticLayer& layer, const Tensor& x, const Tensor& a,
                     const SkipMultipliers& multipliers);

struct ForwardPass {
  Tensor logits;
  // Per layer mixing coefficients; for singleton layers a constant [1].
  std::vector<Tensor> coefficients;
};

// Draws one Gumbel noise vector per stochastic layer (shared over the batch)
// when `noise` is true; otherwise uses noise-free softmax.
ForwardPass supernet_forward(const SuperNet& net, const Tensor& x, Rng& rng,
                             const SkipMultipliers& multipliers, bool noise = true);

// Re-reads the Prunode mask widths into the candidates of `layer`.
void sync_mask_widths(StochasticLayer& layer);

}  // namespace dnas
