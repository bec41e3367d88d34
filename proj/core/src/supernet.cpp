// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dnas/error.hpp"

namespace dnas {

namespace {

ParamSlot uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ParamSlot(Tensor::parameter(std::move(shape), std::move(v)));
}

ParamSlot theta_param(double value) { return ParamSlot(Tensor::scalar(value, true)); }

}  // namespace

std::vector<ParamSlot*> BlockWeights::slots() {
  std::vector<ParamSlot*> out;
  for (ParamSlot* p : {&w1, &b1, &se_w, &se_b, &w2, &b2}) {
    if (p->value.defined()) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// StochasticLayer

std::vector<int> StochasticLayer::groups() const {
  std::vector<int> out;
  for (const auto& c : candidates) {
    if (std::find(out.begin(), out.end(), c.group) == out.end()) out.push_back(c.group);
  }
  return out;
}

bool StochasticLayer::has_skip() const {
  return std::any_of(candidates.begin(), candidates.end(),
                     [](const CandidateBlock& c) { return c.role == CandidateRole::kSkip; });
}

bool StochasticLayer::multipliers_active() const {
  return skip == SkipState::kInjected && groups().size() == 2 && has_skip();
}

PrunodeMask* StochasticLayer::prunode(int group) {
  for (auto& p : prunodes) {
    if (p.group == group) return &p;
  }
  return nullptr;
}

const PrunodeMask* StochasticLayer::prunode(int group) const {
  for (const auto& p : prunodes) {
    if (p.group == group) return &p;
  }
  return nullptr;
}

int StochasticLayer::find(int group, CandidateRole role) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].group == group && candidates[i].role == role) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Tensor> StochasticLayer::theta_tensors() const {
  std::vector<Tensor> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.theta.value);
  return out;
}

void sync_mask_widths(StochasticLayer& layer) {
  for (const auto& p : layer.prunodes) {
    const int s = layer.find(p.group, CandidateRole::kSmall);
    const int l = layer.find(p.group, CandidateRole::kLarge);
    if (s >= 0) layer.candidates[s].mask_width = p.mask.small_mask;
    if (l >= 0) layer.candidates[l].mask_width = p.mask.large_mask;
  }
}

// ---------------------------------------------------------------------------
// SuperNet

SuperNet SuperNet::clone() const {
  SuperNet copy;
  copy.config = config;
  copy.head_w = head_w.clone();
  copy.head_b = head_b.clone();
  std::map<const BlockWeights*, std::shared_ptr<BlockWeights>> remap;
  for (const auto& layer : layers) {
    StochasticLayer nl;
    nl.spec = layer.spec;
    nl.prunodes = layer.prunodes;
    nl.skip = layer.skip;
    for (const auto& c : layer.candidates) {
      CandidateBlock nc;
      nc.variant = c.variant;
      nc.mask_width = c.mask_width;
      nc.role = c.role;
      nc.group = c.group;
      nc.theta = c.theta.clone();
      if (c.weights) {
        auto& slot = remap[c.weights.get()];
        if (!slot) {
          slot = std::make_shared<BlockWeights>();
          const BlockWeights& w = *c.weights;
          auto copy_slot = [](const ParamSlot& p) {
            return p.value.defined() ? p.clone() : ParamSlot{};
          };
          slot->w1 = copy_slot(w.w1);
          slot->b1 = copy_slot(w.b1);
          slot->se_w = copy_slot(w.se_w);
          slot->se_b = copy_slot(w.se_b);
          slot->w2 = copy_slot(w.w2);
          slot->b2 = copy_slot(w.b2);
        }
        nc.weights = slot;
      }
      nl.candidates.push_back(std::move(nc));
    }
    copy.layers.push_back(std::move(nl));
  }
  return copy;
}

std::vector<ParamSlot*> SuperNet::psi_slots() {
  std::vector<ParamSlot*> out;
  std::vector<const BlockWeights*> seen;
  for (auto& layer : layers) {
    for (auto& c : layer.candidates) {
      if (!c.weights) continue;
      if (std::find(seen.begin(), seen.end(), c.weights.get()) != seen.end()) continue;
      seen.push_back(c.weights.get());
      for (ParamSlot* p : c.weights->slots()) out.push_back(p);
    }
  }
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::vector<ParamSlot*> SuperNet::theta_slots() {
  std::vector<ParamSlot*> out;
  for (auto& layer : layers) {
    for (auto& c : layer.candidates) out.push_back(&c.theta);
  }
  return out;
}

std::size_t SuperNet::live_candidates() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.live_count();
  return n;
}

std::shared_ptr<BlockWeights> init_block_weights(const LayerSpec& layer, const VariantSpec& variant,
                                                 Rng& rng) {
  auto w = std::make_shared<BlockWeights>();
  const auto in = static_cast<std::size_t>(layer.in);
  const auto out = static_cast<std::size_t>(layer.out);
  if (layer.kind == BlockKind::kConv) {
    w->w1 = uniform_param({in, out}, in, rng);
    w->b1 = uniform_param({out}, in, rng);
    return w;
  }
  const auto hidden = static_cast<std::size_t>(layer.max_hidden);
  w->w1 = uniform_param({in, hidden}, in, rng);
  w->b1 = uniform_param({hidden}, in, rng);
  if (variant.se) {
    w->se_w = uniform_param({1, hidden}, 1, rng);
    w->se_b = uniform_param({hidden}, 1, rng);
  }
  w->w2 = uniform_param({hidden, out}, hidden, rng);
  w->b2 = uniform_param({out}, hidden, rng);
  return w;
}

SuperNet build_supernet(const SuperNetConfig& config, Rng& rng) {
  validate(config);
  SuperNet net;
  net.config = config;
  for (const LayerSpec& spec : expand_layers(config)) {
    StochasticLayer layer;
    layer.spec = spec;
    int group = 0;
    for (std::size_t v = 0; v < spec.variants.size(); ++v) {
      const VariantSpec& variant = spec.variants[v];
      auto weights = init_block_weights(spec, variant, rng);
      if (spec.kind == BlockKind::kInvertedBottleneck && variant.prunable) {
        const MaskState mask = init_mask_state(spec.max_hidden, config.granularity);
        CandidateBlock small{static_cast<int>(v), weights, mask.small_mask, CandidateRole::kSmall,
                             group, {}};
        CandidateBlock large{static_cast<int>(v), weights, mask.large_mask, CandidateRole::kLarge,
                             group, {}};
        layer.candidates.push_back(std::move(small));
        layer.candidates.push_back(std::move(large));
        layer.prunodes.push_back({group, mask});
      } else {
        layer.candidates.push_back(CandidateBlock{static_cast<int>(v), weights, spec.max_hidden,
                                                  CandidateRole::kFixed, group, {}});
      }
      ++group;
    }
    const double init = 1.0 / static_cast<double>(layer.candidates.size());
    for (auto& c : layer.candidates) c.theta = theta_param(init);
    net.layers.push_back(std::move(layer));
  }
  const auto last = static_cast<std::size_t>(config.stages.back().filters);
  const auto classes = static_cast<std::size_t>(config.classes);
  net.head_w = uniform_param({last, classes}, last, rng);
  net.head_b = uniform_param({classes}, last, rng);
  return net;
}

// ---------------------------------------------------------------------------
// Forward

Tensor gumbel_softmax(const Tensor& theta, double tau, std::span<const double> noise) {
  if (!theta.defined() || theta.numel() == 0) throw ConfigError("gumbel_softmax: empty theta");
  if (!(tau > 0)) throw ConfigError("gumbel_softmax: temperature must be positive");
  if (noise.size() != theta.numel()) {
    throw DimensionError("gumbel_softmax: " + std::to_string(noise.size()) +
                         " noise draws for " + std::to_string(theta.numel()) + " weights");
  }
  const Tensor g = Tensor::constant({noise.size()}, {noise.begin(), noise.end()});
  return softmax(scale(add(theta, g), 1.0 / tau));
}

Tensor skip_forward(const LayerSpec& layer, const Tensor& x) {
  if (!layer.residual()) {
    throw ConfigError("skip on layer " + std::to_string(layer.index) + " changes shape " +
                      std::to_string(layer.in) + " -> " + std::to_string(layer.out));
  }
  if (x.shape().size() != 2 || x.cols() != static_cast<std::size_t>(layer.in)) {
    throw ConfigError("skip on layer " + std::to_string(layer.index) +
                      ": input does not match layer width " + std::to_string(layer.in));
  }
  return x;
}

Tensor block_forward(const LayerSpec& layer, const CandidateBlock& block, const Tensor& x) {
  if (block.role == CandidateRole::kSkip) return skip_forward(layer, x);
  if (x.shape().size() != 2 || x.cols() != static_cast<std::size_t>(layer.in)) {
    throw DimensionError("block on layer " + std::to_string(layer.index) + " expects " +
                         std::to_string(layer.in) + " input channels");
  }
  const BlockWeights& w = *block.weights;
  Tensor y;
  if (layer.kind == BlockKind::kConv) {
    y = activation(linear(x, w.w1.value, w.b1.value), layer.activation);
  } else {
    const int width = block.mask_width;
    if (width <= 0 || width > layer.max_hidden || width % layer.granularity != 0) {
      throw InvariantError("layer " + std::to_string(layer.index) + ": mask width " +
                           std::to_string(width) + " is not a positive multiple of " +
                           std::to_string(layer.granularity) + " within " +
                           std::to_string(layer.max_hidden));
    }
    const auto mw = static_cast<std::size_t>(width);
    Tensor h = activation(channel_mask(linear(x, w.w1.value, w.b1.value), mw), layer.activation);
    if (layer.activation == Activation::kSigmoid) h = channel_mask(h, mw);  // sigmoid(0) != 0
    if (w.se_w.value.defined()) {
      const Tensor squeeze = masked_row_mean(h, mw);
      const Tensor gate =
          activation(linear(squeeze, w.se_w.value, w.se_b.value), Activation::kSigmoid);
      h = mul(h, gate);
    }
    y = linear(h, w.w2.value, w.b2.value);
  }
  if (layer.residual()) y = add(y, x);
  return y;
}

Tensor layer_forward(const StochasticLayer& layer, const Tensor& x, const Tensor& a,
                     const SkipMultipliers& multipliers) {
  const auto& cands = layer.candidates;
  if (cands.empty()) throw InvariantError("layer has no live candidates");
  if (a.numel() != cands.size()) {
    throw DimensionError("layer " + std::to_string(layer.spec.index) + ": " +
                         std::to_string(a.numel()) + " coefficients for " +
                         std::to_string(cands.size()) + " candidates");
  }
  if (cands.size() == 1) return block_forward(layer.spec, cands[0], x);

  const bool scaled = layer.multipliers_active();
  Tensor y;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    Tensor out = block_forward(layer.spec, cands[i], x);
    if (y.defined() && out.shape() != y.shape()) {
      throw ConfigError("layer " + std::to_string(layer.spec.index) +
                        ": candidate outputs disagree in shape");
    }
    if (scaled) {
      out = scale(out, cands[i].role == CandidateRole::kSkip ? multipliers.phi
                                                             : multipliers.lambda);
    }
    Tensor term = scale_by(out, select(a, i));
    y = y.defined() ? add(y, term) : term;
  }
  return y;
}

ForwardPass supernet_forward(const SuperNet& net, const Tensor& x, Rng& rng,
                             const SkipMultipliers& multipliers, bool noise) {
  ForwardPass pass;
  Tensor h = x;
  for (const auto& layer : net.layers) {
    Tensor a;
    if (layer.live_count() == 1) {
      a = Tensor::constant({1}, {1.0});
    } else {
      std::vector<double> g(layer.live_count(), 0.0);
      if (noise) {
        for (double& v : g) v = rng.gumbel();
      }
      const auto thetas = layer.theta_tensors();
      a = gumbel_softmax(stack(thetas), net.config.tau, g);
    }
    h = layer_forward(layer, h, a, multipliers);
    pass.coefficients.push_back(a);
  }
  pass.logits = linear(h, net.head_w.value, net.head_b.value);
  return pass;
}

}  // namespace dnas
