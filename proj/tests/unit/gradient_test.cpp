// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Analytic gradients against central finite differences.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dnas/latency.hpp"
#include "dnas/rng.hpp"
#include "dnas/search.hpp"
#include "dnas/supernet.hpp"
#include "dnas/tensor.hpp"
#include "test_support.hpp"

namespace dnas {
namespace {

using testing::close_rel;
using testing::numeric_gradient;

using Fn = std::function<Tensor(const Tensor&)>;

void expect_gradient(const Shape& shape, const std::vector<double>& x, const Fn& f,
                     const std::string& what, double rel = 1e-4) {
  const auto p = Tensor::parameter(shape, x);
  f(p).backward();
  ASSERT_TRUE(p.has_grad()) << what;
  const auto fd = numeric_gradient(
      [&](const std::vector<double>& v) { return f(Tensor::constant(shape, v)).item(); }, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_TRUE(close_rel(p.grad()[i], fd[i], rel, 1e-3))
        << what << " [" << i << "]: analytic " << p.grad()[i] << " numeric " << fd[i];
  }
}

class RandomGradient : public ::testing::TestWithParam<int> {
 protected:
  std::vector<double> random(std::size_t n, double lo = -1.5, double hi = 1.5) {
    std::vector<double> v(n);
    for (double& x : v) x = rng_.uniform(lo, hi);
    return v;
  }
  // Avoids the relu kink at zero.
  std::vector<double> off_kink(std::size_t n) {
    auto v = random(n);
    for (double& x : v) {
      if (std::abs(x) < 0.05) x = 0.3;
    }
    return v;
  }
  Rng rng_{static_cast<std::uint64_t>(1000 + GetParam())};
};

TEST_P(RandomGradient, Elementwise) {
  const auto other = Tensor::constant({2, 3}, random(6));
  const auto w = random(6);
  auto reduce = [&](const Tensor& t) { return weighted_sum(t, w); };
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(add(x, other)); }, "add");
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(sub(other, x)); }, "sub");
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(mul(x, x)); }, "mul");
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(scale(x, 0.7)); }, "scale");
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(add_scalar(x, 2)); },
                  "add_scalar");
  expect_gradient({1}, random(1), [&](const Tensor& s) { return reduce(scale_by(other, s)); },
                  "scale_by/s");
  const auto s = Tensor::constant({1}, random(1));
  expect_gradient({2, 3}, random(6), [&](const Tensor& x) { return reduce(scale_by(x, s)); },
                  "scale_by/x");
  expect_gradient({2, 3}, random(6, 0.1, 4), [&](const Tensor& x) { return reduce(log(x)); }, "log");
  expect_gradient({2, 3}, random(6, 0.1, 4), [&](const Tensor& x) { return reduce(pow(x, 0.6)); },
                  "pow");
}

TEST_P(RandomGradient, Activations) {
  const auto w = random(6);
  for (Activation a : {Activation::kRelu, Activation::kSwish, Activation::kSigmoid}) {
    expect_gradient({2, 3}, off_kink(6),
                    [&](const Tensor& x) { return weighted_sum(activation(x, a), w); },
                    std::string(to_string(a)));
  }
}

TEST_P(RandomGradient, LinearAllInputs) {
  const auto x = Tensor::constant({3, 4}, random(12));
  const auto w = Tensor::constant({4, 2}, random(8));
  const auto b = Tensor::constant({2}, random(2));
  const auto r = random(6);
  auto reduce = [&](const Tensor& t) { return weighted_sum(t, r); };
  expect_gradient({3, 4}, random(12), [&](const Tensor& v) { return reduce(linear(v, w, b)); },
                  "linear/x");
  expect_gradient({4, 2}, random(8), [&](const Tensor& v) { return reduce(linear(x, v, b)); },
                  "linear/w");
  expect_gradient({2}, random(2), [&](const Tensor& v) { return reduce(linear(x, w, v)); },
                  "linear/b");
}

TEST_P(RandomGradient, MaskReductionsAndLoss) {
  const auto r = random(8);
  expect_gradient({2, 4}, random(8),
                  [&](const Tensor& x) { return weighted_sum(channel_mask(x, 3), r); }, "mask");
  expect_gradient({2, 4}, random(8),
                  [&](const Tensor& x) { return weighted_sum(masked_row_mean(x, 3), {r.data(), 2}); },
                  "masked_row_mean");
  const std::vector<int> labels{1, 3};
  expect_gradient({2, 4}, random(8, -3, 3),
                  [&](const Tensor& x) { return softmax_cross_entropy(x, labels); }, "ce");
  expect_gradient({4}, random(4), [&](const Tensor& x) { return weighted_sum(softmax(x), {r.data(), 4}); },
                  "softmax");
  expect_gradient({2, 4}, random(8), [&](const Tensor& x) { return sum(mul(x, x)); }, "sum");
}

TEST_P(RandomGradient, GumbelSoftmax) {
  const auto noise = random(4);
  const double tau = rng_.uniform(0.5, 2.0);
  const auto r = random(4);
  expect_gradient({4}, random(4),
                  [&](const Tensor& t) { return weighted_sum(gumbel_softmax(t, tau, noise), r); },
                  "gumbel_softmax");
}

TEST_P(RandomGradient, LossForms) {
  const double alpha = rng_.uniform(0.1, 2), beta = rng_.uniform(0.2, 1.0);
  const double ce = rng_.uniform(0.1, 3), lat = rng_.uniform(3, 300);
  for (LossForm form : {LossForm::kLogPower, LossForm::kPower}) {
    expect_gradient({1}, {lat},
                    [&](const Tensor& l) { return loss(Tensor::scalar(ce), l, alpha, beta, form); },
                    "loss/lat");
    expect_gradient({1}, {ce},
                    [&](const Tensor& c) { return loss(c, Tensor::scalar(lat), alpha, beta, form); },
                    "loss/ce");
  }
}

TEST_P(RandomGradient, BlockForwardThroughEveryWeight) {
  const SuperNetConfig cfg = testing::desk_config(8, 1, 3, 8, 2.0);
  Rng init(GetParam());
  SuperNet net = build_supernet(cfg, init);
  // Layer 0 holds k3 and k3_se; the SE variant exercises every slot.
  const StochasticLayer& layer = net.layers[0];
  const int se_group = layer.candidates.back().group;
  const CandidateBlock& cand = layer.candidates[layer.find(se_group, CandidateRole::kSmall)];
  const auto x = Tensor::constant({2, 8}, off_kink(16));
  const auto r = random(16);
  auto slots = cand.weights->slots();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    ParamSlot* slot = slots[k];
    const Shape shape = slot->value.shape();
    const std::vector<double> orig(slot->value.values().begin(), slot->value.values().end());
    expect_gradient(shape, orig, [&](const Tensor& v) {
      ParamSlot saved = *slot;
      slot->value = v;
      Tensor y = weighted_sum(block_forward(layer.spec, cand, x), r);
      *slot = saved;
      return y;
    }, "block slot " + std::to_string(k), 2e-4);
  }
  expect_gradient({2, 8}, off_kink(16),
                  [&](const Tensor& v) { return weighted_sum(block_forward(layer.spec, cand, v), r); },
                  "block input", 2e-4);
}

TEST_P(RandomGradient, LatencyTermIsLinearInCoefficients) {
  const SuperNetConfig cfg = testing::desk_config();
  Rng init(GetParam());
  const SuperNet net = build_supernet(cfg, init);
  const LatencyTable lut = build_analytic(cfg, 0.001, 1.0);
  std::vector<Tensor> coeffs;
  for (const auto& layer : net.layers) {
    coeffs.push_back(Tensor::parameter({layer.live_count()}, random(layer.live_count(), 0, 1)));
  }
  total_latency(net, coeffs, lut).backward();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto lat = candidate_latencies(net.layers[l], lut);
    for (std::size_t i = 0; i < lat.size(); ++i) EXPECT_NEAR(coeffs[l].grad()[i], lat[i], 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomGradient, ::testing::Range(0, 12));

}  // namespace
}  // namespace dnas
