// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "dnas/architecture.hpp"
#include "dnas/error.hpp"
#include "dnas/rng.hpp"
#include "dnas/toml_lite.hpp"
#include "test_support.hpp"

namespace dnas {
namespace {

using testing::desk_config;
using testing::desk_data;
using testing::desk_search;

double checksum(const std::vector<ParamSlot*>& slots) {
  double s = 0.0;
  std::size_t k = 0;
  for (const ParamSlot* p : slots) {
    for (double v : p->value.values()) s += v * static_cast<double>(++k % 7 + 1);
  }
  return s;
}

struct Small {
  SuperNetConfig net = desk_config(8, 2, 2, 8, 2.0);
  SearchConfig search;
  testing::DeskData data;
  LatencyTable lut;

  explicit Small(double alpha = 1.0, std::uint64_t seed = 1, int warmup = 2, int total = 8) {
    search = desk_search(alpha, seed, warmup, total);
    SyntheticSpec spec;
    spec.classes = 2;
    spec.dim = 8;
    spec.samples = 400;
    spec.seed = 3;
    data = desk_data(spec, seed);
    lut = build_analytic(net, 0.01, 1.0);
  }
  SearchResult run() const { return run_search(search, net, data.search, lut); }
};

TEST(Loss, Examples) {
  auto eval = [](double ce, double lat, LossForm form) {
    return loss(Tensor::scalar(ce), Tensor::scalar(lat), 1.0, 0.6, form).item();
  };
  EXPECT_NEAR(eval(2.0, std::exp(1.0), LossForm::kLogPower), 3.0, 1e-12);
  EXPECT_NEAR(eval(2.0, 1000, LossForm::kLogPower), 2.0 + std::pow(std::log(1000.0), 0.6), 1e-12);
  EXPECT_NEAR(eval(2.0, 1000, LossForm::kLogPower), 5.188616, 1e-6);
  EXPECT_NEAR(eval(2.0, 1000, LossForm::kPower), 65.096, 5e-4);
  EXPECT_THROW(eval(2.0, 1.0, LossForm::kLogPower), DomainError);
  EXPECT_THROW(eval(2.0, 0.5, LossForm::kLogPower), DomainError);
  EXPECT_NEAR(eval(2.0, 0.5, LossForm::kPower), 2.0 + std::pow(0.5, 0.6), 1e-12);
}

TEST(SearchConfigFromToml, ReadsAndValidates) {
  const auto doc = toml::Document::parse(
      "[search]\nalpha = 0.5\nlambda = 0.4\nphi = 1.2\ne_warmup = 3\ne_total = 9\n"
      "loss = \"power\"\nsignal = \"probability\"\nthreshold = \"constant\"\ntheta_lr = 0.02\n");
  const SearchConfig c = search_config_from(doc);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.multipliers.lambda, 0.4);
  EXPECT_EQ(c.multipliers.phi, 1.2);
  EXPECT_EQ(c.threshold.e_total, 9);
  EXPECT_EQ(c.loss_form, LossForm::kPower);
  EXPECT_EQ(c.signal, SignalKind::kProbability);
  EXPECT_EQ(c.threshold.kind, ThresholdPolicy::Kind::kConstant);
  EXPECT_EQ(c.theta_optimizer.lr, 0.02);
  EXPECT_EQ(c.psi_optimizer.lr, 0.002);
  EXPECT_EQ(c.theta_split, 0.2);
  EXPECT_THROW(search_config_from(toml::Document::parse("[search]\nalhpa = 1\n")), ConfigError);
  EXPECT_THROW(search_config_from(toml::Document::parse("[search]\nloss = \"cubic\"\n")), ConfigError);
  EXPECT_THROW(search_config_from(toml::Document::parse("[search]\ne_warmup = 9\ne_total = 9\n")),
               ConfigError);
  EXPECT_THROW(search_config_from(toml::Document::parse("[search]\nlambda = 0\n")), ConfigError);
}

TEST(SampleFinal, Examples) {
  SuperNetConfig cfg;
  cfg.input_width = 32;
  cfg.classes = 2;
  cfg.granularity = 32;
  cfg.max_expansion = 8;
  cfg.stages.push_back(testing::irb_stage(2, 32, {"k3"}, {false}, {false, true}));
  Rng rng(1);
  SuperNet net = build_supernet(cfg, rng);
  StochasticLayer& l0 = net.layers[0];
  l0.candidates[0].mask_width = 128;
  l0.candidates[1].mask_width = 160;
  l0.candidates[0].theta.value.mutable_values()[0] = 0.1;
  l0.candidates[1].theta.value.mutable_values()[0] = 0.4;
  StochasticLayer& l1 = net.layers[1];
  CandidateBlock skip;
  skip.role = CandidateRole::kSkip;
  skip.group = 1;
  skip.theta = ParamSlot(Tensor::scalar(0.0, true));
  l1.candidates = {skip};
  l1.skip = SkipState::kSoleSurvivor;
  auto arch = sample_final(net);
  EXPECT_EQ(arch.layers[0], (LayerChoice{0, 0, "k3", 160}));
  EXPECT_EQ(arch.layers[1], (LayerChoice{0, 1, "skip", 0}));
  EXPECT_EQ(arch.config_hash, fingerprint(cfg));

  l0.candidates[1].theta.value.mutable_values()[0] = 0.1;  // tie
  EXPECT_EQ(sample_final(net).layers[0].hidden, 128);
  std::swap(l0.candidates[0].mask_width, l0.candidates[1].mask_width);
  EXPECT_EQ(sample_final(net).layers[0].hidden, 128);

  Rng rng2(1);
  const SuperNet wide = build_supernet(desk_config(), rng2);
  EXPECT_THROW(sample_final(wide), InvariantError);
}

TEST(Isolation, StepsTouchOnlyTheirOwnParameters) {
  Small s;
  Rng rng(1);
  SuperNet net = build_supernet(s.net, rng);
  auto psi = net.psi_slots();
  auto theta = net.theta_slots();
  std::set<const ParamSlot*> a(psi.begin(), psi.end());
  for (const ParamSlot* t : theta) EXPECT_EQ(a.count(t), 0u);

  const Dataset& d = s.data.search.psi;
  std::vector<std::size_t> rows(32);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto backward = [&] {
    for (ParamSlot* p : psi) p->value.zero_grad();
    for (ParamSlot* p : theta) p->value.zero_grad();
    const auto pass = supernet_forward(net, d.batch(rows), rng, s.search.multipliers);
    const auto labels = d.batch_labels(rows);
    loss(softmax_cross_entropy(pass.logits, labels), total_latency(net, pass.coefficients, s.lut),
         1.0, 0.6, LossForm::kLogPower)
        .backward();
  };
  backward();
  double psi_sum = checksum(psi), theta_sum = checksum(theta);
  for (ParamSlot* p : psi) rmsprop_step(*p, s.search.psi_optimizer);
  EXPECT_EQ(checksum(theta), theta_sum);
  EXPECT_NE(checksum(psi), psi_sum);

  backward();
  psi_sum = checksum(psi);
  theta_sum = checksum(theta);
  for (ParamSlot* p : theta) adam_step(*p, s.search.theta_optimizer);
  EXPECT_EQ(checksum(psi), psi_sum);
  EXPECT_NE(checksum(theta), theta_sum);
}

TEST(Warmup, ThetaAndMasksStayBitIdentical) {
  Small s;
  Rng rng(s.search.seed);
  SuperNet fresh = build_supernet(s.net, rng);
  for (int warm : {1, 3}) {
    s.search.threshold.e_warmup = warm;
    const WarmupCheckpoint cp = run_warmup(s.search, s.net, s.data.search, s.lut);
    ASSERT_EQ(cp.log.size(), static_cast<std::size_t>(warm));
    for (std::size_t l = 0; l < fresh.layers.size(); ++l) {
      const auto& a = fresh.layers[l];
      const auto& b = cp.net.layers[l];
      ASSERT_EQ(a.live_count(), b.live_count());
      for (std::size_t i = 0; i < a.live_count(); ++i) {
        EXPECT_EQ(a.candidates[i].theta.value.item(), b.candidates[i].theta.value.item());
        EXPECT_EQ(a.candidates[i].mask_width, b.candidates[i].mask_width);
      }
      for (std::size_t p = 0; p < a.prunodes.size(); ++p) {
        EXPECT_EQ(a.prunodes[p].mask.s, b.prunodes[p].mask.s);
        EXPECT_EQ(a.prunodes[p].mask.l, b.prunodes[p].mask.l);
        EXPECT_EQ(a.prunodes[p].mask.update, b.prunodes[p].mask.update);
      }
    }
    // The weights did train.
    EXPECT_NE(checksum(fresh.psi_slots()), checksum(const_cast<SuperNet&>(cp.net).psi_slots()));
  }
}

TEST(RunSearch, DeterministicAndInsideTheSpace) {
  const Small s(1.0, 4);
  const SearchResult a = s.run();
  const SearchResult b = s.run();
  EXPECT_EQ(a.architecture, b.architecture);
  EXPECT_EQ(to_json(a.architecture), to_json(b.architecture));
  EXPECT_EQ(search_log_csv(a.log), search_log_csv(b.log));
  EXPECT_EQ(pruning_log_csv(a.pruning), pruning_log_csv(b.pruning));
  EXPECT_EQ(mask_log_csv(a.masks), mask_log_csv(b.masks));
  EXPECT_NO_THROW(validate_architecture(a.architecture, s.net));
  for (const auto& layer : a.net.layers) EXPECT_EQ(layer.live_count(), 1u);
  EXPECT_NEAR(a.architecture.lat_us, final_latency(a.architecture, s.lut), 1e-12);
  EXPECT_EQ(a.log.size(), 8u);
  EXPECT_EQ(a.log[1].phase, "warmup");
  EXPECT_EQ(a.log[2].phase, "search");
  EXPECT_FALSE(a.log[1].threshold.has_value());
  EXPECT_DOUBLE_EQ(*a.log[2].threshold, threshold_at(s.search.threshold, 3));
  EXPECT_EQ(search_log_csv(a.log).substr(0, 52), "epoch,phase,ce,lat_us,loss,live_candidates,threshold");
}

TEST(RunSearch, SpaceShrinksMonotonically) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const SearchResult r = Small(0.5, seed).run();
    const Small s(0.5, seed);
    ASSERT_EQ(r.space_size.size(), 6u);
    BigInt prev = count_search_space(s.net);
    for (const BigInt& v : r.space_size) {
      EXPECT_LE(v, prev);
      prev = v;
    }
    std::size_t prev_live = 1000;
    for (const auto& e : r.log) {
      if (e.phase != "search") continue;
      EXPECT_LE(e.live_candidates, prev_live);
      prev_live = e.live_candidates;
    }
  }
}

TEST(RunSearch, LargeAlphaFindsTheCheapestMember) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Small s(1000.0, seed, 2, 12);
    const auto all = enumerate_space(s.net, s.lut);
    const auto best = std::min_element(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.lat_us < b.lat_us;
    });
    EXPECT_EQ(s.run().architecture.layers, best->layers) << "seed " << seed;
  }
}

TEST(RunSearch, PowerLossFormRuns) {
  Small s(0.05, 2);
  s.search.loss_form = LossForm::kPower;
  const auto r = s.run();
  EXPECT_NO_THROW(validate_architecture(r.architecture, s.net));
  EXPECT_NEAR(r.architecture.lat_term, 0.05 * std::pow(r.architecture.lat_us, 0.6), 1e-9);
}

TEST(RunSearch, CheckpointRoundTripResumesIdentically) {
  const Small s(1.0, 2);
  const WarmupCheckpoint cp = run_warmup(s.search, s.net, s.data.search, s.lut);
  const std::string text = checkpoint_to_json(cp);
  const WarmupCheckpoint back = checkpoint_from_json(text, s.net);
  EXPECT_EQ(checkpoint_to_json(back), text);
  const auto a = run_search_from(cp, s.search, s.data.search, s.lut);
  const auto b = run_search_from(back, s.search, s.data.search, s.lut);
  EXPECT_EQ(a.architecture, b.architecture);
  EXPECT_EQ(search_log_csv(a.log), search_log_csv(b.log));
  EXPECT_EQ(a.architecture, s.run().architecture);
  auto other = s.net;
  other.granularity = 4;
  EXPECT_THROW(checkpoint_from_json(text, other), ConfigError);
}

TEST(RunSearch, RejectsMismatchedInputs) {
  Small s;
  LatencyTable partial = s.lut;
  partial = LatencyTable();
  EXPECT_THROW(run_search(s.search, s.net, s.data.search, partial), LatencyTableError);
  auto wide = s.net;
  wide.input_width = 16;
  wide.stages[0].filters = 16;
  wide.stages[1].filters = 16;
  EXPECT_THROW(run_search(s.search, wide, s.data.search, build_analytic(wide, 0.01)), ConfigError);
}

TEST(RunSearch, NonFiniteLossAbortsWithSnapshot) {
  Small s;
  s.search.psi_optimizer.lr = 1e300;
  try {
    s.run();
    FAIL() << "expected SearchAborted";
  } catch (const SearchAborted& e) {
    EXPECT_NE(e.snapshot().find("theta"), std::string::npos);
    EXPECT_NE(e.snapshot().find("small_mask"), std::string::npos);
  }
}

TEST(GridSearch, SingleCellMatchesRunSearch) {
  Small s(0.7, 5);
  s.search.multipliers = {1.2, 0.45};
  GridSpec grid;
  grid.alphas = {0.7};
  grid.lambdas = {0.45};
  grid.phi = 1.2;
  const auto rows = grid_search(grid, s.search, s.net, s.data.search, s.data.split.val, s.lut);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].selected);
  EXPECT_EQ(rows[0].result.architecture, s.run().architecture);
  EXPECT_TRUE(std::isnan(rows[0].top1));
  EXPECT_EQ(rows[0].layers, rows[0].result.architecture.active_layers());
}

TEST(GridSearch, SelectsMinimalLossPerAlphaAndThreadsAgree) {
  Small s(1.0, 6);
  GridSpec grid;
  grid.alphas = {0.2, 2.0};
  grid.lambdas = {0.4, 0.85};
  grid.retrain_epochs = 1;
  const auto serial = grid_search(grid, s.search, s.net, s.data.search, s.data.split.val, s.lut);
  grid.threads = 4;
  const auto parallel = grid_search(grid, s.search, s.net, s.data.search, s.data.split.val, s.lut);
  ASSERT_EQ(serial.size(), 4u);
  EXPECT_EQ(pareto_csv(serial), pareto_csv(parallel));
  for (std::size_t i = 0; i < 4; i += 2) {
    EXPECT_NE(serial[i].selected, serial[i + 1].selected);
    const auto& best = serial[i].selected ? serial[i] : serial[i + 1];
    EXPECT_LE(best.loss, serial[i].loss);
    EXPECT_LE(best.loss, serial[i + 1].loss);
    EXPECT_GE(serial[i].top1, 0.0);
  }
  EXPECT_EQ(pareto_csv(serial).substr(0, pareto_csv(serial).find('\n')),
            "alpha,lambda,phi,loss,layers,lat_us,top1,selected");
  GridSpec empty;
  EXPECT_THROW(grid_search(empty, s.search, s.net, s.data.search, s.data.split.val, s.lut), ConfigError);
}

TEST(LatencyPressure, ThetaDescentLowersExpectedLatency) {
  const auto cfg = desk_config();
  const auto lut = build_analytic(cfg, 0.01);
  Rng rng(1);
  SuperNet net = build_supernet(cfg, rng);
  const AdamSettings adam;
  auto expected = [&] {
    std::vector<Tensor> a;
    for (const auto& layer : net.layers) a.push_back(softmax(stack(layer.theta_tensors())));
    return a;
  };
  double prev = total_latency(net, expected(), lut).item();
  for (int step = 0; step < 100; ++step) {
    for (ParamSlot* p : net.theta_slots()) p->value.zero_grad();
    const Tensor ce = Tensor::scalar(2.0);  // constant, carries no gradient
    loss(ce, total_latency(net, expected(), lut), 1.0, 0.6, LossForm::kLogPower).backward();
    for (ParamSlot* p : net.theta_slots()) adam_step(*p, adam);
    const double now = total_latency(net, expected(), lut).item();
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(LatencyPressure, FrozenWeightsSearchLowersLatencyEveryEpoch) {
  Small s(1.0, 1, 2, 12);
  s.search.psi_optimizer.lr = 1e-300;  // weights effectively frozen
  s.search.alpha = 1e4;                // cross-entropy is negligible
  const SearchResult r = s.run();
  double prev = r.log[1].lat_us;
  for (std::size_t i = 2; i < r.log.size(); ++i) {
    EXPECT_LT(r.log[i].lat_us, prev) << "epoch " << r.log[i].epoch;
    prev = r.log[i].lat_us;
  }
}

TEST(Retrain, DeterministicAndAboveChance) {
  const Small s;
  const SearchResult r = s.run();
  RetrainOptions opt;
  opt.epochs = 3;
  opt.seed = 9;
  const auto a = retrain(r.architecture, s.net, s.data.split.train, s.data.split.val, opt);
  const auto b = retrain(r.architecture, s.net, s.data.split.train, s.data.split.val, opt);
  EXPECT_EQ(a.top1, b.top1);
  EXPECT_EQ(a.epochs, 3);
  EXPECT_EQ(a.seed, 9u);
  // Every member of the space, briefly trained, clears the chance floor.
  const auto all = enumerate_space(s.net, s.lut);
  for (std::size_t i = 0; i < all.size(); i += 7) {
    const auto res = retrain(all[i], s.net, s.data.split.train, s.data.split.val, opt);
    EXPECT_GE(res.top1, 1.0 / s.net.classes) << to_json(all[i]);
  }
  auto bad = r.architecture;
  bad.config_hash = "0";
  EXPECT_THROW(retrain(bad, s.net, s.data.split.train, s.data.split.val, opt), ConfigError);
}

// Multinomial logistic regression by full-batch gradient descent.
double linear_probe_accuracy(const Dataset& train, const Dataset& val, int iterations) {
  const auto k = static_cast<std::size_t>(train.classes), d = static_cast<std::size_t>(train.dim);
  std::vector<double> w(d * k, 0.0), b(k, 0.0);
  auto scores = [&](const Dataset& data, std::size_t i) {
    std::vector<double> z(b);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) z[c] += data.features[i * d + j] * w[j * k + c];
    }
    return z;
  };
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> gw(w.size(), 0.0), gb(k, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto z = scores(train, i);
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0;
      for (double& v : z) sum += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = z[c] / sum - (static_cast<int>(c) == train.labels[i] ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[j * k + c] += g * train.features[i * d + j];
      }
    }
    const double lr = 0.5 / static_cast<double>(train.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t c = 0; c < k; ++c) b[c] -= lr * gb[c];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto z = scores(val, i);
    if (std::max_element(z.begin(), z.end()) - z.begin() == val.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

TEST(Retrain, AllSkipMatchesLinearProbe) {
  SuperNetConfig cfg;
  cfg.input_width = 8;
  cfg.classes = 3;
  cfg.granularity = 8;
  cfg.max_expansion = 2;
  cfg.stages.push_back(testing::irb_stage(2, 8, {"k3"}, {false}, {true, true}));
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 8;
  spec.samples = 900;
  spec.noise = 1.0;
  spec.separation = 1.0;
  const Split split = split_dataset(make_synthetic(spec), 0.2, 1);
  SampledArchitecture arch;
  arch.config_hash = fingerprint(cfg);
  arch.layers = {{0, 0, "skip", 0}, {0, 1, "skip", 0}};
  RetrainOptions opt;
  opt.epochs = 40;
  const double top1 = retrain(arch, cfg, split.train, split.val, opt).top1;
  const double probe = linear_probe_accuracy(split.train, split.val, 500);
  EXPECT_GE(top1, probe);
}

TEST(RunSearch, ZeroAlphaPicksTheWidthTheTaskNeeds) {
  SuperNetConfig cfg;
  cfg.input_width = 8;
  cfg.classes = 4;
  cfg.granularity = 8;
  cfg.max_expansion = 4;
  cfg.stages.push_back(testing::irb_stage(1, 8, {"k3"}, {false}, {false}));
  SyntheticSpec spec;
  spec.classes = 4;
  spec.dim = 8;
  spec.samples = 4000;
  spec.modes = 32;  // many blobs per class: narrow blocks underfit
  spec.noise = 0.15;
  spec.separation = 1.0;
  const auto data = desk_data(spec, 1);
  const auto lut = build_analytic(cfg, 0.01);

  // Oracle: train every width on its own.
  RetrainOptions opt;
  opt.epochs = 40;
  std::vector<double> acc;
  for (int h = 8; h <= 32; h += 8) {
    SampledArchitecture arch;
    arch.config_hash = fingerprint(cfg);
    arch.layers = {{0, 0, "k3", h}};
    acc.push_back(retrain(arch, cfg, data.split.train, data.split.val, opt).top1);
  }
  for (std::size_t i = 1; i < acc.size(); ++i) {
    ASSERT_GT(acc[i], acc[i - 1]) << "the task must reward every extra width step";
  }

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = run_search(desk_search(0.0, seed, 5, 40), cfg, data.search, lut);
    EXPECT_EQ(r.architecture.layers[0].hidden, 32) << "seed " << seed;
  }
}

}  // namespace
}  // namespace dnas
