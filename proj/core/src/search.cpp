// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "dnas/toml_lite.hpp"
#include "json.hpp"

namespace dnas {

using nlohmann::json;

void validate(const SearchConfig& c) {
  if (!(c.alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (!(c.beta > 0)) throw ConfigError("beta must be positive");
  if (!(c.multipliers.phi > 0) || !(c.multipliers.lambda > 0)) {
    throw ConfigError("skip multipliers must be positive");
  }
  if (c.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(c.theta_split > 0 && c.theta_split < 1)) throw ConfigError("theta_split must lie in (0, 1)");
  if (!(c.theta_optimizer.lr > 0)) throw ConfigError("theta learning rate must be positive");
  if (!(c.psi_optimizer.lr > 0)) throw ConfigError("psi learning rate must be positive");
  validate(c.threshold, 0);
}

Tensor loss(const Tensor& ce, const Tensor& lat, double alpha, double beta, LossForm form) {
  if (form == LossForm::kLogPower) {
    if (!(lat.item() > 1.0)) {
      throw DomainError("log-power loss needs LAT > 1 us, got " + std::to_string(lat.item()));
    }
    return add(ce, scale(pow(log(lat), beta), alpha));
  }
  return add(ce, scale(pow(lat, beta), alpha));
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string search_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,phase,ce,lat_us,loss,live_candidates,threshold\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + e.phase + "," + fmt(e.ce) + "," + fmt(e.lat_us) + "," +
           fmt(e.loss) + "," + std::to_string(e.live_candidates) + "," +
           (e.threshold ? fmt(*e.threshold) : std::string()) + "\n";
  }
  return out;
}

std::string pruning_log_csv(const std::vector<PruningEvent>& events) {
  std::string out = "epoch,threshold,layer,block,event,probability\n";
  for (const auto& e : events) {
    out += std::to_string(e.epoch) + "," + fmt(e.threshold) + "," + std::to_string(e.layer) + "," +
           e.block + "," + e.event + "," + fmt(e.probability) + "\n";
  }
  return out;
}

std::string mask_log_csv(const std::vector<MaskTrace>& trace) {
  std::string out = "iteration,progress,layer,group,s,l,small_mask,large_mask\n";
  for (const auto& t : trace) {
    out += std::to_string(t.iteration) + "," + fmt(t.progress) + "," + std::to_string(t.layer) + "," +
           std::to_string(t.group) + "," + fmt(t.s) + "," + fmt(t.l) + "," +
           std::to_string(t.small_mask) + "," + std::to_string(t.large_mask) + "\n";
  }
  return out;
}

Dataset SearchData::all() const {
  Dataset d = psi;
  d.features.insert(d.features.end(), theta.features.begin(), theta.features.end());
  d.labels.insert(d.labels.end(), theta.labels.begin(), theta.labels.end());
  return d;
}

SearchData split_search_data(const Dataset& train, double theta_split, std::uint64_t seed) {
  Split s = split_dataset(train, theta_split, seed);
  return {std::move(s.train), std::move(s.val)};
}

WarmupCheckpoint WarmupCheckpoint::clone() const { return {net.clone(), rng_state, log}; }

namespace {

using Batches = std::vector<std::vector<std::size_t>>;

Batches make_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  Batches out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(idx.begin() + i,
                     idx.begin() + std::min(n, i + static_cast<std::size_t>(batch_size)));
  }
  return out;
}

void clear_grads(SuperNet& net) {
  for (ParamSlot* p : net.psi_slots()) p->value.zero_grad();
  for (ParamSlot* p : net.theta_slots()) p->value.zero_grad();
}

// Noise-free choice probabilities as constants.
std::vector<Tensor> expected_coefficients(const SuperNet& net) {
  std::vector<Tensor> out;
  for (const auto& layer : net.layers) {
    if (layer.live_count() == 1) {
      out.push_back(Tensor::constant({1}, {1.0}));
      continue;
    }
    out.push_back(detach(softmax(stack(layer.theta_tensors()))));
  }
  return out;
}

double expected_latency(const SuperNet& net, const LatencyTable& lut) {
  const auto coeffs = expected_coefficients(net);
  return total_latency(net, coeffs, lut).item();
}

std::string snapshot_json(const SuperNet& net) {
  json layers = json::array();
  for (const auto& layer : net.layers) {
    json cands = json::array();
    for (const auto& c : layer.candidates) {
      cands.push_back({{"block", block_label(layer, c.group)},
                       {"group", c.group},
                       {"mask_width", c.mask_width},
                       {"theta", c.theta.value.item()}});
    }
    json masks = json::array();
    for (const auto& p : layer.prunodes) {
      masks.push_back({{"group", p.group},
                       {"s", p.mask.s},
                       {"l", p.mask.l},
                       {"small_mask", p.mask.small_mask},
                       {"large_mask", p.mask.large_mask},
                       {"weight", p.mask.weight},
                       {"update", p.mask.update}});
    }
    layers.push_back({{"layer", layer.spec.index}, {"candidates", cands}, {"masks", masks}});
  }
  // NaN is not representable in JSON; nlohmann writes null.
  return json({{"layers", layers}}).dump(2) + "\n";
}

struct StepResult {
  double ce = 0.0;
  double loss = 0.0;
};

// One forward/backward over a batch. The caller steps whichever slots it owns.
StepResult forward_backward(SuperNet& net, const Dataset& data, const std::vector<std::size_t>& rows,
                            Rng& rng, const SearchConfig& config, const LatencyTable& lut) {
  clear_grads(net);
  const Tensor x = data.batch(rows);
  const auto labels = data.batch_labels(rows);
  const ForwardPass pass = supernet_forward(net, x, rng, config.multipliers, true);
  const Tensor ce = softmax_cross_entropy(pass.logits, labels);
  const Tensor lat = total_latency(net, pass.coefficients, lut);
  const Tensor total = loss(ce, lat, config.alpha, config.beta, config.loss_form);
  if (!std::isfinite(total.item())) {
    throw SearchAborted("non-finite search loss (ce " + fmt(ce.item()) + ", lat " +
                            fmt(lat.item()) + ")",
                        snapshot_json(net));
  }
  total.backward();
  return {ce.item(), total.item()};
}

template <typename Fn>
auto guarded(const SuperNet& net, Fn&& fn) {
  try {
    return fn();
  } catch (const SearchAborted&) {
    throw;
  } catch (const EngineError& e) {
    throw SearchAborted(e.what(), snapshot_json(net));
  } catch (const DomainError& e) {
    throw SearchAborted(e.what(), snapshot_json(net));
  }
}

void psi_step(SuperNet& net, const RmspropSettings& s) {
  for (ParamSlot* p : net.psi_slots()) rmsprop_step(*p, s);
}

void theta_step(SuperNet& net, const AdamSettings& s) {
  for (ParamSlot* p : net.theta_slots()) adam_step(*p, s);
}

void walk_masks(SuperNet& net, double progress, SignalKind kind, std::size_t iteration,
                std::vector<MaskTrace>& trace) {
  for (auto& layer : net.layers) {
    if (layer.prunodes.empty()) continue;
    std::vector<double> prob;
    if (kind == SignalKind::kProbability) {
      double mx = -std::numeric_limits<double>::infinity();
      for (const auto& c : layer.candidates) mx = std::max(mx, c.theta.value.item());
      double z = 0.0;
      for (const auto& c : layer.candidates) z += std::exp(c.theta.value.item() - mx);
      for (const auto& c : layer.candidates) prob.push_back(std::exp(c.theta.value.item() - mx) / z);
    }
    for (auto& p : layer.prunodes) {
      const int si = layer.find(p.group, CandidateRole::kSmall);
      const int li = layer.find(p.group, CandidateRole::kLarge);
      if (si < 0 || li < 0) continue;
      ParamSlot& ts = layer.candidates[si].theta;
      ParamSlot& tl = layer.candidates[li].theta;
      const double signal = kind == SignalKind::kTheta ? weight_signal(ts.value.item(), tl.value.item())
                                                       : prob[li] - prob[si];
      const MaskUpdate upd = update_masks(p.mask, progress, signal);
      p.mask = upd.state;
      if (upd.reset_weights) {
        const ThetaPair mean = reset_candidate_weights(ts.value.item(), tl.value.item());
        ts.value.mutable_values()[0] = mean.small;
        tl.value.mutable_values()[0] = mean.large;
      }
      trace.push_back({iteration, progress, layer.spec.index, p.group, p.mask.s, p.mask.l,
                       p.mask.small_mask, p.mask.large_mask});
    }
    sync_mask_widths(layer);
  }
}

std::vector<double> group_costs(const StochasticLayer& layer, const LatencyTable& lut) {
  std::vector<double> cost;
  const auto lats = candidate_latencies(layer, lut);
  for (std::size_t i = 0; i < layer.candidates.size(); ++i) {
    const auto g = static_cast<std::size_t>(layer.candidates[i].group);
    if (cost.size() <= g) cost.resize(g + 1, std::numeric_limits<double>::infinity());
    cost[g] = std::min(cost[g], lats[i]);
  }
  return cost;
}

// Reduces every layer to the sampled candidate.
void apply_architecture(SuperNet& net, const SampledArchitecture& arch) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const LayerChoice& choice = arch.layers[l];
    auto it = std::find_if(layer.candidates.begin(), layer.candidates.end(),
                           [&](const CandidateBlock& c) {
                             return candidate_key(layer, c) == choice_key(choice);
                           });
    if (it == layer.candidates.end()) {
      throw InvariantError("layer " + std::to_string(l) + ": sampled candidate is not live");
    }
    CandidateBlock keep = *it;
    layer.candidates = {keep};
    if (keep.role != CandidateRole::kSkip) layer.skip = SkipState::kNone;
  }
}

double mean_ce(const SuperNet& net, const Dataset& data, Rng& rng) {
  double total = 0.0;
  const std::size_t chunk = 512;
  for (std::size_t i = 0; i < data.size(); i += chunk) {
    std::vector<std::size_t> rows(std::min(chunk, data.size() - i));
    std::iota(rows.begin(), rows.end(), i);
    const ForwardPass pass = supernet_forward(net, data.batch(rows), rng, SkipMultipliers{}, false);
    const auto labels = data.batch_labels(rows);
    total += softmax_cross_entropy(pass.logits, labels).item() * static_cast<double>(rows.size());
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

BigInt remaining_space(const SuperNet& net) {
  BigInt total = 1;
  for (const auto& layer : net.layers) {
    BigInt factor = 0;
    for (int g : layer.groups()) {
      const PrunodeMask* p = layer.prunode(g);
      if (p && layer.find(g, CandidateRole::kSmall) >= 0 && layer.find(g, CandidateRole::kLarge) >= 0 &&
          !p->mask.frozen()) {
        factor += layer.spec.max_hidden / layer.spec.granularity;
      } else if (p) {
        std::vector<int> widths;
        for (const auto& c : layer.candidates) {
          if (c.group == g) widths.push_back(c.mask_width);
        }
        std::sort(widths.begin(), widths.end());
        factor += static_cast<int>(std::unique(widths.begin(), widths.end()) - widths.begin());
      } else {
        factor += 1;
      }
    }
    // A skip can still be injected later.
    if (layer.spec.skippable && layer.skip == SkipState::kNone && layer.groups().size() > 1) {
      factor += 1;
    }
    total *= factor;
  }
  return total;
}

SampledArchitecture sample_final(const SuperNet& net) {
  SampledArchitecture arch;
  arch.config_hash = fingerprint(net.config);
  for (const auto& layer : net.layers) {
    const auto& cands = layer.candidates;
    const std::string where = "layer " + std::to_string(layer.spec.index);
    if (cands.empty()) throw InvariantError(where + " has no candidates");
    if (cands.size() > 2) {
      throw InvariantError(where + " still holds " + std::to_string(cands.size()) +
                           " candidates; pruning did not terminate");
    }
    const CandidateBlock* pick = &cands[0];
    if (cands.size() == 2) {
      if (cands[0].group != cands[1].group) {
        throw InvariantError(where + " still holds two distinct blocks");
      }
      const double t0 = cands[0].theta.value.item();
      const double t1 = cands[1].theta.value.item();
      if (t1 > t0 || (t1 == t0 && cands[1].mask_width < cands[0].mask_width)) pick = &cands[1];
    }
    LayerChoice choice;
    choice.stage = layer.spec.stage;
    choice.layer = layer.spec.index;
    if (pick->role == CandidateRole::kSkip) {
      choice.choice = "skip";
    } else {
      choice.choice = layer.spec.variants[pick->variant].id();
      choice.hidden = pick->mask_width;
    }
    arch.layers.push_back(std::move(choice));
  }
  return arch;
}

WarmupCheckpoint run_warmup(const SearchConfig& config, const SuperNetConfig& net_config,
                            const SearchData& data, const LatencyTable& lut) {
  validate(config);
  validate(net_config);
  check_complete(lut, net_config);
  if (data.psi.size() == 0 || data.theta.size() == 0) throw DataError("search data is empty");
  if (data.psi.dim != net_config.input_width) {
    throw ConfigError("dataset has " + std::to_string(data.psi.dim) +
                      " features, supernet input_width is " + std::to_string(net_config.input_width));
  }
  if (data.psi.classes > net_config.classes || data.theta.classes > net_config.classes) {
    throw ConfigError("dataset has more classes than the supernet head");
  }

  Rng rng(config.seed);
  WarmupCheckpoint cp{build_supernet(net_config, rng), {}, {}};
  std::size_t max_blocks = 0;
  for (const auto& layer : cp.net.layers) max_blocks = std::max(max_blocks, layer.groups().size());
  validate(config.threshold, max_blocks);

  const Dataset all = data.all();
  for (int epoch = 1; epoch <= config.threshold.e_warmup; ++epoch) {
    double ce = 0.0, total = 0.0;
    const Batches batches = make_batches(all.size(), config.batch_size, rng);
    for (const auto& rows : batches) {
      const StepResult r =
          guarded(cp.net, [&] { return forward_backward(cp.net, all, rows, rng, config, lut); });
      psi_step(cp.net, config.psi_optimizer);
      ce += r.ce;
      total += r.loss;
    }
    const double n = static_cast<double>(batches.size());
    cp.log.push_back({epoch, "warmup", ce / n, expected_latency(cp.net, lut), total / n,
                      cp.net.live_candidates(), std::nullopt});
  }
  clear_grads(cp.net);
  cp.rng_state = rng.state();
  return cp;
}

SearchResult run_search_from(const WarmupCheckpoint& checkpoint, const SearchConfig& config,
                             const SearchData& data, const LatencyTable& lut) {
  validate(config);
  SearchResult res;
  res.net = checkpoint.net.clone();
  res.log = checkpoint.log;
  SuperNet& net = res.net;
  check_complete(lut, net.config);
  Rng rng;
  rng.restore(checkpoint.rng_state);

  const int warm = config.threshold.e_warmup;
  const int search_epochs = config.threshold.e_total - warm;
  const std::size_t n_psi =
      (data.psi.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
  const std::size_t n_theta =
      (data.theta.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
  const double total_theta_steps = static_cast<double>(n_theta) * search_epochs;
  std::size_t theta_steps = 0;

  for (int epoch = warm + 1; epoch <= config.threshold.e_total; ++epoch) {
    double ce = 0.0, total = 0.0;
    std::size_t steps = 0;
    const Batches psi_batches = make_batches(data.psi.size(), config.batch_size, rng);
    const Batches theta_batches = make_batches(data.theta.size(), config.batch_size, rng);
    std::size_t next_theta = 0;
    for (std::size_t k = 0; k < psi_batches.size(); ++k) {
      StepResult r = guarded(net, [&] {
        return forward_backward(net, data.psi, psi_batches[k], rng, config, lut);
      });
      psi_step(net, config.psi_optimizer);
      ce += r.ce;
      total += r.loss;
      ++steps;
      // Spread the architecture steps evenly between the weight steps.
      while (next_theta < theta_batches.size() && next_theta * n_psi < (k + 1) * n_theta) {
        r = guarded(net, [&] {
          return forward_backward(net, data.theta, theta_batches[next_theta], rng, config, lut);
        });
        theta_step(net, config.theta_optimizer);
        ++theta_steps;
        walk_masks(net, std::min(1.0, theta_steps / total_theta_steps), config.signal, theta_steps,
                   res.masks);
        ce += r.ce;
        total += r.loss;
        ++steps;
        ++next_theta;
      }
    }
    const double t = threshold_at(config.threshold, epoch);
    PruningReport report;
    for (auto& layer : net.layers) prune_layer(layer, t, report);
    for (const auto& r : report.removed) {
      res.pruning.push_back({epoch, t, r.layer, r.block, "removed", r.probability});
    }
    for (int layer : report.injections) {
      res.pruning.push_back({epoch, t, layer, "skip", "injected", 0.0});
    }
    res.space_size.push_back(remaining_space(net));
    res.log.push_back({epoch, "search", ce / steps, expected_latency(net, lut), total / steps,
                       net.live_candidates(), t});
  }
  clear_grads(net);

  for (auto& layer : net.layers) {
    if (layer.groups().size() > 1) collapse_to_argmax(layer, group_costs(layer, lut));
  }
  SampledArchitecture arch = sample_final(net);
  apply_architecture(net, arch);
  arch.lat_us = final_latency(arch, lut);
  arch.ce = mean_ce(net, data.theta, rng);
  // An all-skip architecture can reach LAT <= 1 us, where the log-power term
  // is undefined; the term is reported as zero there.
  const double lat = config.loss_form == LossForm::kLogPower ? std::max(arch.lat_us, 1.0) : arch.lat_us;
  arch.lat_term = config.loss_form == LossForm::kLogPower
                      ? config.alpha * std::pow(std::log(lat), config.beta)
                      : config.alpha * std::pow(lat, config.beta);
  res.architecture = std::move(arch);
  return res;
}

SearchResult run_search(const SearchConfig& config, const SuperNetConfig& net_config,
                        const SearchData& data, const LatencyTable& lut) {
  return run_search_from(run_warmup(config, net_config, data, lut), config, data, lut);
}

RetrainResult retrain(const SampledArchitecture& arch, const SuperNetConfig& net_config,
                      const Dataset& train, const Dataset& val, const RetrainOptions& options) {
  validate_architecture(arch, net_config);
  if (options.epochs < 0) throw ConfigError("retrain epochs must be non-negative");
  if (options.batch_size <= 0) throw ConfigError("retrain batch size must be positive");
  if (train.size() == 0 || val.size() == 0) throw DataError("retrain data is empty");
  if (train.dim != net_config.input_width) {
    throw ConfigError("dataset has " + std::to_string(train.dim) +
                      " features, supernet input_width is " + std::to_string(net_config.input_width));
  }
  Rng rng(options.seed);
  SuperNet net = build_supernet(net_config, rng);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const LayerChoice& choice = arch.layers[l];
    CandidateBlock keep;
    if (choice.skipped()) {
      keep.role = CandidateRole::kSkip;
    } else {
      auto it = std::find_if(layer.candidates.begin(), layer.candidates.end(),
                             [&](const CandidateBlock& c) {
                               return layer.spec.variants[c.variant].id() == choice.choice;
                             });
      keep = *it;
      keep.role = CandidateRole::kFixed;
      keep.mask_width = choice.hidden;
    }
    layer.candidates = {keep};
    layer.prunodes.clear();
  }

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& rows : make_batches(train.size(), options.batch_size, rng)) {
      for (ParamSlot* p : net.psi_slots()) p->value.zero_grad();
      const ForwardPass pass = supernet_forward(net, train.batch(rows), rng, SkipMultipliers{}, false);
      const auto labels = train.batch_labels(rows);
      softmax_cross_entropy(pass.logits, labels).backward();
      psi_step(net, options.optimizer);
    }
  }

  std::size_t correct = 0;
  const std::size_t chunk = 512;
  for (std::size_t i = 0; i < val.size(); i += chunk) {
    std::vector<std::size_t> rows(std::min(chunk, val.size() - i));
    std::iota(rows.begin(), rows.end(), i);
    const ForwardPass pass = supernet_forward(net, val.batch(rows), rng, SkipMultipliers{}, false);
    const auto logits = pass.logits.values();
    const std::size_t k = pass.logits.cols();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = logits.subspan(r * k, k);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == val.labels[rows[r]]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(val.size()), options.epochs,
          options.seed};
}

int threads_from_env() {
  const char* v = std::getenv("DNAS_THREADS");
  if (!v || !*v) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

std::vector<GridRow> grid_search(const GridSpec& grid, const SearchConfig& base,
                                 const SuperNetConfig& net_config, const SearchData& data,
                                 const Dataset& val, const LatencyTable& lut) {
  if (grid.alphas.empty() || grid.lambdas.empty()) throw ConfigError("grid needs alpha and lambda values");
  const WarmupCheckpoint checkpoint = run_warmup(base, net_config, data, lut);

  std::vector<GridRow> rows;
  for (double a : grid.alphas) {
    for (double l : grid.lambdas) {
      GridRow row;
      row.alpha = a;
      row.lambda = l;
      row.phi = grid.phi;
      rows.push_back(std::move(row));
    }
  }

  auto run_one = [&](GridRow& row) {
    SearchConfig cfg = base;
    cfg.alpha = row.alpha;
    cfg.multipliers = {row.phi, row.lambda};
    row.result = run_search_from(checkpoint, cfg, data, lut);
    const auto& arch = row.result.architecture;
    row.loss = arch.ce + arch.lat_term;
    row.layers = arch.active_layers();
    row.lat_us = arch.lat_us;
    row.top1 = std::numeric_limits<double>::quiet_NaN();
    if (grid.retrain_epochs > 0) {
      RetrainOptions opt;
      opt.epochs = grid.retrain_epochs;
      opt.batch_size = base.batch_size;
      opt.optimizer = base.psi_optimizer;
      opt.seed = base.seed;
      row.top1 = retrain(arch, net_config, data.all(), val, opt).top1;
    }
  };

  const int threads = std::max(1, std::min<int>(grid.threads, static_cast<int>(rows.size())));
  if (threads == 1) {
    for (auto& row : rows) run_one(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
          try {
            run_one(rows[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::map<double, std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = best.find(rows[i].alpha);
    if (it == best.end() || rows[i].loss < rows[it->second].loss) best[rows[i].alpha] = i;
  }
  for (const auto& [alpha, i] : best) rows[i].selected = true;
  return rows;
}

std::string pareto_csv(const std::vector<GridRow>& rows) {
  std::string out = "alpha,lambda,phi,loss,layers,lat_us,top1,selected\n";
  for (const auto& r : rows) {
    out += fmt(r.alpha) + "," + fmt(r.lambda) + "," + fmt(r.phi) + "," + fmt(r.loss) + "," +
           std::to_string(r.layers) + "," + fmt(r.lat_us) + "," +
           (std::isnan(r.top1) ? std::string() : fmt(r.top1)) + "," + (r.selected ? "1" : "0") +
           "\n";
  }
  return out;
}

namespace {

json slot_to_json(const ParamSlot& p) {
  if (!p.value.defined()) return nullptr;
  const auto v = p.value.values();
  return {{"shape", p.value.shape()},
          {"values", std::vector<double>(v.begin(), v.end())},
          {"m1", p.first_moment},
          {"m2", p.second_moment},
          {"steps", p.steps}};
}

void slot_from_json(ParamSlot& p, const json& j, const std::string& where) {
  if (j.is_null() != !p.value.defined()) throw ConfigError("checkpoint: slot mismatch at " + where);
  if (j.is_null()) return;
  const auto shape = j.at("shape").get<Shape>();
  if (shape != p.value.shape()) throw ConfigError("checkpoint: shape mismatch at " + where);
  p.value = Tensor::parameter(shape, j.at("values").get<std::vector<double>>());
  p.first_moment = j.at("m1").get<std::vector<double>>();
  p.second_moment = j.at("m2").get<std::vector<double>>();
  p.steps = j.at("steps").get<std::int64_t>();
}

}  // namespace

std::string checkpoint_to_json(const WarmupCheckpoint& cp) {
  json layers = json::array();
  for (const auto& layer : cp.net.layers) {
    json weights = json::array();
    std::vector<const BlockWeights*> seen;
    json cands = json::array();
    for (const auto& c : layer.candidates) {
      cands.push_back({{"mask_width", c.mask_width}, {"theta", slot_to_json(c.theta)}});
      if (!c.weights || std::find(seen.begin(), seen.end(), c.weights.get()) != seen.end()) continue;
      seen.push_back(c.weights.get());
      const BlockWeights& w = *c.weights;
      weights.push_back({{"variant", c.variant},
                         {"w1", slot_to_json(w.w1)},
                         {"b1", slot_to_json(w.b1)},
                         {"se_w", slot_to_json(w.se_w)},
                         {"se_b", slot_to_json(w.se_b)},
                         {"w2", slot_to_json(w.w2)},
                         {"b2", slot_to_json(w.b2)}});
    }
    json masks = json::array();
    for (const auto& p : layer.prunodes) {
      const MaskState& m = p.mask;
      masks.push_back({{"group", p.group}, {"weight", m.weight}, {"update", m.update}, {"s", m.s},
                       {"l", m.l}, {"small_mask", m.small_mask}, {"large_mask", m.large_mask}});
    }
    layers.push_back({{"weights", weights}, {"candidates", cands}, {"masks", masks}});
  }
  json log = json::array();
  for (const auto& e : cp.log) {
    log.push_back({{"epoch", e.epoch}, {"ce", e.ce}, {"lat_us", e.lat_us}, {"loss", e.loss},
                   {"live_candidates", e.live_candidates}});
  }
  json doc = {{"config_hash", fingerprint(cp.net.config)},
              {"rng", cp.rng_state},
              {"head_w", slot_to_json(cp.net.head_w)},
              {"head_b", slot_to_json(cp.net.head_b)},
              {"layers", layers},
              {"log", log}};
  return doc.dump() + "\n";
}

WarmupCheckpoint checkpoint_from_json(const std::string& text, const SuperNetConfig& config) {
  try {
    const json doc = json::parse(text);
    if (doc.at("config_hash").get<std::string>() != fingerprint(config)) {
      throw ConfigError("checkpoint was written for a different supernet config");
    }
    Rng scratch(0);
    WarmupCheckpoint cp{build_supernet(config, scratch), doc.at("rng").get<std::string>(), {}};
    slot_from_json(cp.net.head_w, doc.at("head_w"), "head_w");
    slot_from_json(cp.net.head_b, doc.at("head_b"), "head_b");
    const json& layers = doc.at("layers");
    if (layers.size() != cp.net.layers.size()) throw ConfigError("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = cp.net.layers[l];
      const json& jl = layers[l];
      const std::string where = "layer " + std::to_string(l);
      const json& cands = jl.at("candidates");
      if (cands.size() != layer.candidates.size()) {
        throw ConfigError("checkpoint: candidate count mismatch at " + where);
      }
      for (std::size_t i = 0; i < cands.size(); ++i) {
        layer.candidates[i].mask_width = cands[i].at("mask_width").get<int>();
        slot_from_json(layer.candidates[i].theta, cands[i].at("theta"), where + " theta");
      }
      for (const json& jw : jl.at("weights")) {
        const int variant = jw.at("variant").get<int>();
        auto it = std::find_if(layer.candidates.begin(), layer.candidates.end(),
                               [&](const CandidateBlock& c) { return c.variant == variant; });
        if (it == layer.candidates.end()) throw ConfigError("checkpoint: unknown variant at " + where);
        BlockWeights& w = *it->weights;
        slot_from_json(w.w1, jw.at("w1"), where + " w1");
        slot_from_json(w.b1, jw.at("b1"), where + " b1");
        slot_from_json(w.se_w, jw.at("se_w"), where + " se_w");
        slot_from_json(w.se_b, jw.at("se_b"), where + " se_b");
        slot_from_json(w.w2, jw.at("w2"), where + " w2");
        slot_from_json(w.b2, jw.at("b2"), where + " b2");
      }
      for (const json& jm : jl.at("masks")) {
        PrunodeMask* p = layer.prunode(jm.at("group").get<int>());
        if (!p) throw ConfigError("checkpoint: unknown prunode at " + where);
        p->mask.weight = jm.at("weight").get<double>();
        p->mask.update = jm.at("update").get<double>();
        p->mask.s = jm.at("s").get<double>();
        p->mask.l = jm.at("l").get<double>();
        p->mask.small_mask = jm.at("small_mask").get<int>();
        p->mask.large_mask = jm.at("large_mask").get<int>();
      }
    }
    for (const json& e : doc.at("log")) {
      cp.log.push_back({e.at("epoch").get<int>(), "warmup", e.at("ce").get<double>(),
                        e.at("lat_us").get<double>(), e.at("loss").get<double>(),
                        e.at("live_candidates").get<std::size_t>(), std::nullopt});
    }
    return cp;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

namespace {

double positive(const toml::Table& t, std::string_view key, double fallback) {
  const double v = t.get_double(key, fallback);
  if (!(v > 0)) {
    const auto* val = t.find(key);
    throw ConfigError(std::string(key) + " must be positive", val ? val->line : 0);
  }
  return v;
}

}  // namespace

SearchConfig search_config_from(const toml::Document& doc, SearchConfig c) {
  const toml::Table* t = doc.table("search");
  if (!t) return c;
  t->expect_only({"alpha", "beta", "phi", "lambda", "threshold", "t_initial", "t_final", "e_warmup",
                  "e_total", "batch_size", "theta_split", "theta_lr", "psi_lr", "loss", "signal",
                  "seed"},
                 "search");
  c.alpha = t->get_double("alpha", c.alpha);
  if (c.alpha < 0) throw ConfigError("alpha must be non-negative", t->at("alpha").line);
  c.beta = positive(*t, "beta", c.beta);
  c.multipliers.phi = positive(*t, "phi", c.multipliers.phi);
  c.multipliers.lambda = positive(*t, "lambda", c.multipliers.lambda);
  if (const auto* v = t->find("threshold")) {
    const std::string& kind = v->as_string("threshold");
    if (kind == "linear") {
      c.threshold.kind = ThresholdPolicy::Kind::kLinear;
    } else if (kind == "constant") {
      c.threshold.kind = ThresholdPolicy::Kind::kConstant;
    } else {
      throw ConfigError("threshold must be \"linear\" or \"constant\"", v->line);
    }
  }
  c.threshold.t_initial = t->get_double("t_initial", c.threshold.t_initial);
  c.threshold.t_final = t->get_double("t_final", c.threshold.t_final);
  c.threshold.e_warmup = static_cast<int>(t->get_int("e_warmup", c.threshold.e_warmup));
  c.threshold.e_total = static_cast<int>(t->get_int("e_total", c.threshold.e_total));
  c.batch_size = static_cast<int>(t->get_int("batch_size", c.batch_size));
  c.theta_split = t->get_double("theta_split", c.theta_split);
  c.theta_optimizer.lr = positive(*t, "theta_lr", c.theta_optimizer.lr);
  c.psi_optimizer.lr = positive(*t, "psi_lr", c.psi_optimizer.lr);
  if (const auto* v = t->find("loss")) {
    const std::string& form = v->as_string("loss");
    if (form == "log-power") {
      c.loss_form = LossForm::kLogPower;
    } else if (form == "power") {
      c.loss_form = LossForm::kPower;
    } else {
      throw ConfigError("loss must be \"log-power\" or \"power\"", v->line);
    }
  }
  if (const auto* v = t->find("signal")) {
    const std::string& s = v->as_string("signal");
    if (s == "theta") {
      c.signal = SignalKind::kTheta;
    } else if (s == "probability") {
      c.signal = SignalKind::kProbability;
    } else {
      throw ConfigError("signal must be \"theta\" or \"probability\"", v->line);
    }
  }
  c.seed = static_cast<std::uint64_t>(t->get_int("seed", static_cast<std::int64_t>(c.seed)));
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), t->line);
  }
  return c;
}

}  // namespace dnas
