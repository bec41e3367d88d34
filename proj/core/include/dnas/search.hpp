// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Bilevel search driver: warmup of the network weights, then alternating
// weight / architecture steps with Prunode mask walks and per-epoch block
// pruning, followed by sampling and retraining of the final architecture.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnas/architecture.hpp"
#include "dnas/dataset.hpp"
#include "dnas/error.hpp"
#include "dnas/latency.hpp"
#include "dnas/pruning.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

namespace toml {
class Document;
}

enum class LossForm {
  kLogPower,  // CE + alpha * (ln LAT)^beta
  kPower,     // CE + alpha * LAT^beta
};

enum class SignalKind {
  kTheta,        // theta_large - theta_small
  kProbability,  // p_large - p_small (noise-free softmax over the layer)
};

struct SearchConfig {
  double alpha = 1.0;
  double beta = 0.6;
  SkipMultipliers multipliers;
  ThresholdPolicy threshold;  // also holds e_warmup and e_total
  int batch_size = 64;
  double theta_split = 0.2;  // share of the training rows used for theta steps
  AdamSettings theta_optimizer;
  RmspropSettings psi_optimizer;
  LossForm loss_form = LossForm::kLogPower;
  SignalKind signal = SignalKind::kTheta;
  std::uint64_t seed = 1;
};

// Throws ConfigError.
void validate(const SearchConfig& config);

Tensor loss(const Tensor& ce, const Tensor& lat, double alpha, double beta, LossForm form);

struct EpochLog {
  int epoch = 0;
  std::string phase;  // "warmup" | "search"
  double ce = 0.0;
  double lat_us = 0.0;  // expected latency at epoch end
  double loss = 0.0;
  std::size_t live_candidates = 0;
  std::optional<double> threshold;
};

std::string search_log_csv(const std::vector<EpochLog>& log);

// Raised when a loss turns non-finite; carries theta and mask states.
class SearchAborted : public EngineError {
 public:
  SearchAborted(const std::string& what, std::string snapshot)
      : EngineError(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const { return snapshot_; }

 private:
  std::string snapshot_;
};

// Rows of the training set assigned to weight and architecture steps.
struct SearchData {
  Dataset psi;
  Dataset theta;
  Dataset all() const;
};

SearchData split_search_data(const Dataset& train, double theta_split, std::uint64_t seed);

// State after the warmup epochs; shared by every grid variant.
struct WarmupCheckpoint {
  SuperNet net;
  std::string rng_state;
  std::vector<EpochLog> log;

  WarmupCheckpoint clone() const;
};

std::string checkpoint_to_json(const WarmupCheckpoint& checkpoint);
WarmupCheckpoint checkpoint_from_json(const std::string& text, const SuperNetConfig& config);

// Builds the SuperNet from the seed and trains psi only for e_warmup epochs.
// Alpha and the skip multipliers do not influence the result.
WarmupCheckpoint run_warmup(const SearchConfig& config, const SuperNetConfig& net_config,
                            const SearchData& data, const LatencyTable& lut);

struct PruningEvent {
  int epoch = 0;
  double threshold = 0.0;
  int layer = 0;
  std::string block;  // variant id or "skip"
  std::string event;  // "removed" | "injected"
  double probability = 0.0;
};

std::string pruning_log_csv(const std::vector<PruningEvent>& events);

// One Prunode mask walk step.
struct MaskTrace {
  std::size_t iteration = 0;  // architecture step, 1-based
  double progress = 0.0;
  int layer = 0;
  int group = 0;
  double s = 0.0;
  double l = 0.0;
  int small_mask = 0;
  int large_mask = 0;
};

std::string mask_log_csv(const std::vector<MaskTrace>& trace);

struct SearchResult {
  SampledArchitecture architecture;
  std::vector<EpochLog> log;
  std::vector<PruningEvent> pruning;
  std::vector<MaskTrace> masks;
  std::vector<BigInt> space_size;  // after each search epoch
  SuperNet net;                    // every layer a singleton
};

// Phase two from a warmup checkpoint.
SearchResult run_search_from(const WarmupCheckpoint& checkpoint, const SearchConfig& config,
                             const SearchData& data, const LatencyTable& lut);

SearchResult run_search(const SearchConfig& config, const SuperNetConfig& net_config,
                        const SearchData& data, const LatencyTable& lut);

// Per layer: the sole survivor, or the argmax-theta member of a Prunode pair
// (ties go to the lower width). Throws InvariantError for a layer holding more
// than two candidates or two candidates from different blocks.
SampledArchitecture sample_final(const SuperNet& net);

// Members of the search space still reachable from the SuperNet state.
BigInt remaining_space(const SuperNet& net);

struct RetrainOptions {
  int epochs = 20;
  int batch_size = 64;
  RmspropSettings optimizer;
  std::uint64_t seed = 1;
};

struct RetrainResult {
  double top1 = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
};

// Fresh weights for `arch`, plain supervised training on `train`, top-1 on `val`.
RetrainResult retrain(const SampledArchitecture& arch, const SuperNetConfig& net_config,
                      const Dataset& train, const Dataset& val, const RetrainOptions& options);

struct GridSpec {
  std::vector<double> alphas;
  std::vector<double> lambdas;
  double phi = 1.1;
  int retrain_epochs = 0;  // 0 skips retraining (top1 reported as NaN)
  int threads = 1;
};

struct GridRow {
  double alpha = 0.0;
  double lambda = 0.0;
  double phi = 0.0;
  double loss = 0.0;
  std::size_t layers = 0;
  double lat_us = 0.0;
  double top1 = 0.0;
  bool selected = false;  // minimal loss among the rows sharing this alpha
  SearchResult result;
};

std::vector<GridRow> grid_search(const GridSpec& grid, const SearchConfig& base,
                                 const SuperNetConfig& net_config, const SearchData& data,
                                 const Dataset& val, const LatencyTable& lut);

std::string pareto_csv(const std::vector<GridRow>& rows);

// Thread count from DNAS_THREADS (default 1).
int threads_from_env();

// [search] table of a config file; absent keys keep `defaults`.
SearchConfig search_config_from(const toml::Document& doc, SearchConfig defaults = {});

}  // namespace dnas
