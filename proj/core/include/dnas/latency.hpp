// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Latency lookup table: per-block latency (us) keyed by layer, variant and
// hidden width, plus the differentiable expected latency of a SuperNet.

#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dnas/supernet.hpp"

namespace dnas {

struct LatencyKey {
  int layer = 0;
  std::string variant;  // VariantSpec::id(), or "skip"
  int hidden = 0;       // mask width; 0 for conv-like blocks and skips

  auto operator<=>(const LatencyKey&) const = default;
};

std::string to_string(const LatencyKey& key);

struct LatencyMetadata {
  std::string mode;  // "analytic" | "measured"
  int granularity = 0;
  double unit_cost = 0.0;  // analytic: us per multiply-accumulate
  double overhead = 0.0;   // analytic: fixed us per block
  int repeats = 0;         // measured
  std::string host;        // measured only
  std::string timestamp;   // measured only
  std::vector<std::string> warnings;
};

class LatencyTable {
 public:
  LatencyTable() = default;
  explicit LatencyTable(LatencyMetadata metadata) : metadata_(std::move(metadata)) {}

  const LatencyMetadata& metadata() const { return metadata_; }
  LatencyMetadata& metadata() { return metadata_; }
  const std::map<LatencyKey, double>& entries() const { return entries_; }

  void set(const LatencyKey& key, double us) { entries_[key] = us; }
  bool contains(const LatencyKey& key) const { return entries_.count(key) != 0; }
  // Throws LatencyTableError naming the key.
  double at(const LatencyKey& key) const;

  // JSON document {"metadata": {...}, "entries": [...]}, keys sorted, floats
  // rounded to 9 significant digits.
  std::string to_json() const;
  static LatencyTable from_json(const std::string& text);
  void save(const std::string& path) const;
  static LatencyTable load(const std::string& path);

 private:
  LatencyMetadata metadata_;
  std::map<LatencyKey, double> entries_;
};

// Multiply-accumulate count of one block at the given hidden width.
double block_macs(const LayerSpec& layer, const VariantSpec& variant, int hidden);

// Every key a complete table must hold for `config`.
std::vector<LatencyKey> required_keys(const SuperNetConfig& config);

LatencyTable build_analytic(const SuperNetConfig& config, double unit_cost, double overhead = 1.0);

struct MeasureOptions {
  int repeats = 9;
  int warmup_runs = 3;
  double min_sample_us = 200.0;  // inner loop grows until one sample takes this long
  std::uint64_t seed = 0;
};

// Median wall-clock latency of each block forward at batch size 1. Must run
// single-threaded.
LatencyTable build_measured(const SuperNetConfig& config, const MeasureOptions& options);

// Throws LatencyTableError listing every missing key.
void check_complete(const LatencyTable& lut, const SuperNetConfig& config);

LatencyKey candidate_key(const StochasticLayer& layer, const CandidateBlock& candidate);

// Per-candidate latencies of one layer, in candidate order.
std::vector<double> candidate_latencies(const StochasticLayer& layer, const LatencyTable& lut);

// sum_l sum_i a_{l,i} * LAT(B_{l,i}); differentiable in the coefficients.
Tensor total_latency(const SuperNet& net, std::span<const Tensor> coefficients,
                     const LatencyTable& lut);

}  // namespace dnas
