// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// The single architecture sampled at the end of a search.

#pragma once

#include <string>
#include <vector>

#include "dnas/config.hpp"
#include "dnas/latency.hpp"

namespace dnas {

struct LayerChoice {
  int stage = 0;
  int layer = 0;       // global layer index
  std::string choice;  // variant id, or "skip"
  int hidden = 0;      // 0 for conv-like blocks and skips

  bool skipped() const { return choice == "skip"; }
  bool operator==(const LayerChoice&) const = default;
};

struct SampledArchitecture {
  std::vector<LayerChoice> layers;
  double lat_us = 0.0;
  double ce = 0.0;        // final cross-entropy of the search
  double lat_term = 0.0;  // final latency term of the search loss
  std::string config_hash;

  std::size_t active_layers() const;
  bool operator==(const SampledArchitecture&) const = default;
};

// {"layers": [{stage, layer, choice, hidden}], "lat_us", "loss": {ce, lat}, "config_hash"}
std::string to_json(const SampledArchitecture& arch);
SampledArchitecture architecture_from_json(const std::string& text);
void save_architecture(const SampledArchitecture& arch, const std::string& path);
SampledArchitecture load_architecture(const std::string& path);

// Throws ConfigError when the architecture is not a member of the space the
// config declares (fingerprint, layer count, variants, widths, skips).
void validate_architecture(const SampledArchitecture& arch, const SuperNetConfig& config);

LatencyKey choice_key(const LayerChoice& choice);
double final_latency(const SampledArchitecture& arch, const LatencyTable& lut);

// Every member of the space with its latency; throws ConfigError when the
// space holds more than `limit` members.
std::vector<SampledArchitecture> enumerate_space(const SuperNetConfig& config,
                                                 const LatencyTable& lut,
                                                 std::size_t limit = 100000);

}  // namespace dnas
