// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Declarative SuperNet search space and the exact candidate count it spans.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas {

namespace toml {
class Document;
}

using BigInt = boost::multiprecision::cpp_int;

enum class BlockKind {
  kConv,                // linear + activation (+ residual)
  kInvertedBottleneck,  // expand -> mask -> activation -> [SE] -> project (+ residual)
};

std::string_view to_string(BlockKind kind);

struct VariantSpec {
  std::string kernel;  // opaque tag: variants with different tags own separate weights
  bool se = false;
  bool prunable = false;  // hidden width searched by a Prunode

  // Stable identity used in latency tables and architecture files.
  std::string id() const { return se ? kernel + "_se" : kernel; }
};

struct StageSpec {
  BlockKind kind = BlockKind::kInvertedBottleneck;
  int layers = 1;
  std::vector<bool> skippable;  // one flag per layer
  std::vector<VariantSpec> variants;
  int filters = 0;
  Activation activation = Activation::kSwish;
  int line = 0;  // source line of the [[stage]] header, 0 if built in code
};

struct SuperNetConfig {
  std::vector<StageSpec> stages;
  int input_width = 0;  // channels entering the first stage
  int classes = 0;
  int granularity = 32;
  double max_expansion = 8.0;
  double tau = 1.0;
};

// One searchable layer after expanding stages.
struct LayerSpec {
  int index = 0;     // global layer index
  int stage = 0;     // stage index in the config
  int position = 0;  // layer index within its stage
  BlockKind kind = BlockKind::kInvertedBottleneck;
  int in = 0;
  int out = 0;
  bool skippable = false;
  Activation activation = Activation::kSwish;
  std::vector<VariantSpec> variants;
  int max_hidden = 0;  // 0 for conv-like layers
  int granularity = 0;

  bool residual() const { return in == out; }
};

// Throws ConfigError (line-anchored when the stage came from a file).
void validate(const SuperNetConfig& config);
std::vector<LayerSpec> expand_layers(const SuperNetConfig& config);

// floor(max_expansion * in / granularity) * granularity.
int max_hidden_width(const SuperNetConfig& config, int in_channels);

// Number of distinct hidden widths a variant can take in a layer.
int hidden_value_count(const LayerSpec& layer, const VariantSpec& variant, int granularity);

// Per-layer factor: sum over variants of hidden_value_count, +1 if skippable.
std::vector<BigInt> layer_factors(const SuperNetConfig& config);
BigInt count_search_space(const SuperNetConfig& config);

// "1.7e39"-style two-significant-digit rendering (trailing ".0" dropped).
std::string approx_scientific(const BigInt& value);

// FNV-1a over a canonical rendering of the config.
std::string fingerprint(const SuperNetConfig& config);
std::string canonical_text(const SuperNetConfig& config);

// Reads [supernet] and [[stage]] from a parsed config file and validates.
SuperNetConfig supernet_config_from(const toml::Document& doc);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dnas
