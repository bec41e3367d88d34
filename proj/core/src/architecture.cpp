// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/architecture.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dnas/error.hpp"
#include "json.hpp"

namespace dnas {

using nlohmann::json;

namespace {

double round_sig(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

// Candidate choices of one layer in a fixed order: variants, widths, skip.
std::vector<LayerChoice> layer_options(const LayerSpec& layer) {
  std::vector<LayerChoice> out;
  for (const auto& v : layer.variants) {
    if (layer.kind == BlockKind::kConv) {
      out.push_back({layer.stage, layer.index, v.id(), 0});
    } else if (v.prunable) {
      for (int h = layer.granularity; h <= layer.max_hidden; h += layer.granularity) {
        out.push_back({layer.stage, layer.index, v.id(), h});
      }
    } else {
      out.push_back({layer.stage, layer.index, v.id(), layer.max_hidden});
    }
  }
  if (layer.skippable) out.push_back({layer.stage, layer.index, "skip", 0});
  return out;
}

}  // namespace

std::size_t SampledArchitecture::active_layers() const {
  return static_cast<std::size_t>(
      std::count_if(layers.begin(), layers.end(), [](const LayerChoice& c) { return !c.skipped(); }));
}

std::string to_json(const SampledArchitecture& arch) {
  json layers = json::array();
  for (const auto& c : arch.layers) {
    layers.push_back({{"stage", c.stage}, {"layer", c.layer}, {"choice", c.choice}, {"hidden", c.hidden}});
  }
  json doc = {{"layers", layers},
              {"lat_us", round_sig(arch.lat_us)},
              {"loss", {{"ce", round_sig(arch.ce)}, {"lat", round_sig(arch.lat_term)}}},
              {"config_hash", arch.config_hash}};
  return doc.dump(2) + "\n";
}

SampledArchitecture architecture_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    SampledArchitecture arch;
    for (const json& l : doc.at("layers")) {
      arch.layers.push_back({l.at("stage").get<int>(), l.at("layer").get<int>(),
                             l.at("choice").get<std::string>(), l.at("hidden").get<int>()});
    }
    arch.lat_us = doc.at("lat_us").get<double>();
    arch.ce = doc.at("loss").at("ce").get<double>();
    arch.lat_term = doc.at("loss").at("lat").get<double>();
    arch.config_hash = doc.at("config_hash").get<std::string>();
    return arch;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed architecture file: ") + e.what());
  }
}

void save_architecture(const SampledArchitecture& arch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write architecture '" + path + "'");
  out << to_json(arch);
}

SampledArchitecture load_architecture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open architecture '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return architecture_from_json(ss.str());
}

void validate_architecture(const SampledArchitecture& arch, const SuperNetConfig& config) {
  const std::string hash = fingerprint(config);
  if (arch.config_hash != hash) {
    throw ConfigError("architecture was searched on config " + arch.config_hash +
                      ", this config is " + hash);
  }
  const auto layers = expand_layers(config);
  if (arch.layers.size() != layers.size()) {
    throw ConfigError("architecture has " + std::to_string(arch.layers.size()) +
                      " layers, config has " + std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerChoice& c = arch.layers[i];
    const auto options = layer_options(layers[i]);
    if (std::find(options.begin(), options.end(), c) == options.end()) {
      throw ConfigError("layer " + std::to_string(i) + ": choice '" + c.choice + "' with hidden " +
                        std::to_string(c.hidden) + " is not in the search space");
    }
  }
}

LatencyKey choice_key(const LayerChoice& c) { return {c.layer, c.choice, c.hidden}; }

double final_latency(const SampledArchitecture& arch, const LatencyTable& lut) {
  double total = 0.0;
  for (const auto& c : arch.layers) total += lut.at(choice_key(c));
  return total;
}

std::vector<SampledArchitecture> enumerate_space(const SuperNetConfig& config,
                                                 const LatencyTable& lut, std::size_t limit) {
  const BigInt size = count_search_space(config);
  if (size > limit) {
    throw ConfigError("search space holds " + size.str() + " members, enumeration limit is " +
                      std::to_string(limit));
  }
  std::vector<std::vector<LayerChoice>> options;
  for (const auto& layer : expand_layers(config)) options.push_back(layer_options(layer));
  const std::string hash = fingerprint(config);
  std::vector<SampledArchitecture> out;
  std::vector<std::size_t> digit(options.size(), 0);
  while (true) {
    SampledArchitecture arch;
    arch.config_hash = hash;
    for (std::size_t l = 0; l < options.size(); ++l) arch.layers.push_back(options[l][digit[l]]);
    arch.lat_us = final_latency(arch, lut);
    out.push_back(std::move(arch));
    std::size_t l = 0;
    while (l < digit.size() && ++digit[l] == options[l].size()) digit[l++] = 0;
    if (l == digit.size()) break;
  }
  return out;
}

}  // namespace dnas
