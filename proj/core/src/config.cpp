// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "dnas/error.hpp"
#include "dnas/toml_lite.hpp"

namespace dnas {

std::string_view to_string(BlockKind kind) {
  return kind == BlockKind::kConv ? "conv" : "irb";
}

int max_hidden_width(const SuperNetConfig& config, int in_channels) {
  const double raw = config.max_expansion * in_channels / config.granularity;
  // The epsilon absorbs representation error in products like 8.0 * 24 / 32.
  const int units = static_cast<int>(std::floor(raw + 1e-9));
  return units * config.granularity;
}

void validate(const SuperNetConfig& c) {
  if (c.stages.empty()) throw ConfigError("supernet has no stages");
  if (c.input_width <= 0) throw ConfigError("input_width must be positive");
  if (c.classes <= 0) throw ConfigError("classes must be positive");
  if (c.granularity <= 0) throw ConfigError("granularity must be positive");
  if (!(c.max_expansion > 0)) throw ConfigError("max_expansion must be positive");
  if (!(c.tau > 0)) throw ConfigError("tau must be positive");

  int in = c.input_width;
  for (std::size_t s = 0; s < c.stages.size(); ++s) {
    const StageSpec& st = c.stages[s];
    const std::string where = "stage " + std::to_string(s);
    if (st.layers <= 0) throw ConfigError(where + ": layers must be positive", st.line);
    if (st.filters <= 0) throw ConfigError(where + ": filters must be positive", st.line);
    if (st.variants.empty()) throw ConfigError(where + ": needs at least one variant", st.line);
    if (static_cast<int>(st.skippable.size()) != st.layers) {
      throw ConfigError(where + ": skippable has " + std::to_string(st.skippable.size()) +
                            " flags for " + std::to_string(st.layers) + " layers",
                        st.line);
    }
    std::set<std::string> ids;
    for (const auto& v : st.variants) {
      if (v.kernel.empty()) throw ConfigError(where + ": empty kernel tag", st.line);
      if (v.kernel == "skip") throw ConfigError(where + ": 'skip' is a reserved tag", st.line);
      if (!ids.insert(v.id()).second) {
        throw ConfigError(where + ": duplicate variant '" + v.id() + "'", st.line);
      }
      if (st.kind == BlockKind::kConv && (v.se || v.prunable)) {
        throw ConfigError(where + ": conv variants take neither SE nor a prunable width", st.line);
      }
    }
    for (int l = 0; l < st.layers; ++l) {
      const int layer_in = l == 0 ? in : st.filters;
      if (st.skippable[l] && layer_in != st.filters) {
        throw ConfigError(where + " layer " + std::to_string(l) +
                              ": only shape-preserving layers can be skippable (" +
                              std::to_string(layer_in) + " -> " + std::to_string(st.filters) + ")",
                          st.line);
      }
      if (st.kind == BlockKind::kInvertedBottleneck) {
        const int hidden = max_hidden_width(c, layer_in);
        if (hidden < c.granularity) {
          throw ConfigError(where + " layer " + std::to_string(l) + ": maximal hidden width " +
                                "is below granularity " + std::to_string(c.granularity),
                            st.line);
        }
        for (const auto& v : st.variants) {
          if (v.prunable && hidden < 2 * c.granularity) {
            throw ConfigError(where + " layer " + std::to_string(l) + ": variant '" + v.id() +
                                  "' is prunable but hidden width " + std::to_string(hidden) +
                                  " leaves no room for two masks",
                              st.line);
          }
        }
      }
    }
    in = st.filters;
  }
}

std::vector<LayerSpec> expand_layers(const SuperNetConfig& c) {
  std::vector<LayerSpec> layers;
  int in = c.input_width;
  int index = 0;
  for (std::size_t s = 0; s < c.stages.size(); ++s) {
    const StageSpec& st = c.stages[s];
    for (int l = 0; l < st.layers; ++l) {
      LayerSpec spec;
      spec.index = index++;
      spec.stage = static_cast<int>(s);
      spec.position = l;
      spec.kind = st.kind;
      spec.in = l == 0 ? in : st.filters;
      spec.out = st.filters;
      spec.skippable = st.skippable[l];
      spec.activation = st.activation;
      spec.variants = st.variants;
      spec.max_hidden = st.kind == BlockKind::kConv ? 0 : max_hidden_width(c, spec.in);
      spec.granularity = c.granularity;
      layers.push_back(std::move(spec));
    }
    in = st.filters;
  }
  return layers;
}

int hidden_value_count(const LayerSpec& layer, const VariantSpec& variant, int granularity) {
  if (layer.kind == BlockKind::kConv || !variant.prunable) return 1;
  return layer.max_hidden / granularity;
}

std::vector<BigInt> layer_factors(const SuperNetConfig& c) {
  validate(c);
  std::vector<BigInt> factors;
  for (const auto& layer : expand_layers(c)) {
    BigInt f = 0;
    for (const auto& v : layer.variants) f += hidden_value_count(layer, v, c.granularity);
    if (layer.skippable) f += 1;
    factors.push_back(f);
  }
  return factors;
}

BigInt count_search_space(const SuperNetConfig& c) {
  BigInt total = 1;
  for (const auto& f : layer_factors(c)) total *= f;
  return total;
}

std::string approx_scientific(const BigInt& value) {
  if (value < 0) return "-" + approx_scientific(-value);
  std::string digits = value.str();
  if (digits == "0") return "0";
  // Round to two significant digits, half away from zero.
  int exponent = static_cast<int>(digits.size()) - 1;
  int lead = digits[0] - '0';
  int second = digits.size() > 1 ? digits[1] - '0' : 0;
  const int third = digits.size() > 2 ? digits[2] - '0' : 0;
  if (third >= 5) {
    if (++second == 10) {
      second = 0;
      if (++lead == 10) {
        lead = 1;
        ++exponent;
      }
    }
  }
  std::string out = std::to_string(lead);
  if (second != 0) out += "." + std::to_string(second);
  return out + "e" + std::to_string(exponent);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string canonical_text(const SuperNetConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "input_width=" << c.input_width << ";classes=" << c.classes
     << ";granularity=" << c.granularity << ";max_expansion=" << c.max_expansion
     << ";tau=" << c.tau << '\n';
  for (const auto& st : c.stages) {
    os << "stage kind=" << to_string(st.kind) << ";layers=" << st.layers
       << ";filters=" << st.filters << ";activation=" << to_string(st.activation) << ";skippable=";
    for (bool b : st.skippable) os << (b ? '1' : '0');
    os << ";variants=";
    for (const auto& v : st.variants) os << v.id() << (v.prunable ? "+p" : "") << ',';
    os << '\n';
  }
  return os.str();
}

std::string fingerprint(const SuperNetConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
  return buf;
}

namespace {

BlockKind parse_kind(const toml::Value& v) {
  const std::string& s = v.as_string("kind");
  if (s == "conv") return BlockKind::kConv;
  if (s == "irb" || s == "inverted-bottleneck") return BlockKind::kInvertedBottleneck;
  throw ConfigError("unknown block kind '" + s + "'", v.line);
}

}  // namespace

SuperNetConfig supernet_config_from(const toml::Document& doc) {
  SuperNetConfig c;
  const toml::Table* net = doc.table("supernet");
  if (!net) throw ConfigError("missing [supernet] table");
  net->expect_only({"input_width", "classes", "granularity", "max_expansion", "tau"}, "supernet");
  c.input_width = static_cast<int>(net->at("input_width").as_int("input_width"));
  c.classes = static_cast<int>(net->at("classes").as_int("classes"));
  c.granularity = static_cast<int>(net->get_int("granularity", 32));
  c.max_expansion = net->get_double("max_expansion", 8.0);
  c.tau = net->get_double("tau", 1.0);

  for (const toml::Table& t : doc.table_array("stage")) {
    t.expect_only({"kind", "layers", "filters", "activation", "kernels", "se", "prunable",
                   "skippable"},
                  "[stage]");
    StageSpec st;
    st.line = t.line;
    st.kind = parse_kind(t.at("kind"));
    st.layers = static_cast<int>(t.at("layers").as_int("layers"));
    st.filters = static_cast<int>(t.at("filters").as_int("filters"));
    if (const auto* a = t.find("activation")) {
      try {
        st.activation = parse_activation(a->as_string("activation"));
      } catch (const ConfigError& e) {
        throw ConfigError(e.what(), a->line);
      }
    }
    std::vector<std::string> kernels;
    for (const auto& k : t.at("kernels").as_array("kernels")) {
      kernels.push_back(k.as_string("kernels"));
    }
    std::vector<bool> se_options{false};
    if (const auto* se = t.find("se")) {
      se_options.clear();
      for (const auto& b : se->as_array("se")) se_options.push_back(b.as_bool("se"));
    }
    const bool prunable = t.get_bool("prunable", st.kind == BlockKind::kInvertedBottleneck);
    for (const auto& k : kernels) {
      for (bool se : se_options) st.variants.push_back(VariantSpec{k, se, prunable});
    }
    if (const auto* sk = t.find("skippable")) {
      for (const auto& b : sk->as_array("skippable")) st.skippable.push_back(b.as_bool("skippable"));
    } else {
      st.skippable.assign(st.layers, false);
    }
    c.stages.push_back(std::move(st));
  }
  validate(c);
  return c;
}

}  // namespace dnas
