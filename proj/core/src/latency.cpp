// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/latency.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dnas/error.hpp"
#include "json.hpp"

namespace dnas {

using nlohmann::json;

namespace {

double round_sig9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline void do_not_optimize(const double& value) { asm volatile("" : : "g"(value) : "memory"); }

std::string host_description() {
  char name[256] = {0};
  if (gethostname(name, sizeof name - 1) != 0) std::snprintf(name, sizeof name, "unknown");
  std::string desc = name;
  std::ifstream cpu("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpu, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) desc += " /" + line.substr(colon + 1);
      break;
    }
  }
  return desc;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string to_string(const LatencyKey& key) {
  return "(layer " + std::to_string(key.layer) + ", " + key.variant + ", hidden " +
         std::to_string(key.hidden) + ")";
}

double LatencyTable::at(const LatencyKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw LatencyTableError("latency table has no entry for " + to_string(key));
  return it->second;
}

std::string LatencyTable::to_json() const {
  json meta = json::object();
  meta["mode"] = metadata_.mode;
  meta["granularity"] = metadata_.granularity;
  if (metadata_.mode == "analytic") {
    meta["unit_cost"] = round_sig9(metadata_.unit_cost);
    meta["overhead"] = round_sig9(metadata_.overhead);
  } else {
    meta["repeats"] = metadata_.repeats;
    meta["host"] = metadata_.host;
    meta["timestamp"] = metadata_.timestamp;
  }
  meta["warnings"] = metadata_.warnings;
  json entries = json::array();
  for (const auto& [key, us] : entries_) {
    entries.push_back({{"layer", key.layer},
                       {"variant", key.variant},
                       {"hidden", key.hidden},
                       {"lat_us", round_sig9(us)}});
  }
  json doc = {{"metadata", meta}, {"entries", entries}};
  return doc.dump(2) + "\n";
}

LatencyTable LatencyTable::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw LatencyTableError(std::string("latency table is not valid JSON: ") + e.what());
  }
  try {
    LatencyMetadata meta;
    const json& m = doc.at("metadata");
    meta.mode = m.at("mode").get<std::string>();
    meta.granularity = m.value("granularity", 0);
    meta.unit_cost = m.value("unit_cost", 0.0);
    meta.overhead = m.value("overhead", 0.0);
    meta.repeats = m.value("repeats", 0);
    meta.host = m.value("host", std::string());
    meta.timestamp = m.value("timestamp", std::string());
    meta.warnings = m.value("warnings", std::vector<std::string>{});
    LatencyTable lut(std::move(meta));
    for (const json& e : doc.at("entries")) {
      LatencyKey key{e.at("layer").get<int>(), e.at("variant").get<std::string>(),
                     e.at("hidden").get<int>()};
      const double us = e.at("lat_us").get<double>();
      if (!(us >= 0)) throw LatencyTableError("negative latency for " + to_string(key));
      lut.set(key, us);
    }
    return lut;
  } catch (const json::exception& e) {
    throw LatencyTableError(std::string("malformed latency table: ") + e.what());
  }
}

void LatencyTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write latency table '" + path + "'");
  out << to_json();
  if (!out) throw Error("failed writing latency table '" + path + "'");
}

LatencyTable LatencyTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LatencyTableError("cannot open latency table '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double block_macs(const LayerSpec& layer, const VariantSpec& variant, int hidden) {
  if (layer.kind == BlockKind::kConv) return static_cast<double>(layer.in) * layer.out;
  double macs = static_cast<double>(layer.in) * hidden + static_cast<double>(hidden) * layer.out;
  if (variant.se) macs += 2.0 * hidden;  // squeeze mean + gating multiply
  return macs;
}

std::vector<LatencyKey> required_keys(const SuperNetConfig& config) {
  std::vector<LatencyKey> keys;
  for (const auto& layer : expand_layers(config)) {
    for (const auto& v : layer.variants) {
      if (layer.kind == BlockKind::kConv) {
        keys.push_back({layer.index, v.id(), 0});
      } else if (v.prunable) {
        for (int h = config.granularity; h <= layer.max_hidden; h += config.granularity) {
          keys.push_back({layer.index, v.id(), h});
        }
      } else {
        keys.push_back({layer.index, v.id(), layer.max_hidden});
      }
    }
    if (layer.skippable) keys.push_back({layer.index, "skip", 0});
  }
  return keys;
}

LatencyTable build_analytic(const SuperNetConfig& config, double unit_cost, double overhead) {
  if (!(unit_cost > 0)) throw ConfigError("analytic latency: unit_cost must be positive");
  if (overhead < 0) throw ConfigError("analytic latency: overhead must be non-negative");
  validate(config);
  LatencyMetadata meta;
  meta.mode = "analytic";
  meta.granularity = config.granularity;
  meta.unit_cost = unit_cost;
  meta.overhead = overhead;
  LatencyTable lut(std::move(meta));
  const auto layers = expand_layers(config);
  for (const auto& key : required_keys(config)) {
    if (key.variant == "skip") {
      lut.set(key, 0.0);
      continue;
    }
    const LayerSpec& layer = layers[key.layer];
    const auto& variant = *std::find_if(layer.variants.begin(), layer.variants.end(),
                                        [&](const VariantSpec& v) { return v.id() == key.variant; });
    lut.set(key, unit_cost * block_macs(layer, variant, key.hidden) + overhead);
  }
  return lut;
}

LatencyTable build_measured(const SuperNetConfig& config, const MeasureOptions& options) {
  if (options.repeats < 3) throw ConfigError("measured latency: repeats must be at least 3");
  validate(config);
  using Clock = std::chrono::steady_clock;

  // Clock granularity: smallest observable positive tick.
  double tick_us = 1e9;
  for (int i = 0; i < 200; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    tick_us = std::min(tick_us, std::chrono::duration<double, std::micro>(b - a).count());
  }

  LatencyMetadata meta;
  meta.mode = "measured";
  meta.granularity = config.granularity;
  meta.repeats = options.repeats;
  meta.host = host_description();
  meta.timestamp = utc_timestamp();
  LatencyTable lut(std::move(meta));

  // Repeats are interleaved across blocks so a burst of machine noise lands in
  // at most a sample or two of each block and the median discards it.
  struct Probe {
    LatencyKey key;
    const LayerSpec* layer;
    CandidateBlock block;
    Tensor x;
    int inner = 1;
    std::vector<double> samples;
    std::vector<double> spans;
  };
  Rng rng(options.seed);
  const auto layers = expand_layers(config);
  std::vector<Probe> probes;
  for (const auto& key : required_keys(config)) {
    Probe p{key, &layers[key.layer], {}, {}, 1, {}, {}};
    if (key.variant == "skip") {
      p.block.role = CandidateRole::kSkip;
    } else {
      const auto& variant =
          *std::find_if(p.layer->variants.begin(), p.layer->variants.end(),
                        [&](const VariantSpec& v) { return v.id() == key.variant; });
      p.block.weights = init_block_weights(*p.layer, variant, rng);
      p.block.mask_width = key.hidden;
    }
    std::vector<double> xin(static_cast<std::size_t>(p.layer->in));
    for (double& v : xin) v = rng.normal();
    p.x = Tensor::constant({1, xin.size()}, xin);
    probes.push_back(std::move(p));
  }

  double sink = 0.0;
  auto run = [&](const Probe& p, int n) {
    for (int i = 0; i < n; ++i) sink += block_forward(*p.layer, p.block, p.x).values()[0];
  };
  for (auto& p : probes) {
    run(p, options.warmup_runs);
    // Grow the inner loop until a sample spans min_sample_us.
    while (true) {
      const auto t0 = Clock::now();
      run(p, p.inner);
      const double us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
      if (us >= options.min_sample_us || p.inner >= (1 << 20)) break;
      p.inner *= 2;
    }
  }
  for (int r = 0; r < options.repeats; ++r) {
    for (auto& p : probes) {
      const auto t0 = Clock::now();
      run(p, p.inner);
      const double us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
      p.spans.push_back(us);
      p.samples.push_back(us / p.inner);
    }
  }
  for (auto& p : probes) {
    std::sort(p.samples.begin(), p.samples.end());
    std::sort(p.spans.begin(), p.spans.end());
    if (p.spans[p.spans.size() / 2] < 10.0 * tick_us) {
      lut.metadata().warnings.push_back("timer resolution insufficient for " + to_string(p.key));
    }
    lut.set(p.key, p.samples[p.samples.size() / 2]);
  }
  do_not_optimize(sink);
  return lut;
}

void check_complete(const LatencyTable& lut, const SuperNetConfig& config) {
  std::vector<std::string> missing;
  for (const auto& key : required_keys(config)) {
    if (!lut.contains(key)) missing.push_back(to_string(key));
  }
  if (!missing.empty()) {
    std::string msg = "latency table is missing " + std::to_string(missing.size()) + " entries:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw LatencyTableError(msg);
  }
}

LatencyKey candidate_key(const StochasticLayer& layer, const CandidateBlock& c) {
  if (c.role == CandidateRole::kSkip) return {layer.spec.index, "skip", 0};
  return {layer.spec.index, layer.spec.variants[c.variant].id(), c.mask_width};
}

std::vector<double> candidate_latencies(const StochasticLayer& layer, const LatencyTable& lut) {
  std::vector<double> out;
  out.reserve(layer.candidates.size());
  for (const auto& c : layer.candidates) out.push_back(lut.at(candidate_key(layer, c)));
  return out;
}

Tensor total_latency(const SuperNet& net, std::span<const Tensor> coefficients,
                     const LatencyTable& lut) {
  if (coefficients.size() != net.layers.size()) {
    throw DimensionError("total_latency: " + std::to_string(coefficients.size()) +
                         " coefficient vectors for " + std::to_string(net.layers.size()) +
                         " layers");
  }
  double fixed = 0.0;
  Tensor total;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto lats = candidate_latencies(net.layers[l], lut);
    if (!coefficients[l].requires_grad() && lats.size() == 1) {
      fixed += lats[0] * coefficients[l].values()[0];
      continue;
    }
    Tensor term = weighted_sum(coefficients[l], lats);
    total = total.defined() ? add(total, term) : term;
  }
  if (!total.defined()) return Tensor::scalar(fixed);
  return add_scalar(total, fixed);
}

}  // namespace dnas
