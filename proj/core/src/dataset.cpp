// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dnas/error.hpp"
#include "dnas/rng.hpp"
#include "dnas/toml_lite.hpp"

namespace dnas {

Tensor Dataset::batch(std::span<const std::size_t> rows) const {
  std::vector<double> v;
  v.reserve(rows.size() * dim);
  for (std::size_t r : rows) {
    const auto* row = features.data() + r * dim;
    v.insert(v.end(), row, row + dim);
  }
  return Tensor::constant({rows.size(), static_cast<std::size_t>(dim)}, std::move(v));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.dim = dim;
  d.classes = classes;
  d.features.reserve(rows.size() * dim);
  for (std::size_t r : rows) {
    const auto* row = features.data() + r * dim;
    d.features.insert(d.features.end(), row, row + dim);
    d.labels.push_back(labels[r]);
  }
  return d;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.dim < 1 || spec.samples < spec.classes || spec.modes < 1 ||
      spec.noise < 0) {
    throw DataError("invalid synthetic dataset spec");
  }
  Rng rng(spec.seed);
  std::vector<double> centres(static_cast<std::size_t>(spec.classes * spec.modes * spec.dim));
  for (double& c : centres) c = spec.separation * rng.normal();
  Dataset d;
  d.dim = spec.dim;
  d.classes = spec.classes;
  d.features.reserve(static_cast<std::size_t>(spec.samples) * spec.dim);
  for (int i = 0; i < spec.samples; ++i) {
    const int label = i % spec.classes;
    const int mode = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.modes)));
    const double* centre = centres.data() + (label * spec.modes + mode) * spec.dim;
    for (int k = 0; k < spec.dim; ++k) d.features.push_back(centre[k] + spec.noise * rng.normal());
    d.labels.push_back(label);
  }
  normalize(d);
  return d;
}

Dataset parse_csv(const std::string& text) {
  Dataset d;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    int label = 0;
    std::size_t start = 0;
    int field = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      std::string tok = line.substr(start, end - start);
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      if (field == 0) {
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), label);
        if (ec != std::errc() || p != tok.data() + tok.size() || label < 0) {
          throw DataError("row " + std::to_string(row) + ": invalid label '" + tok + "'");
        }
      } else {
        char* endp = nullptr;
        const double v = std::strtod(tok.c_str(), &endp);
        if (tok.empty() || endp != tok.c_str() + tok.size() || !std::isfinite(v)) {
          throw DataError("row " + std::to_string(row) + ": non-numeric value '" + tok +
                          "' in column " + std::to_string(field + 1));
        }
        values.push_back(v);
      }
      ++field;
      start = end + 1;
    }
    if (values.empty()) throw DataError("row " + std::to_string(row) + ": no feature values");
    if (d.dim == 0) {
      d.dim = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != d.dim) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(d.dim) +
                      " values, found " + std::to_string(values.size()));
    }
    d.features.insert(d.features.end(), values.begin(), values.end());
    d.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (d.labels.empty()) throw DataError("dataset has no rows");
  d.classes = max_label + 1;
  normalize(d);
  return d;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void normalize(Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) return;
  for (int k = 0; k < data.dim; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.features[i * data.dim + k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = data.features[i * data.dim + k] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double& v = data.features[i * data.dim + k];
      v = sd > 1e-12 ? (v - mean) / sd : v - mean;
    }
  }
}

Split split_dataset(const Dataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("split fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * data.size()));
  if (n_val == 0 || n_val >= data.size()) throw DataError("dataset too small to split");
  std::vector<std::size_t> val(idx.begin(), idx.begin() + n_val);
  std::vector<std::size_t> train(idx.begin() + n_val, idx.end());
  return {data.subset(train), data.subset(val)};
}

DataSpec data_spec_from(const toml::Document& doc, const std::string& base_dir) {
  DataSpec spec;
  const toml::Table* t = doc.table("data");
  if (!t) return spec;
  t->expect_only({"csv", "classes", "dim", "samples", "noise", "separation", "modes", "seed",
                  "val_fraction", "split_seed"},
                 "data");
  spec.csv = t->get_string("csv", "");
  if (!spec.csv.empty() && !base_dir.empty() && std::filesystem::path(spec.csv).is_relative()) {
    spec.csv = (std::filesystem::path(base_dir) / spec.csv).string();
  }
  SyntheticSpec& s = spec.synthetic;
  s.classes = static_cast<int>(t->get_int("classes", s.classes));
  s.dim = static_cast<int>(t->get_int("dim", s.dim));
  s.samples = static_cast<int>(t->get_int("samples", s.samples));
  s.noise = t->get_double("noise", s.noise);
  s.separation = t->get_double("separation", s.separation);
  s.modes = static_cast<int>(t->get_int("modes", s.modes));
  s.seed = static_cast<std::uint64_t>(t->get_int("seed", static_cast<std::int64_t>(s.seed)));
  spec.val_fraction = t->get_double("val_fraction", spec.val_fraction);
  spec.split_seed =
      static_cast<std::uint64_t>(t->get_int("split_seed", static_cast<std::int64_t>(spec.split_seed)));
  if (!(spec.val_fraction > 0 && spec.val_fraction < 1)) {
    throw ConfigError("val_fraction must lie in (0, 1)", t->at("val_fraction").line);
  }
  return spec;
}

Dataset load_dataset(const DataSpec& spec) {
  return spec.csv.empty() ? make_synthetic(spec.synthetic) : load_csv(spec.csv);
}

}  // namespace dnas
