// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas {

namespace toml {
class Document;
}

struct Dataset {
  int dim = 0;
  int classes = 0;
  std::vector<double> features;  // row-major [size, dim]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  // Rows `rows` as a constant [rows.size(), dim] tensor.
  Tensor batch(std::span<const std::size_t> rows) const;
  std::vector<int> batch_labels(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

// Gaussian class blobs. Each class owns `modes` centres drawn from
// N(0, separation^2 I); samples add N(0, noise^2 I). Labels cycle through the
// classes so the set is balanced.
struct SyntheticSpec {
  int classes = 2;
  int dim = 16;
  int samples = 1000;
  double noise = 1.0;
  double separation = 1.0;
  int modes = 1;
  std::uint64_t seed = 1;
};

Dataset make_synthetic(const SyntheticSpec& spec);

// CSV rows "label,v1,...,vn". Class count = max label + 1. Throws DataError
// naming the offending row (1-based).
Dataset load_csv(const std::string& path);
Dataset parse_csv(const std::string& text);

// Per-feature z-score over the whole set (constant features are centred only).
void normalize(Dataset& data);

struct Split {
  Dataset train;
  Dataset val;
};

// Deterministic shuffled split; `val_fraction` of the rows go to `val`.
Split split_dataset(const Dataset& data, double val_fraction, std::uint64_t seed);

// Where the rows come from: a CSV file when `csv` is set, else the generator.
struct DataSpec {
  std::string csv;
  SyntheticSpec synthetic;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 1;
};

// [data] table of a config file; absent keys keep the defaults. Relative CSV
// paths resolve against `base_dir`.
DataSpec data_spec_from(const toml::Document& doc, const std::string& base_dir = "");
Dataset load_dataset(const DataSpec& spec);

}  // namespace dnas
