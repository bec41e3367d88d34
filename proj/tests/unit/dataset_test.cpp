// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/dataset.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>

#include "dnas/error.hpp"
#include "dnas/toml_lite.hpp"

namespace dnas {
namespace {

std::string data_error(const std::string& csv) {
  try {
    parse_csv(csv);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(Synthetic, EightyTwentySplit) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.dim = 64;
  spec.samples = 2000;
  spec.seed = 1;
  const Dataset d = make_synthetic(spec);
  EXPECT_EQ(d.size(), 2000u);
  EXPECT_EQ(d.dim, 64);
  EXPECT_EQ(d.classes, 2);
  const Split s = split_dataset(d, 0.2, 1);
  EXPECT_EQ(s.train.size(), 1600u);
  EXPECT_EQ(s.val.size(), 400u);
}

TEST(Synthetic, DeterministicAndBalanced) {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.samples = 300;
  spec.modes = 2;
  const Dataset a = make_synthetic(spec), b = make_synthetic(spec);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  int counts[3] = {0, 0, 0};
  for (int l : a.labels) ++counts[l];
  EXPECT_EQ(counts[0], 100);
  EXPECT_EQ(counts[2], 100);
  spec.seed = 2;
  EXPECT_NE(make_synthetic(spec).features, a.features);
}

TEST(Split, PartitionsRowsBySeed) {
  SyntheticSpec spec;
  spec.samples = 100;
  spec.dim = 1;
  Dataset d = make_synthetic(spec);
  for (std::size_t i = 0; i < d.size(); ++i) d.features[i] = static_cast<double>(i);
  const Split s = split_dataset(d, 0.3, 4);
  std::set<double> seen(s.train.features.begin(), s.train.features.end());
  seen.insert(s.val.features.begin(), s.val.features.end());
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(s.val.size(), 30u);
  EXPECT_EQ(split_dataset(d, 0.3, 4).val.features, s.val.features);
  EXPECT_NE(split_dataset(d, 0.3, 5).val.features, s.val.features);
  EXPECT_THROW(split_dataset(d, 1.0, 4), ConfigError);
}

TEST(Csv, ClassCountFromLabels) {
  const Dataset d = parse_csv("0,1,2\n2,3,4\n1,5,6\n# comment\n\n1,7,8\n");
  EXPECT_EQ(d.classes, 3);
  EXPECT_EQ(d.dim, 2);
  EXPECT_EQ(d.size(), 4u);
}

TEST(Csv, RaggedRowIsNamed) {
  std::string csv;
  for (int r = 0; r < 3; ++r) {
    csv += "0";
    const int n = r == 2 ? 63 : 64;
    for (int k = 0; k < n; ++k) csv += ",1";
    csv += "\n";
  }
  const std::string msg = data_error(csv);
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("63"), std::string::npos) << msg;
}

TEST(Csv, NonNumericAndBadLabels) {
  EXPECT_NE(data_error("0,1\n1,abc\n").find("row 2"), std::string::npos);
  EXPECT_NE(data_error("x,1\n").find("row 1"), std::string::npos);
  EXPECT_NE(data_error("-1,1\n").find("row 1"), std::string::npos);
  EXPECT_NE(data_error("0,nan\n").find("row 1"), std::string::npos);
  EXPECT_FALSE(data_error("").empty());
  EXPECT_THROW(load_csv("/nonexistent.csv"), DataError);
}

TEST(Normalize, ZeroMeanUnitVariancePerColumn) {
  const Dataset d = parse_csv("0,1,10,5\n1,2,20,5\n0,3,60,5\n");
  for (int k = 0; k < 3; ++k) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 3; ++i) m += d.features[i * 3 + k];
    m /= 3;
    for (std::size_t i = 0; i < 3; ++i) v += std::pow(d.features[i * 3 + k] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-12);
    // The constant column stays at zero instead of dividing by zero.
    EXPECT_NEAR(v / 3, k == 2 ? 0.0 : 1.0, 1e-12);
  }
}

TEST(Batching, RowsAndLabels) {
  const Dataset d = parse_csv("0,1,2\n1,3,4\n2,5,6\n");
  const std::vector<std::size_t> rows{2, 0};
  const Tensor b = d.batch(rows);
  EXPECT_EQ(b.shape(), (Shape{2, 2}));
  EXPECT_EQ(b.values()[0], d.features[4]);
  EXPECT_EQ(d.batch_labels(rows), (std::vector<int>{2, 0}));
  const Dataset sub = d.subset(rows);
  EXPECT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.classes, 3);
}

TEST(DataSpec, FromToml) {
  const auto doc = toml::Document::parse(
      "[data]\nclasses = 5\nsamples = 50\nval_fraction = 0.1\ncsv = \"x.csv\"\n");
  const DataSpec spec = data_spec_from(doc, "/base");
  EXPECT_EQ(spec.synthetic.classes, 5);
  EXPECT_EQ(spec.val_fraction, 0.1);
  EXPECT_EQ(spec.csv, "/base/x.csv");
  EXPECT_THROW(data_spec_from(toml::Document::parse("[data]\nsampels = 5\n")), ConfigError);
  EXPECT_THROW(data_spec_from(toml::Document::parse("[data]\nval_fraction = 1.5\n")), ConfigError);
}

}  // namespace
}  // namespace dnas
