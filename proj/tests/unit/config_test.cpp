// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/config.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "dnas/error.hpp"
#include "dnas/toml_lite.hpp"
#include "test_support.hpp"

namespace dnas {
namespace {

using testing::irb_stage;

SuperNetConfig single_layer(bool skippable) {
  SuperNetConfig c;
  c.input_width = 64;
  c.classes = 10;
  c.granularity = 32;
  c.max_expansion = 8;
  c.stages.push_back(irb_stage(1, 64, {"k3", "k5"}, {false, true}, {skippable}));
  return c;
}

SuperNetConfig load(const std::string& rel) {
  return supernet_config_from(toml::Document::load(testing::source_path(rel)));
}

int config_error_line(const std::string& text) {
  try {
    supernet_config_from(toml::Document::parse(text));
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(CountSearchSpace, SingleLayerFactors) {
  EXPECT_EQ(count_search_space(single_layer(true)), 65);
  EXPECT_EQ(count_search_space(single_layer(false)), 64);
}

TEST(CountSearchSpace, OneChoiceIsOne) {
  SuperNetConfig c;
  c.input_width = 8;
  c.classes = 2;
  c.stages.push_back(testing::conv_stage(1, 8, {"k3"}, {false}));
  EXPECT_EQ(count_search_space(c), 1);
}

TEST(CountSearchSpace, Table1FactorsTermByTerm) {
  const std::vector<int> expected{3,   3,   24,  65,  64,  97,  97,  96,  161, 160,
                                  289, 289, 289, 289, 288, 449, 449, 449, 449};
  const auto factors = layer_factors(load("configs/table1.toml"));
  ASSERT_EQ(factors.size(), expected.size());
  BigInt product = 1;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(factors[i], expected[i]) << "layer " << i;
    product *= expected[i];
  }
  const BigInt total = count_search_space(load("configs/table1.toml"));
  EXPECT_EQ(total, product);
  EXPECT_EQ(approx_scientific(total), "1.7e39");
}

TEST(CountSearchSpace, FbnetComparison) {
  const BigInt total = count_search_space(load("configs/fbnet_compare.toml"));
  EXPECT_EQ(total, BigInt("9007199254740992"));
  EXPECT_EQ(approx_scientific(total), "9e15");
}

TEST(ApproxScientific, RoundsToTwoDigits) {
  EXPECT_EQ(approx_scientific(0), "0");
  EXPECT_EQ(approx_scientific(7), "7e0");
  EXPECT_EQ(approx_scientific(65), "6.5e1");
  EXPECT_EQ(approx_scientific(1249), "1.2e3");
  EXPECT_EQ(approx_scientific(1250), "1.3e3");
  EXPECT_EQ(approx_scientific(9960), "1e4");
  EXPECT_EQ(approx_scientific(-65), "-6.5e1");
}

TEST(ExpandLayers, ChannelsAndHiddenWidths) {
  const auto layers = expand_layers(testing::desk_config(16, 2, 4, 16, 4.0));
  ASSERT_EQ(layers.size(), 3u);
  EXPECT_EQ(layers[0].in, 16);
  EXPECT_EQ(layers[0].max_hidden, 64);
  EXPECT_FALSE(layers[0].skippable);
  EXPECT_TRUE(layers[2].skippable);
  EXPECT_EQ(layers[2].stage, 1);
  EXPECT_EQ(layers[2].position, 1);
  EXPECT_EQ(layers[2].index, 2);
  EXPECT_EQ(max_hidden_width(single_layer(false), 64), 512);
}

TEST(Validate, RejectsBrokenConfigs) {
  auto c = single_layer(false);
  c.stages[0].filters = 32;
  c.stages[0].skippable = {true};
  EXPECT_THROW(validate(c), ConfigError);  // skip across a shape change
  c = single_layer(false);
  c.stages[0].skippable = {false, false};
  EXPECT_THROW(validate(c), ConfigError);
  c = single_layer(false);
  c.granularity = 512;
  EXPECT_THROW(validate(c), ConfigError);  // prunable without room for two masks
  c = single_layer(false);
  c.stages[0].variants.push_back(c.stages[0].variants[0]);
  EXPECT_THROW(validate(c), ConfigError);
  c = single_layer(false);
  c.stages[0].variants[0].kernel = "skip";
  EXPECT_THROW(validate(c), ConfigError);
  c = single_layer(false);
  c.tau = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c.stages.clear();
  c.tau = 1;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(FromToml, ErrorsPointAtTheStage) {
  const std::string head = "[supernet]\ninput_width = 16\nclasses = 2\ngranularity = 16\n";
  EXPECT_EQ(config_error_line(head + "\n[[stage]]\nkind = \"irb\"\nlayers = 1\nfilters = 32\n"
                                     "kernels = [\"k3\"]\nskippable = [true]\n"),
            6);
  EXPECT_EQ(config_error_line(head + "[[stage]]\nkind = \"dense\"\nlayers = 1\nfilters = 16\n"
                                     "kernels = [\"k3\"]\n"),
            6);
  EXPECT_EQ(config_error_line(head + "widht = 3\n"), 5);
  EXPECT_EQ(config_error_line("[supernet]\nclasses = 2\n"), 1);  // missing input_width
}

TEST(FromToml, DeskConfigMatchesItsComment) {
  const auto c = load("configs/desk.toml");
  EXPECT_EQ(count_search_space(c), 5832);
  EXPECT_EQ(c.stages.size(), 2u);
  EXPECT_TRUE(c.stages[1].variants[1].se);
  EXPECT_TRUE(c.stages[1].variants[1].prunable);
}

TEST(Fingerprint, StableAndSensitive) {
  const auto a = testing::desk_config();
  EXPECT_EQ(fingerprint(a), fingerprint(testing::desk_config()));
  EXPECT_EQ(fingerprint(a).size(), 16u);
  auto b = a;
  b.granularity = 8;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.stages[1].skippable[2] = false;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace dnas
