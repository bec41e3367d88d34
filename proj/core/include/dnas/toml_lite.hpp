// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// A small TOML subset used by the configuration files:
//   [table] / [table.sub] headers, [[array]] table arrays, key = value pairs,
//   strings ("..."), integers, floats, booleans, and single-line arrays of
//   those scalars. '#' starts a comment. Every value remembers its line so
//   that semantic validation can point back into the file.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dnas::toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  int line = 0;

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_number() const { return is_int() || std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  // Accessors throw ConfigError naming `key` and the line on type mismatch.
  bool as_bool(std::string_view key) const;
  std::int64_t as_int(std::string_view key) const;
  double as_double(std::string_view key) const;
  const std::string& as_string(std::string_view key) const;
  const Array& as_array(std::string_view key) const;
};

class Table {
 public:
  int line = 0;

  bool contains(std::string_view key) const;
  const Value* find(std::string_view key) const;
  const Value& at(std::string_view key) const;

  // Typed lookups with defaults.
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::string get_string(std::string_view key, const std::string& fallback) const;

  // Rejects keys not in `allowed`.
  void expect_only(std::initializer_list<std::string_view> allowed,
                   std::string_view context) const;

  const std::map<std::string, Value, std::less<>>& entries() const { return entries_; }

 private:
  friend class Document;
  std::map<std::string, Value, std::less<>> entries_;
};

class Document {
 public:
  static Document parse(std::string_view text);
  static Document load(const std::string& path);

  // Tables are keyed by their dotted header ("" is the root table).
  const Table* table(std::string_view name) const;
  const std::vector<Table>& table_array(std::string_view name) const;
  std::vector<std::string> table_names() const;

 private:
  std::map<std::string, Table, std::less<>> tables_;
  std::map<std::string, std::vector<Table>, std::less<>> arrays_;
};

}  // namespace dnas::toml
