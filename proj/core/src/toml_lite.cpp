// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dnas/error.hpp"

namespace dnas::toml {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment that is not inside a string literal.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return true;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : text_(text), line_(line) {}

  Value parse_all() {
    Value v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(msg, line_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  Value parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return Value{true, line_};
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return Value{false, line_};
    }
    return parse_number();
  }

  Value parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\' && pos_ < text_.size()) {
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return Value{std::move(out), line_};
  }

  Value parse_array() {
    ++pos_;
    Array items;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return Value{std::move(items), line_};
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return Value{std::move(items), line_};
  }

  Value parse_number() {
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) ||
                                  text_[end] == '.' || text_[end] == '-' || text_[end] == '+' ||
                                  text_[end] == '_')) {
      ++end;
    }
    std::string token;
    for (char c : text_.substr(pos_, end - pos_)) {
      if (c != '_') token.push_back(c);
    }
    if (token.empty()) fail("expected a value");
    const bool looks_float = token.find_first_of(".eE") != std::string::npos ||
                             token == "inf" || token == "nan";
    pos_ = end;
    if (!looks_float) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && ptr == token.data() + token.size()) return Value{v, line_};
      fail("invalid integer '" + token + "'");
    }
    try {
      std::size_t used = 0;
      const double d = std::stod(token, &used);
      if (used != token.size()) fail("invalid number '" + token + "'");
      return Value{d, line_};
    } catch (const std::logic_error&) {
      fail("invalid number '" + token + "'");
    }
  }

  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

[[noreturn]] void type_error(std::string_view key, const char* want, int line) {
  throw ConfigError("key '" + std::string(key) + "' must be " + want, line);
}

}  // namespace

bool Value::as_bool(std::string_view key) const {
  if (!is_bool()) type_error(key, "a boolean", line);
  return std::get<bool>(data);
}

std::int64_t Value::as_int(std::string_view key) const {
  if (!is_int()) type_error(key, "an integer", line);
  return std::get<std::int64_t>(data);
}

double Value::as_double(std::string_view key) const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data));
  if (!std::holds_alternative<double>(data)) type_error(key, "a number", line);
  return std::get<double>(data);
}

const std::string& Value::as_string(std::string_view key) const {
  if (!is_string()) type_error(key, "a string", line);
  return std::get<std::string>(data);
}

const Array& Value::as_array(std::string_view key) const {
  if (!is_array()) type_error(key, "an array", line);
  return std::get<Array>(data);
}

bool Table::contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }

const Value* Table::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const Value& Table::at(std::string_view key) const {
  if (const Value* v = find(key)) return *v;
  throw ConfigError("missing required key '" + std::string(key) + "'", line);
}

double Table::get_double(std::string_view key, double fallback) const {
  const Value* v = find(key);
  return v ? v->as_double(key) : fallback;
}

std::int64_t Table::get_int(std::string_view key, std::int64_t fallback) const {
  const Value* v = find(key);
  return v ? v->as_int(key) : fallback;
}

bool Table::get_bool(std::string_view key, bool fallback) const {
  const Value* v = find(key);
  return v ? v->as_bool(key) : fallback;
}

std::string Table::get_string(std::string_view key, const std::string& fallback) const {
  const Value* v = find(key);
  return v ? v->as_string(key) : fallback;
}

void Table::expect_only(std::initializer_list<std::string_view> allowed,
                        std::string_view context) const {
  for (const auto& [k, v] : entries_) {
    bool ok = false;
    for (auto a : allowed) ok = ok || (a == k);
    if (!ok) {
      throw ConfigError("unknown key '" + k + "' in [" + std::string(context) + "]", v.line);
    }
  }
}

Document Document::parse(std::string_view text) {
  Document doc;
  doc.tables_[""] = Table{};
  Table* current = &doc.tables_[""];
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) throw ConfigError("malformed table array header", line_no);
      const std::string name(trim(line.substr(2, line.size() - 4)));
      if (!valid_key(name)) throw ConfigError("invalid table name '" + name + "'", line_no);
      auto& arr = doc.arrays_[name];
      arr.emplace_back();
      current = &arr.back();
      current->line = line_no;
    } else if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed table header", line_no);
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(name)) throw ConfigError("invalid table name '" + name + "'", line_no);
      if (doc.tables_.count(name) && name != "") {
        throw ConfigError("duplicate table [" + name + "]", line_no);
      }
      current = &doc.tables_[name];
      current->line = line_no;
    } else {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
      const std::string key(trim(line.substr(0, eq)));
      if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'", line_no);
      if (current->contains(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
      current->entries_.emplace(key, ValueParser(trim(line.substr(eq + 1)), line_no).parse_all());
    }
    if (end == text.size()) break;
  }
  return doc;
}

Document Document::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const Table* Document::table(std::string_view name) const {
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

const std::vector<Table>& Document::table_array(std::string_view name) const {
  static const std::vector<Table> kEmpty;
  auto it = arrays_.find(name);
  return it == arrays_.end() ? kEmpty : it->second;
}

std::vector<std::string> Document::table_names() const {
  std::vector<std::string> names;
  for (const auto& [k, v] : tables_) names.push_back(k);
  return names;
}

}  // namespace dnas::toml
