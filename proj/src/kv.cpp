#include "pic/kv.h"

#include "pic/error.h"
#include "pic/tensor_io.h"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace pic {

namespace {

std::string trim(std::string const &s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(std::string const &line)
{
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); i++) {
    char const c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) {
      quoted = !quoted;
    } else if (c == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string quote(std::string const &s)
{
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  return out + '"';
}

std::string unquote(std::string const &s)
{
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
    return s;
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); i++) {
    if (s[i] == '\\' && i + 2 < s.size()) {
      i++;
    }
    out += s[i];
  }
  return out;
}

} // namespace

std::string format_double(double x)
{
  if (std::isnan(x)) {
    return "nan";
  }
  if (std::isinf(x)) {
    return x > 0 ? "inf" : "-inf";
  }
  char buf[64];
  auto const res = std::to_chars(buf, buf + sizeof(buf), x);
  std::string s(buf, res.ptr);
  // keep a decimal marker so TOML reads it back as a float
  if (s.find_first_of(".eE") == std::string::npos) {
    s += ".0";
  }
  return s;
}

double parse_double(std::string const &text)
{
  std::string const t = trim(text);
  if (t == "inf" || t == "+inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (t == "-inf") {
    return -std::numeric_limits<double>::infinity();
  }
  if (t == "nan" || t == "+nan" || t == "-nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  char const *begin = t.data();
  if (!t.empty() && t[0] == '+') {
    begin++;
  }
  double x = 0.0;
  auto const res = std::from_chars(begin, t.data() + t.size(), x);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ParameterError("not a number: '" + text + "'");
  }
  return x;
}

KeyValues KeyValues::parse(std::string const &text)
{
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::string table;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    line = trim(strip_comment(line));
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParameterError("line " + std::to_string(lineno) + ": malformed table header");
      }
      table = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParameterError("line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!table.empty()) {
      key = table + "." + key;
    }
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(std::filesystem::path const &path)
{
  try {
    return parse(read_file(path));
  } catch (ParameterError const &e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

std::string KeyValues::dump() const
{
  std::string out;
  for (auto const &[k, v] : values_) {
    out += k + " = " + v + "\n";
  }
  return out;
}

void KeyValues::save(std::filesystem::path const &path) const
{
  write_file(path, dump());
}

void KeyValues::merge(KeyValues const &other)
{
  for (auto const &[k, v] : other.values_) {
    values_[k] = v;
  }
}

void KeyValues::set(std::string const &key, std::string const &value)
{
  values_[key] = quote(value);
}

void KeyValues::set(std::string const &key, double value)
{
  values_[key] = format_double(value);
}

void KeyValues::set(std::string const &key, std::int64_t value)
{
  values_[key] = std::to_string(value);
}

void KeyValues::set(std::string const &key, std::uint64_t value)
{
  values_[key] = std::to_string(value);
}

void KeyValues::set(std::string const &key, bool value)
{
  values_[key] = value ? "true" : "false";
}

void KeyValues::set(std::string const &key, std::vector<double> const &values)
{
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); i++) {
    s += (i ? ", " : "") + format_double(values[i]);
  }
  values_[key] = s + "]";
}

std::string const &KeyValues::lookup(std::string const &key) const
{
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ParameterError("missing key '" + key + "'");
  }
  return it->second;
}

std::string KeyValues::get_string(std::string const &key) const
{
  return unquote(lookup(key));
}

double KeyValues::get_double(std::string const &key) const
{
  try {
    return parse_double(unquote(lookup(key)));
  } catch (ParameterError const &e) {
    throw ParameterError("key '" + key + "': " + e.what());
  }
}

std::int64_t KeyValues::get_int(std::string const &key) const
{
  std::string const s = unquote(lookup(key));
  std::int64_t x = 0;
  auto const res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParameterError("key '" + key + "': not an integer: '" + s + "'");
  }
  return x;
}

std::uint64_t KeyValues::get_u64(std::string const &key) const
{
  std::string const s = unquote(lookup(key));
  std::uint64_t x = 0;
  auto const res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParameterError("key '" + key + "': not an unsigned integer: '" + s + "'");
  }
  return x;
}

bool KeyValues::get_bool(std::string const &key) const
{
  std::string const s = unquote(lookup(key));
  if (s == "true" || s == "1") {
    return true;
  }
  if (s == "false" || s == "0") {
    return false;
  }
  throw ParameterError("key '" + key + "': not a boolean: '" + s + "'");
}

std::vector<double> KeyValues::get_doubles(std::string const &key) const
{
  std::string s = trim(unquote(lookup(key)));
  if (s.empty() || s.front() != '[') {
    return {get_double(key)};
  }
  if (s.back() != ']') {
    throw ParameterError("key '" + key + "': unterminated array");
  }
  s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!trim(item).empty()) {
      out.push_back(parse_double(item));
    }
  }
  return out;
}

std::string KeyValues::get_string(std::string const &key, std::string const &fallback) const
{
  return has(key) ? get_string(key) : fallback;
}

double KeyValues::get_double(std::string const &key, double fallback) const
{
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValues::get_int(std::string const &key, std::int64_t fallback) const
{
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValues::get_u64(std::string const &key, std::uint64_t fallback) const
{
  return has(key) ? get_u64(key) : fallback;
}

bool KeyValues::get_bool(std::string const &key, bool fallback) const
{
  return has(key) ? get_bool(key) : fallback;
}

std::vector<double> KeyValues::get_doubles(std::string const &key, std::vector<double> const &fallback) const
{
  return has(key) ? get_doubles(key) : fallback;
}

} // namespace pic
