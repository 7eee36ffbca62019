#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pic {

// Flat key/value store read from and written to a TOML subset: `key = value` lines,
// `#` comments, `[table]` headers (keys become "table.key"), quoted strings, numbers,
// booleans and one-line arrays of numbers. Values are kept as their TOML source text.
class KeyValues
{
public:
  static KeyValues parse(std::string const &text);
  static KeyValues load(std::filesystem::path const &path);
  std::string dump() const;
  void save(std::filesystem::path const &path) const;

  bool has(std::string const &key) const { return values_.contains(key); }
  void set_raw(std::string const &key, std::string value) { values_[key] = std::move(value); }
  void set(std::string const &key, std::string const &value);
  void set(std::string const &key, char const *value) { set(key, std::string(value)); }
  void set(std::string const &key, double value);
  void set(std::string const &key, std::int64_t value);
  void set(std::string const &key, std::uint64_t value);
  void set(std::string const &key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(std::string const &key, bool value);
  void set(std::string const &key, std::vector<double> const &values);

  std::string get_string(std::string const &key) const;
  double get_double(std::string const &key) const;
  std::int64_t get_int(std::string const &key) const;
  std::uint64_t get_u64(std::string const &key) const;
  bool get_bool(std::string const &key) const;
  std::vector<double> get_doubles(std::string const &key) const;

  std::string get_string(std::string const &key, std::string const &fallback) const;
  double get_double(std::string const &key, double fallback) const;
  std::int64_t get_int(std::string const &key, std::int64_t fallback) const;
  std::uint64_t get_u64(std::string const &key, std::uint64_t fallback) const;
  bool get_bool(std::string const &key, bool fallback) const;
  std::vector<double> get_doubles(std::string const &key, std::vector<double> const &fallback) const;

  std::map<std::string, std::string> const &raw() const { return values_; }
  void merge(KeyValues const &other);

private:
  std::string const &lookup(std::string const &key) const;
  std::map<std::string, std::string> values_;
};

// Shortest round-trip decimal form of a double; "inf", "-inf", "nan" for non-finite.
std::string format_double(double x);
double parse_double(std::string const &text);

} // namespace pic
