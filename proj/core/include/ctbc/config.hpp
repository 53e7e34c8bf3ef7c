#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctbc {

// Key-value text config. One `key = value` pair per line, `#` starts a
// comment. Unknown keys are kept verbatim; reads of missing keys fall back
// to the supplied default and are recorded in defaulted_keys().
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);  // throws std::runtime_error
  void save(const std::string& path) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double get_double(const std::string& key, double def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;

  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, int64_t v);
  void set_bool(const std::string& key, bool v);
  void set_string(const std::string& key, const std::string& v);

  // Keys that were requested but absent; one entry per distinct key.
  const std::vector<std::string>& defaulted_keys() const { return defaulted_; }

  // FNV-1a over the sorted key=value pairs; stable across load/save.
  uint64_t hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void note_default(const std::string& key) const;
  std::map<std::string, std::string> values_;
  mutable std::vector<std::string> defaulted_;
};

}  // namespace ctbc
