#include "ctbc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctbc {

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                               ": empty key");
    }
    cfg.values_[key] = val;
  }
  return cfg;
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    note_default(key);
    return def;
  }
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    return v;
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "' is not a number: " + it->second);
  }
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    note_default(key);
    return def;
  }
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    note_default(key);
    return def;
  }
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: key '" + key + "' is not a bool: " + it->second);
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    note_default(key);
    return def;
  }
  return it->second;
}

void Config::set_double(const std::string& key, double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  values_[key] = os.str();
}

void Config::set_int(const std::string& key, int64_t v) { values_[key] = std::to_string(v); }
void Config::set_bool(const std::string& key, bool v) { values_[key] = v ? "true" : "false"; }
void Config::set_string(const std::string& key, const std::string& v) { values_[key] = v; }

void Config::note_default(const std::string& key) const {
  if (std::find(defaulted_.begin(), defaulted_.end(), key) == defaulted_.end())
    defaulted_.push_back(key);
}

uint64_t Config::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& [k, v] : values_) {
    mix(k);
    mix(v);
  }
  return h;
}

}  // namespace ctbc
