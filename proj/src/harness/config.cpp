#include "gnninject/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gnninject/core/errors.hpp"
#include "gnninject/core/rng.hpp"

namespace gnninject {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> load_kv_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kv_config(ss.str());
}

std::string config_hash(const std::map<std::string, std::string>& kv) {
  std::string canon;
  for (const auto& [k, v] : kv) canon += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string KvReader::get(const std::string& key, const std::string& fallback) {
  used_[key] = true;
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::uint64_t KvReader::get_u64(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) {
    used_[key] = true;
    return fallback;
  }
  const std::string s = get(key, "");
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError("config key " + key + ": not an unsigned integer: " + s);
  return v;
}

double KvReader::get_double(const std::string& key, double fallback) {
  if (!has(key)) {
    used_[key] = true;
    return fallback;
  }
  const std::string s = get(key, "");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": not a number: " + s);
  }
}

bool KvReader::get_bool(const std::string& key, bool fallback) {
  const std::string s = get(key, fallback ? "true" : "false");
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError("config key " + key + ": not a boolean: " + s);
}

std::vector<std::string> KvReader::get_list(const std::string& key, const std::vector<std::string>& fallback) {
  if (!has(key)) {
    used_[key] = true;
    return fallback;
  }
  return split_list(get(key, ""));
}

std::vector<std::size_t> KvReader::get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) {
  if (!has(key)) {
    used_[key] = true;
    return fallback;
  }
  std::vector<std::size_t> out;
  for (const auto& s : get_list(key, {})) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError("config key " + key + ": bad list entry " + s);
    out.push_back(v);
  }
  return out;
}

void KvReader::reject_unknown() const {
  for (const auto& [k, v] : kv_) {
    if (used_.count(k) == 0) throw UsageError("unknown config key: " + k);
  }
}

}  // namespace gnninject
