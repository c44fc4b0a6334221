#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gnninject {

/// `key = value` lines; `#` starts a comment; blank lines ignored. Later
/// keys override earlier ones. Throws ValidationError on a line without '='.
std::map<std::string, std::string> parse_kv_config(const std::string& text);
std::map<std::string, std::string> load_kv_config(const std::filesystem::path& path);

/// FNV-1a over the canonical `key=value\n` rendering (keys sorted), as 16 hex digits.
std::string config_hash(const std::map<std::string, std::string>& kv);

/// Typed view of a kv map. Lookups record which keys were read so unknown
/// keys can be rejected.
class KvReader {
 public:
  explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback);
  std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback);

  /// Throws UsageError naming the first key never read.
  void reject_unknown() const;
  const std::map<std::string, std::string>& raw() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  std::map<std::string, bool> used_;
};

std::vector<std::string> split_list(const std::string& s);

}  // namespace gnninject
