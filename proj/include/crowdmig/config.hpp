#pragma once

#include <map>
#include <string>

namespace crowdmig {

/// Flat `key = value` configuration (UTF-8, one pair per line, '#' or ';'
/// starts a comment). Unknown keys are preserved; typed getters with
/// defaults pull out what each consumer needs.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  unsigned long long get_u64(const std::string& key, unsigned long long fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace crowdmig
