#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace semslam {

/// Flat `key = value` text with dotted section names and `#` comments.
/// Keys are tracked as they are read so callers can reject unknown ones.
class KeyValueConfig {
 public:
  /// Throws FormatError with the line number of a malformed line.
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& file);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Typed reads; a present but malformed value throws FormatError.
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  bool get(const std::string& key, bool fallback) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string get(const std::string& key, const char* fallback) const { return get(key, std::string(fallback)); }

  /// Keys never read through get(). Throws FormatError naming the first one.
  void reject_unused() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  mutable std::set<std::string> used_;
};

}  // namespace semslam
