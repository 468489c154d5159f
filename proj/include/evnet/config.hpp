#pragma once
// Flat dotted-key run configuration with strict unknown-key rejection.
// Every run writes its resolved config next to its outputs so reruns are
// reproducible from the artifact alone.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evnet {

class RunConfig {
 public:
  // Parses "key = value" lines; '#' starts a comment. Unknown keys are
  // rejected by name.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Canonical "key = value" text, keys sorted.
  std::string resolved_text() const;
  // FNV-1a over the canonical text; a provenance tag for report files.
  std::uint64_t hash() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace evnet
