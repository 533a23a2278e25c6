#pragma once

#include <map>
#include <string>
#include <vector>

namespace odegrad {

// Flat key = value configuration with declared keys and defaults. A key not
// declared up front is rejected, both from files and from the command line.
class ExperimentConfig {
 public:
  void declare(const std::string& key, const std::string& default_value);

  // `key = value` lines; '#' starts a comment; blank lines ignored.
  void load_file(const std::string& path);
  // --key value pairs
  void apply_overrides(const std::vector<std::string>& args);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  long get_long(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Resolves the run seed: explicit config value wins, then ODEGRAD_SEED, then
// the built-in default.
uint64_t resolve_seed(const ExperimentConfig& cfg);

}  // namespace odegrad
