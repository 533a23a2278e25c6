#include "odegrad/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace odegrad {

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

void ExperimentConfig::declare(const std::string& key, const std::string& default_value) {
  values_[key] = default_value;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
  it->second = value;
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void ExperimentConfig::apply_overrides(const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg.rfind("--", 0) != 0)
      throw std::invalid_argument("expected --key, got: " + arg);
    if (i + 1 >= args.size())
      throw std::invalid_argument("missing value for " + arg);
    set(arg.substr(2), args[++i]);
  }
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + ": not a number: " + v);
  return out;
}

int ExperimentConfig::get_int(const std::string& key) const {
  return static_cast<int>(get_long(key));
}

long ExperimentConfig::get_long(const std::string& key) const {
  const std::string& v = get(key);
  size_t pos = 0;
  const long out = std::stol(v, &pos);
  if (pos != v.size())
    throw std::invalid_argument("config key " + key + ": not an integer: " + v);
  return out;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

uint64_t resolve_seed(const ExperimentConfig& cfg) {
  if (cfg.has("seed") && !cfg.get("seed").empty()) {
    return static_cast<uint64_t>(cfg.get_long("seed"));
  }
  if (const char* env = std::getenv("ODEGRAD_SEED")) {
    return static_cast<uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return 0;
}

}  // namespace odegrad
