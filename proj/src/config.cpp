#include "evnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evnet {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "seed",
      "model.family",        // time-series | rastrigin
      "model.n",             // data dimension (time-series) / parameter dim (rastrigin)
      "model.sigma2",        // rastrigin noise variance
      "model.t_step",        // time-series grid step: t_j = j * t_step
      "model.n_per_model",   // samples per model for gen-data
      "loss.kind",
      "loss.alpha",
      "train.batch_size",
      "train.max_epochs",
      "train.patience",
      "train.validation_fraction",
      "train.learning_rate",
      "train.lr_decay",
      "train.lr_decay_epochs",  // apply decay every this many epochs
      "train.augment",
      "train.standardize",
      "train.ensemble_size",
      "eval.bins",
      "eval.min_count",
      "eval.n_samples",
      "eval.grid_points",    // rastrigin grid resolution per axis
      "eval.grid_extent",    // rastrigin grid half-width
      "eval.fit_samples",    // baseline Gaussian-MLE fit sample count
      "io.dataset",
      "io.checkpoint_dir",
      "io.observed",
  };
  return keys;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": expected 'key = value'");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw std::runtime_error("unknown config key '" + key + "'");
  }
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("missing required config key '" + key + "'");
  }
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string raw = get_string(key);
  std::size_t used = 0;
  double v = std::stod(raw, &used);
  if (used != raw.size()) {
    throw std::runtime_error("config key '" + key + "': bad number '" + raw + "'");
  }
  return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string raw = get_string(key);
  std::size_t used = 0;
  std::int64_t v = std::stoll(raw, &used);
  if (used != raw.size()) {
    throw std::runtime_error("config key '" + key + "': bad integer '" + raw + "'");
  }
  return v;
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string raw = get_string(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw std::runtime_error("config key '" + key + "': bad boolean '" + raw + "'");
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : resolved_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace evnet
