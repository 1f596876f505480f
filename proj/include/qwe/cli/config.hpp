#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qwe/qwalk.hpp"

namespace qwe::cli {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> lattice;  ///< walker sites per pair; default steps + 1
  CoinKind coin = CoinKind::hadamard;
  std::optional<std::uint64_t> seed;
  std::size_t n_theta = 181;
  std::size_t n_phi = 361;
  std::size_t iterations = 4;
  double p1 = 0.5;
  std::optional<double> p2;
  std::string out;       ///< empty = stdout
  std::string summary;   ///< scan: optional JSON summary path
  std::string strategy = "pm";
  std::string input = "bell";
  std::size_t threads = 0;

  std::size_t steps_or(std::size_t fallback) const { return steps.value_or(fallback); }

  NamedCoin named_coin() const {
    NamedCoin c;
    c.kind = coin;
    c.seed = seed.value_or(0);
    return c;
  }
};

inline CoinKind parse_coin(const std::string& s) {
  if (s == "identity") return CoinKind::identity;
  if (s == "hadamard") return CoinKind::hadamard;
  if (s == "random") return CoinKind::haar_random;
  throw ConfigError("unknown coin '" + s + "' (expected identity, hadamard or random)");
}

inline std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("grid must look like <n_theta>x<n_phi>, got '" + s + "'");
  try {
    std::size_t used = 0;
    const auto a = std::stoul(s.substr(0, x), &used);
    if (used != x) throw ConfigError("bad grid '" + s + "'");
    const std::string rest = s.substr(x + 1);
    const auto b = std::stoul(rest, &used);
    if (used != rest.size()) throw ConfigError("bad grid '" + s + "'");
    return {a, b};
  } catch (const std::logic_error&) {
    throw ConfigError("bad grid '" + s + "'");
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) throw ConfigError("bad value for '" + key + "': '" + value + "'");
  return v;
}

}  // namespace detail

/// Applies one key=value setting.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "steps") {
    if (!value.empty() && value[0] == '-') throw ConfigError("steps must be nonnegative");
    cfg.steps = detail::parse_number<std::size_t>(key, value);
  } else if (key == "lattice") {
    if (!value.empty() && value[0] == '-') throw ConfigError("lattice must be positive");
    cfg.lattice = detail::parse_number<std::size_t>(key, value);
  } else if (key == "coin") {
    cfg.coin = parse_coin(value);
  } else if (key == "seed") {
    cfg.seed = detail::parse_number<std::uint64_t>(key, value);
  } else if (key == "grid") {
    std::tie(cfg.n_theta, cfg.n_phi) = parse_grid(value);
  } else if (key == "iterations") {
    cfg.iterations = detail::parse_number<std::size_t>(key, value);
  } else if (key == "p1") {
    cfg.p1 = detail::parse_number<double>(key, value);
  } else if (key == "p2") {
    cfg.p2 = detail::parse_number<double>(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "summary") {
    cfg.summary = value;
  } else if (key == "strategy") {
    cfg.strategy = value;
  } else if (key == "input") {
    cfg.input = value;
  } else if (key == "threads") {
    cfg.threads = detail::parse_number<std::size_t>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat key=value lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline void validate(const RunConfig& cfg) {
  if (cfg.p1 < 0.0 || cfg.p1 > 1.0) throw ConfigError("p1 must lie in [0, 1]");
  if (cfg.p2 && std::abs(cfg.p1 + *cfg.p2 - 1.0) > 1e-12) throw ConfigError("p1 + p2 must equal 1");
  if (cfg.lattice && *cfg.lattice == 0) throw ConfigError("lattice must be positive");
  if (cfg.n_theta < 2 || cfg.n_phi < 2) throw ConfigError("grid dimensions must be at least 2");
  if (cfg.coin == CoinKind::haar_random && !cfg.seed) throw ConfigError("coin=random requires a seed");
  if (cfg.command == "accumulate" && cfg.iterations == 0) throw ConfigError("iterations must be positive");
  if (cfg.strategy != "pm" && cfg.strategy != "grid") throw ConfigError("strategy must be pm or grid");
  if (cfg.input != "bell" && cfg.input != "product" && cfg.input != "minus") {
    throw ConfigError("input must be bell, minus or product");
  }
}

}  // namespace qwe::cli
