#pragma once

// Run configuration as `key = value` lines, with '#' comments. Seed
// precedence: built-in default < config file < RANDPROJ_SEED < --seed.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/mesh.hpp"
#include "randproj/random.hpp"

namespace randproj {

inline constexpr std::uint64_t kDefaultSeed = 20240601u;

struct RunConfig {
  std::uint64_t seed = kDefaultSeed;
  std::string out = "out";
  int levels = 6;
  double theta = 0.5;
  std::vector<std::string> modes;  // empty: the experiment's defaults
  int threads = 0;                 // 0: RANDPROJ_THREADS or 1
  std::size_t replicates = 0;      // 0: the experiment's default
  std::string rhs = "osc";
  std::size_t target_ndof = 10000;
  int initial_n = 0;                // 0: the experiment's default
  int degree = 0;                  // 0: the experiment's default

  /// Canonical text form; also the manifest body.
  std::string to_text() const {
    std::ostringstream s;
    s << "seed = " << seed << '\n'
      << "out = " << out << '\n'
      << "levels = " << levels << '\n'
      << "theta = " << detail::format_double(theta) << '\n'
      << "modes = ";
    for (std::size_t i = 0; i < modes.size(); ++i) {
      s << (i ? "," : "") << modes[i];
    }
    s << '\n'
      << "threads = " << threads << '\n'
      << "replicates = " << replicates << '\n'
      << "rhs = " << rhs << '\n'
      << "target_ndof = " << target_ndof << '\n'
      << "initial_n = " << initial_n << '\n'
      << "degree = " << degree << '\n';
    return s.str();
  }

  void validate() const {
    if (levels < 0 || levels > 12) {
      throw ConfigError("levels must lie in [0, 12]");
    }
    if (!(theta > 0.0 && theta < 1.0)) {
      throw ConfigError("theta must lie in (0, 1)");
    }
    if (threads < 0) {
      throw ConfigError("threads must be >= 0");
    }
    if (initial_n < 0) {
      throw ConfigError("initial_n must be >= 0");
    }
    if (degree < 0 || degree > 2) {
      throw ConfigError("degree must be 0 (default), 1 or 2");
    }
    if (target_ndof < 1) {
      throw ConfigError("target_ndof must be positive");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) {
    return {};
  }
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T result{};
    if constexpr (std::is_same_v<T, double>) {
      result = std::stod(value, &used);
    } else if constexpr (std::is_same_v<T, int>) {
      result = std::stoi(value, &used);
    } else {
      if (!value.empty() && value[0] == '-') {
        throw std::invalid_argument("negative");
      }
      result = static_cast<T>(std::stoull(value, &used, 0));
    }
    if (used != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return result;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream s(value);
  std::string item;
  while (std::getline(s, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      items.push_back(item);
    }
  }
  return items;
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "out") {
    c.out = value;
  } else if (key == "levels") {
    c.levels = parse_number<int>(key, value);
  } else if (key == "theta") {
    c.theta = parse_number<double>(key, value);
  } else if (key == "modes" || key == "mode") {
    c.modes = detail::split_list(value);
  } else if (key == "threads") {
    c.threads = parse_number<int>(key, value);
  } else if (key == "replicates") {
    c.replicates = parse_number<std::size_t>(key, value);
  } else if (key == "rhs") {
    c.rhs = value;
  } else if (key == "target_ndof") {
    c.target_ndof = parse_number<std::size_t>(key, value);
  } else if (key == "initial_n") {
    c.initial_n = parse_number<int>(key, value);
  } else if (key == "degree") {
    c.degree = parse_number<int>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = detail::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return parse_config(in, std::move(base));
}

/// Final seed: flag over environment over config file over default.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> config_seed, std::optional<std::uint64_t> flag_seed,
                                  const char* env = std::getenv("RANDPROJ_SEED")) {
  if (flag_seed) {
    return *flag_seed;
  }
  if (env != nullptr && *env != '\0') {
    return detail::parse_number<std::uint64_t>("RANDPROJ_SEED", env);
  }
  return config_seed.value_or(kDefaultSeed);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Manifest: command, resolved configuration and a hash of it.
inline void write_manifest(std::ostream& out, const std::string& command, const RunConfig& config) {
  const std::string body = "command = " + command + '\n' + config.to_text();
  std::ostringstream hex;
  hex << std::hex << fnv1a(body);
  out << body << "config_hash = " << hex.str() << '\n';
}

}  // namespace randproj
