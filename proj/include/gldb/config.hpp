#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "gldb/network.hpp"
#include "gldb/train.hpp"

// Plain `key = value` configuration text. `#` starts a comment; blank lines
// are ignored. Keys not present keep the desk-scale defaults.
namespace gldb::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  network::NetworkConfig network = network::desk_config();
  train::TrainConfig train = train::desk_train_config();

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Key/value pairs; throws ConfigError on malformed lines or repeated keys.
std::map<std::string, std::string> parse_pairs(const std::string& text);

/// Applies NetworkConfig keys from `pairs` onto `config`; other keys are left
/// for the caller. Returns the number of keys consumed.
std::size_t apply_network(network::NetworkConfig& config, const std::map<std::string, std::string>& pairs);

/// Parses every key; unknown keys and invalid values raise ConfigError.
RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);

std::string format_network(const network::NetworkConfig& config);
std::string format(const RunConfig& config);

}  // namespace gldb::config
