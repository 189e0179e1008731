#include "gldb/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace gldb::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + value + "'");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

template <typename T>
Setter number(T& field) {
  return [&field](const std::string& k, const std::string& v) { field = parse_number<T>(k, v); };
}

Setter flag(bool& field) {
  return [&field](const std::string& k, const std::string& v) { field = parse_bool(k, v); };
}

std::map<std::string, Setter> network_setters(network::NetworkConfig& c) {
  return {{"channels", number(c.channels)},
          {"attention_width", number(c.attention_width)},
          {"kernel_size", number(c.kernel_size)},
          {"levels", number(c.levels)},
          {"encoder_stages", number(c.encoder_stages)},
          {"blocks_per_stage", number(c.blocks_per_stage)},
          {"decoder_stages", number(c.decoder_stages)},
          {"auxiliary_heads", flag(c.auxiliary_heads)}};
}

std::map<std::string, Setter> train_setters(train::TrainConfig& c) {
  return {{"batch_size", number(c.batch_size)},
          {"crop_size", number(c.crop_size)},
          {"iterations", number(c.iterations)},
          {"learning_rate", number(c.adam.learning_rate)},
          {"halving_period", number(c.adam.halving_period)},
          {"beta1", number(c.adam.beta1)},
          {"beta2", number(c.adam.beta2)},
          {"adam_epsilon", number(c.adam.epsilon)},
          {"seed", number(c.seed)},
          {"blur_min_length", number(c.blur.min_length)},
          {"blur_max_length", number(c.blur.max_length)},
          {"aux_loss_weight", number(c.aux_loss_weight)},
          {"log_interval", number(c.log_interval)},
          {"validation_count", number(c.validation_count)}};
}

template <typename T>
std::string text(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (!out.emplace(key, value).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
  }
  return out;
}

std::size_t apply_network(network::NetworkConfig& config, const std::map<std::string, std::string>& pairs) {
  const auto setters = network_setters(config);
  std::size_t used = 0;
  for (const auto& [k, v] : pairs) {
    if (auto it = setters.find(k); it != setters.end()) {
      it->second(k, v);
      ++used;
    }
  }
  return used;
}

RunConfig parse(const std::string& text) {
  RunConfig rc;
  const auto pairs = parse_pairs(text);
  auto net = network_setters(rc.network);
  auto tr = train_setters(rc.train);
  for (const auto& [k, v] : pairs) {
    if (auto it = net.find(k); it != net.end()) {
      it->second(k, v);
    } else if (auto jt = tr.find(k); jt != tr.end()) {
      jt->second(k, v);
    } else {
      throw ConfigError("unknown key '" + k + "'");
    }
  }
  try {
    rc.train.validate_against(rc.network);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format_network(const network::NetworkConfig& c) {
  std::ostringstream os;
  os << "channels = " << c.channels << '\n'
     << "attention_width = " << c.attention_width << '\n'
     << "kernel_size = " << c.kernel_size << '\n'
     << "levels = " << c.levels << '\n'
     << "encoder_stages = " << c.encoder_stages << '\n'
     << "blocks_per_stage = " << c.blocks_per_stage << '\n'
     << "decoder_stages = " << c.decoder_stages << '\n'
     << "auxiliary_heads = " << (c.auxiliary_heads ? "true" : "false") << '\n';
  return os.str();
}

std::string format(const RunConfig& rc) {
  const auto& t = rc.train;
  std::ostringstream os;
  os << format_network(rc.network) << "batch_size = " << t.batch_size << '\n'
     << "crop_size = " << t.crop_size << '\n'
     << "iterations = " << t.iterations << '\n'
     << "learning_rate = " << text(t.adam.learning_rate) << '\n'
     << "halving_period = " << t.adam.halving_period << '\n'
     << "beta1 = " << text(t.adam.beta1) << '\n'
     << "beta2 = " << text(t.adam.beta2) << '\n'
     << "adam_epsilon = " << text(t.adam.epsilon) << '\n'
     << "seed = " << t.seed << '\n'
     << "blur_min_length = " << t.blur.min_length << '\n'
     << "blur_max_length = " << t.blur.max_length << '\n'
     << "aux_loss_weight = " << text(t.aux_loss_weight) << '\n'
     << "log_interval = " << t.log_interval << '\n'
     << "validation_count = " << t.validation_count << '\n';
  return os.str();
}

}  // namespace gldb::config
