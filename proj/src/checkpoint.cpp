#include "gldb/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "gldb/config.hpp"

namespace gldb::checkpoint {
namespace {

constexpr const char* kMagic = "GLDB1";
const std::string kAdamM = "adam.m/", kAdamV = "adam.v/";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

struct Entry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
};

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw BoundsError(std::string("checkpoint truncated while reading ") + what);
  return line;
}

void expect_line(std::istream& in, const std::string& expected) {
  const auto line = read_line(in, expected.c_str());
  if (line != expected) throw FormatError("expected '" + expected + "', got '" + line + "'");
}

}  // namespace

void save(const std::string& path, const Checkpoint& ck) {
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  for (const auto& e : ck.params.entries()) tensors.emplace_back(e.name, &e.value);
  if (ck.adam) {
    for (const auto& e : ck.adam->m.entries()) tensors.emplace_back(kAdamM + e.name, &e.value);
    for (const auto& e : ck.adam->v.entries()) tensors.emplace_back(kAdamV + e.name, &e.value);
  }

  std::ostringstream header;
  header << kMagic << "\n[config]\n" << config::format_network(ck.config) << "[state]\n"
         << "iteration = " << ck.iteration << '\n'
         << "adam_steps = " << (ck.adam ? ck.adam->steps : 0) << '\n'
         << "has_adam = " << (ck.adam ? 1 : 0) << '\n'
         << "[manifest]\n";
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header << name << ' ' << t->rank();
    for (auto d : t->shape()) header << ' ' << d;
    header << ' ' << offset << '\n';
    offset += t->numel() * sizeof(float);
  }
  header << "[payload] " << offset << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : tensors) {
    std::vector<std::uint32_t> raw(t->numel());
    std::memcpy(raw.data(), t->ptr(), raw.size() * sizeof(float));
    for (auto& w : raw) w = to_little_endian(w);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  }
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

Checkpoint load(const std::string& path, const std::optional<network::NetworkConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");

  char magic[6] = {};
  in.read(magic, 6);
  if (in.gcount() < 6 || std::string(magic, 5) != kMagic || magic[5] != '\n') {
    throw MagicError("'" + path + "' is not a GLDB1 checkpoint (bad magic)");
  }
  expect_line(in, "[config]");
  std::string config_text, line;
  while ((line = read_line(in, "config")) != "[state]") config_text += line + '\n';
  std::string state_text;
  while ((line = read_line(in, "state")) != "[manifest]") state_text += line + '\n';

  Checkpoint ck;
  try {
    const auto pairs = config::parse_pairs(config_text);
    if (config::apply_network(ck.config, pairs) != pairs.size()) throw FormatError("unknown key in [config]");
    ck.config.validate();
  } catch (const config::ConfigError& e) {
    throw FormatError(std::string("bad [config] section: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad [config] section: ") + e.what());
  }
  std::uint64_t adam_steps = 0;
  bool has_adam = false;
  {
    std::map<std::string, std::string> st;
    try {
      st = config::parse_pairs(state_text);
      ck.iteration = std::stoull(st.at("iteration"));
      adam_steps = std::stoull(st.at("adam_steps"));
      has_adam = st.at("has_adam") == "1";
    } catch (const std::exception& e) {
      throw FormatError(std::string("bad [state] section: ") + e.what());
    }
  }

  std::vector<Entry> entries;
  std::uint64_t payload = 0;
  for (;;) {
    line = read_line(in, "manifest");
    if (line.rfind("[payload] ", 0) == 0) {
      try {
        payload = std::stoull(line.substr(10));
      } catch (const std::exception&) {
        throw FormatError("bad payload size line '" + line + "'");
      }
      break;
    }
    std::istringstream ls(line);
    Entry e;
    std::size_t rank = 0;
    if (!(ls >> e.name >> rank) || rank > 8) throw FormatError("bad manifest line '" + line + "'");
    e.shape.resize(rank);
    for (auto& d : e.shape)
      if (!(ls >> d)) throw FormatError("bad manifest line '" + line + "'");
    if (!(ls >> e.offset)) throw FormatError("bad manifest line '" + line + "'");
    entries.push_back(std::move(e));
  }

  // Bounds: every entry inside the declared payload, no overlaps, and the
  // file really holds the payload.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& e : entries) {
    const std::uint64_t bytes = shape_numel(e.shape) * sizeof(float);
    if (e.offset > payload || bytes > payload - e.offset) {
      throw BoundsError("tensor '" + e.name + "' lies outside the " + std::to_string(payload) + "-byte payload");
    }
    spans.emplace_back(e.offset, e.offset + bytes);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw BoundsError("manifest entries overlap");
  }
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < payload) {
    throw BoundsError("payload truncated: expected " + std::to_string(payload) + " bytes, found " +
                      std::to_string(blob.size()));
  }
  if (blob.size() > payload) throw BoundsError("trailing bytes after the payload");

  const auto read_tensor = [&](const Entry& e) {
    Tensor<float> t(e.shape);
    std::vector<std::uint32_t> raw(t.numel());
    std::memcpy(raw.data(), blob.data() + e.offset, raw.size() * sizeof(float));
    for (auto& w : raw) w = to_little_endian(w);
    std::memcpy(t.mutable_ptr(), raw.data(), raw.size() * sizeof(float));
    return t;
  };

  ParameterSet<float> m, v;
  for (const auto& e : entries) {
    if (e.name.rfind(kAdamM, 0) == 0) {
      m.add(e.name.substr(kAdamM.size()), read_tensor(e));
    } else if (e.name.rfind(kAdamV, 0) == 0) {
      v.add(e.name.substr(kAdamV.size()), read_tensor(e));
    } else {
      ck.params.add(e.name, read_tensor(e));
    }
  }

  // Shape compatibility with the config the caller needs (or the stored one).
  const auto& target = expected ? *expected : ck.config;
  const auto specs = network::parameter_specs(target);
  if (specs.size() != ck.params.size()) {
    throw ShapeMismatchError("checkpoint holds " + std::to_string(ck.params.size()) + " parameters, config needs " +
                             std::to_string(specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& e = ck.params.entries()[i];
    if (e.name != specs[i].name || e.value.shape() != specs[i].shape) {
      throw ShapeMismatchError("parameter " + std::to_string(i) + ": checkpoint has '" + e.name + "' " +
                               to_string(e.value.shape()) + ", config needs '" + specs[i].name + "' " +
                               to_string(specs[i].shape));
    }
  }
  if (expected) ck.config = *expected;

  if (has_adam) {
    const auto matches = [&](const ParameterSet<float>& s) {
      if (s.size() != ck.params.size()) return false;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s.entries()[i].name != ck.params.entries()[i].name ||
            s.entries()[i].value.shape() != ck.params.entries()[i].value.shape())
          return false;
      return true;
    };
    if (!matches(m) || !matches(v)) throw ShapeMismatchError("optimizer moments do not match the parameters");
    ck.adam = optim::AdamState<float>{std::move(m), std::move(v), adam_steps};
  }
  return ck;
}

}  // namespace gldb::checkpoint
