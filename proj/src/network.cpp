#include "gldb/network.hpp"

#include <stdexcept>

#include "gldb/attention.hpp"
#include "gldb/dynamic_filter.hpp"
#include "gldb/ops.hpp"

namespace gldb::network {

std::size_t NetworkConfig::effective_attention_width() const {
  return attention_width ? attention_width : attention::default_width(channels);
}

std::size_t NetworkConfig::input_multiple() const { return std::size_t{2} << (encoder_stages - 1); }

void NetworkConfig::validate() const {
  if (levels != 3) throw std::invalid_argument("network: exactly 3 levels are supported, got " + std::to_string(levels));
  if (channels == 0) throw std::invalid_argument("network: channels must be positive");
  if (kernel_size % 2 == 0) throw std::invalid_argument("network: dynamic filter size must be odd");
  if (encoder_stages < 1 || encoder_stages > 6) throw std::invalid_argument("network: encoder_stages out of range");
  if (decoder_stages + 1 != encoder_stages) {
    throw std::invalid_argument("network: decoder_stages must equal encoder_stages - 1");
  }
  if (blocks_per_stage == 0) throw std::invalid_argument("network: blocks_per_stage must be >= 1");
}

NetworkConfig paper_config() { return NetworkConfig{}; }

NetworkConfig desk_config() {
  NetworkConfig c;
  c.channels = 32;
  c.attention_width = 4;
  return c;
}

namespace {

std::string level_prefix(std::size_t level) { return "l" + std::to_string(level) + "."; }

std::string block_prefix(const std::string& level, const char* side, std::size_t stage, std::size_t block) {
  return level + side + ".s" + std::to_string(stage) + ".b" + std::to_string(block) + ".";
}

void declare_conv(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t cout, std::size_t cin,
                  std::size_t k, Init init = Init::kFanIn) {
  specs.push_back({prefix + "w", {cout, cin, k, k}, init, cin * k * k});
  specs.push_back({prefix + "b", {cout}, Init::kZero, cin * k * k});
}

attention::AttentionConfig attention_config(const NetworkConfig& config) {
  return {config.channels, config.effective_attention_width()};
}

template <typename T>
Var<T> conv(Var<T> x, const BoundParameters<T>& params, const std::string& prefix, std::size_t stride) {
  return ops::conv2d(x, params[prefix + "w"], params[prefix + "b"], stride, params[prefix + "w"].shape()[2] / 2);
}

template <typename T>
Var<T> as_batched(Var<T> x) {
  if (x.shape().size() == 4) return x;
  const auto& s = x.shape();
  return ops::reshape(x, {1, s[0], s[1], s[2]});
}

void check_split(const Shape& s, std::size_t level) {
  if (s.size() != 3 && s.size() != 4) throw ShapeError("split_patches: expected [C,H,W] or [B,C,H,W], got " + to_string(s));
  if (level < 1 || level > 3) throw std::invalid_argument("split_patches: level must be 1, 2 or 3");
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  if (level >= 2 && h % 2 != 0) {
    throw ShapeError("split_patches: height " + std::to_string(h) + " is not divisible by 2 at level " +
                     std::to_string(level));
  }
  if (level == 3 && w % 2 != 0) {
    throw ShapeError("split_patches: width " + std::to_string(w) + " is not divisible by 2 at level 3");
  }
}

std::size_t grid_rows(std::size_t level) { return level == 1 ? 1 : 2; }
std::size_t grid_cols(std::size_t level) { return level == 3 ? 2 : 1; }

template <typename T>
struct LevelResult {
  Var<T> features;
  std::optional<Var<T>> residual;
};

bool has_head(std::size_t level, const NetworkConfig& config) { return level == 1 || config.auxiliary_heads; }

template <typename T>
LevelResult<T> level_forward(std::size_t level, Var<T> x, std::optional<Var<T>> lower, const BoundParameters<T>& params,
                             const NetworkConfig& config) {
  const std::string p = level_prefix(level);
  Var<T> f = conv(x, params, p + "enc.stem.", 1);
  if (lower) f = ops::add(f, attention::cross_forward(f, *lower, attention::bind(params, p + "enc.fuse.")));

  std::vector<Var<T>> skips{f};
  for (std::size_t s = 1; s < config.encoder_stages; ++s) {
    f = conv(f, params, p + "enc.down" + std::to_string(s) + ".", 2);
    for (std::size_t m = 0; m < config.blocks_per_stage; ++m) {
      f = residual_block_forward(f, params, block_prefix(p, "enc", s, m));
    }
    skips.push_back(f);
  }
  for (std::size_t s = config.encoder_stages - 1; s >= 1; --s) {
    for (std::size_t m = 0; m < config.blocks_per_stage; ++m) {
      f = residual_block_forward(f, params, block_prefix(p, "dec", s, m), std::optional<Var<T>>(skips[s]));
    }
    f = conv(ops::upsample2x(f), params, p + "dec.up" + std::to_string(s) + ".", 1);
  }
  if (!has_head(level, config)) return {f, std::nullopt};
  return {f, conv(f, params, p + "head.", 1)};
}

}  // namespace

void declare_residual_block(std::vector<ParamSpec>& specs, const std::string& prefix, const NetworkConfig& config) {
  const std::size_t c = config.channels;
  declare_conv(specs, prefix + "conv1.", c, c, 3);
  attention::declare(specs, prefix + "attn.", attention_config(config));
  dynamic_filter::declare(specs, prefix + "dyn.", {c, c, config.kernel_size});
  declare_conv(specs, prefix + "conv2.", c, c, 3);
}

std::vector<ParamSpec> parameter_specs(const NetworkConfig& config) {
  config.validate();
  const std::size_t c = config.channels;
  std::vector<ParamSpec> specs;
  for (std::size_t level = 1; level <= config.levels; ++level) {
    const std::string p = level_prefix(level);
    declare_conv(specs, p + "enc.stem.", c, 3, 3);
    if (level < config.levels) attention::declare(specs, p + "enc.fuse.", attention_config(config));
    for (std::size_t s = 1; s < config.encoder_stages; ++s) {
      declare_conv(specs, p + "enc.down" + std::to_string(s) + ".", c, c, 3);
      for (std::size_t m = 0; m < config.blocks_per_stage; ++m) {
        declare_residual_block(specs, block_prefix(p, "enc", s, m), config);
      }
    }
    for (std::size_t s = config.encoder_stages - 1; s >= 1; --s) {
      for (std::size_t m = 0; m < config.blocks_per_stage; ++m) {
        declare_residual_block(specs, block_prefix(p, "dec", s, m), config);
      }
      declare_conv(specs, p + "dec.up" + std::to_string(s) + ".", c, c, 3);
    }
    if (has_head(level, config)) declare_conv(specs, p + "head.", 3, c, 3, Init::kZero);
  }
  return specs;
}

template <typename T>
ParameterSet<T> init_params(const NetworkConfig& config, std::uint64_t seed) {
  return initialize<T>(parameter_specs(config), seed);
}

std::size_t patch_count(std::size_t level) {
  if (level < 1 || level > 3) throw std::invalid_argument("patch_count: level must be 1, 2 or 3");
  return grid_rows(level) * grid_cols(level);
}

template <typename T>
std::vector<Tensor<T>> split_patches(const Tensor<T>& img, std::size_t level) {
  check_split(img.shape(), level);
  Tape<T> tape(false);
  const bool batched = img.rank() == 4;
  auto v = tape.leaf(batched ? img : img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)}));
  std::vector<Tensor<T>> out;
  for (auto p : split_patches(v, level)) {
    const auto& t = p.value();
    out.push_back(batched ? t : t.reshaped({t.dim(1), t.dim(2), t.dim(3)}));
  }
  return out;
}

template <typename T>
Tensor<T> merge_patches(const std::vector<Tensor<T>>& patches, std::size_t level) {
  if (level < 1 || level > 3) throw std::invalid_argument("merge_patches: level must be 1, 2 or 3");
  if (patches.size() != patch_count(level)) {
    throw ShapeError("merge_patches: level " + std::to_string(level) + " needs " + std::to_string(patch_count(level)) +
                     " patches, got " + std::to_string(patches.size()));
  }
  const bool batched = patches.front().rank() == 4;
  if (!batched && patches.front().rank() != 3) throw ShapeError("merge_patches: patches must be [C,H,W] or [B,C,H,W]");
  Tape<T> tape(false);
  std::vector<Var<T>> vars;
  for (const auto& p : patches) {
    if (p.rank() != patches.front().rank()) throw ShapeError("merge_patches: patch ranks differ");
    vars.push_back(tape.leaf(batched ? p : p.reshaped({1, p.dim(0), p.dim(1), p.dim(2)})));
  }
  const auto& t = merge_patches(vars, level).value();
  return batched ? t : t.reshaped({t.dim(1), t.dim(2), t.dim(3)});
}

template <typename T>
std::vector<Var<T>> split_patches(Var<T> img, std::size_t level) {
  check_split(img.shape(), level);
  auto x = as_batched(img);
  const std::size_t rows = grid_rows(level), cols = grid_cols(level);
  const std::size_t h = x.shape()[2] / rows, w = x.shape()[3] / cols;
  if (level == 1) return {x};
  std::vector<Var<T>> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.push_back(ops::crop(x, r * h, c * w, h, w));
  }
  return out;
}

template <typename T>
Var<T> merge_patches(const std::vector<Var<T>>& patches, std::size_t level) {
  if (patches.size() != patch_count(level)) {
    throw ShapeError("merge_patches: level " + std::to_string(level) + " needs " + std::to_string(patch_count(level)) +
                     " patches, got " + std::to_string(patches.size()));
  }
  if (level == 1) return patches.front();
  return ops::stitch(patches, grid_rows(level), grid_cols(level));
}

template <typename T>
Var<T> residual_block_forward(Var<T> x, const BoundParameters<T>& params, const std::string& prefix,
                              std::optional<Var<T>> context) {
  auto h = conv(x, params, prefix + "conv1.", 1);
  const auto attn_w = attention::bind(params, prefix + "attn.");
  auto att = context ? attention::cross_forward(h, *context, attn_w) : attention::forward(h, attn_w);
  auto dyn = dynamic_filter::forward(h, dynamic_filter::bind(params, prefix + "dyn."));
  return ops::add(x, conv(dynamic_filter::gl_fuse(att, dyn), params, prefix + "conv2.", 1));
}

void validate_input(const Shape& shape, const NetworkConfig& config) {
  const bool ok_rank = shape.size() == 3 || (shape.size() == 4 && shape[0] == 1);
  if (!ok_rank || shape[shape.size() - 3] != 3) {
    throw ShapeError("network: input must be [3,H,W] or [1,3,H,W], got " + to_string(shape));
  }
  const std::size_t m = config.input_multiple();
  const std::size_t h = shape[shape.size() - 2], w = shape[shape.size() - 1];
  if (h % m != 0 || w % m != 0) {
    throw ShapeError("network: input extents " + std::to_string(h) + "x" + std::to_string(w) +
                     " must be divisible by " + std::to_string(m));
  }
}

template <typename T>
NetworkOutput<T> forward(Var<T> blurred, const BoundParameters<T>& params, const NetworkConfig& config) {
  config.validate();
  validate_input(blurred.shape(), config);
  auto x = as_batched(blurred);

  NetworkOutput<T> out;
  std::optional<Var<T>> lower;
  for (std::size_t level = config.levels; level >= 1; --level) {
    auto tiles = split_patches(x, level);
    std::vector<Var<T>> lower_tiles;
    if (lower) lower_tiles = split_patches(*lower, level);
    std::vector<Var<T>> features, residuals;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      auto r = level_forward(level, tiles[t], lower ? std::optional<Var<T>>(lower_tiles[t]) : std::nullopt, params,
                             config);
      features.push_back(r.features);
      if (r.residual) residuals.push_back(*r.residual);
    }
    lower = merge_patches(features, level);
    if (!residuals.empty()) out.level_outputs[level - 1] = ops::add(x, merge_patches(residuals, level));
  }
  out.output = out.level_outputs[0];
  return out;
}

template <typename T>
Tensor<T> infer(const Tensor<T>& blurred, const ParameterSet<T>& params, const NetworkConfig& config) {
  validate_input(blurred.shape(), config);
  Tape<T> tape(false);
  BoundParameters<T> bound(tape, params, false);
  auto out = forward(tape.leaf(blurred), bound, config).output.value();
  return std::move(out).reshaped({3, out.dim(2), out.dim(3)});
}

#define GLDB_INSTANTIATE_NETWORK(T)                                                                            \
  template ParameterSet<T> init_params(const NetworkConfig&, std::uint64_t);                                  \
  template std::vector<Tensor<T>> split_patches(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> merge_patches(const std::vector<Tensor<T>>&, std::size_t);                               \
  template std::vector<Var<T>> split_patches(Var<T>, std::size_t);                                            \
  template Var<T> merge_patches(const std::vector<Var<T>>&, std::size_t);                                     \
  template Var<T> residual_block_forward(Var<T>, const BoundParameters<T>&, const std::string&,               \
                                         std::optional<Var<T>>);                                               \
  template NetworkOutput<T> forward(Var<T>, const BoundParameters<T>&, const NetworkConfig&);                 \
  template Tensor<T> infer(const Tensor<T>&, const ParameterSet<T>&, const NetworkConfig&);

GLDB_INSTANTIATE_NETWORK(float)
GLDB_INSTANTIATE_NETWORK(double)

}  // namespace gldb::network
