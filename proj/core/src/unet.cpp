#include "fedseg/unet.hpp"

#include <cmath>
#include <limits>

namespace fedseg {

namespace {
constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kKernel = 3;

void add_block(std::vector<ParameterSpec>& out, const std::string& prefix, std::size_t in, std::size_t width) {
  for (int u = 1; u <= 2; ++u) {
    const std::string conv = prefix + ".conv" + std::to_string(u);
    const std::string bn = prefix + ".bn" + std::to_string(u);
    const std::size_t cin = u == 1 ? in : width;
    out.push_back({conv + ".weight", {width, cin, kKernel, kKernel}, true});
    out.push_back({conv + ".bias", {width}, true});
    out.push_back({bn + ".gamma", {width}, true});
    out.push_back({bn + ".beta", {width}, true});
    out.push_back({bn + ".running_mean", {width}, false});
    out.push_back({bn + ".running_var", {width}, false});
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

void UNetConfig::validate() const {
  if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
  if (depth < 1) throw ConfigError("model.depth must be >= 1");
  if (depth > 8) throw ConfigError("model.depth must be <= 8");
  if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
  if (base_channels > 1024) throw ConfigError("model.base_channels must be <= 1024");
}

bool UNetConfig::supports_input(std::size_t height, std::size_t width) const {
  const std::size_t factor = std::size_t{1} << depth;
  return height >= factor && width >= factor && height % factor == 0 && width % factor == 0;
}

void UNetConfig::require_input(std::size_t height, std::size_t width) const {
  if (!supports_input(height, width)) {
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by 2^depth = " + std::to_string(std::size_t{1} << depth));
  }
}

std::vector<ParameterSpec> unet_layout(const UNetConfig& c) {
  c.validate();
  std::vector<ParameterSpec> out;
  for (std::size_t i = 0; i < c.depth; ++i) {
    add_block(out, "enc" + std::to_string(i), i == 0 ? c.in_channels : c.encoder_width(i - 1), c.encoder_width(i));
  }
  add_block(out, "bridge", c.encoder_width(c.depth - 1), c.bridge_width());
  for (std::size_t j = 0; j < c.depth; ++j) {
    const std::size_t from = j == 0 ? c.bridge_width() : c.decoder_width(j - 1);
    add_block(out, "dec" + std::to_string(j), from + c.skip_width(j), c.decoder_width(j));
  }
  out.push_back({"head.weight", {UNetConfig::out_channels, c.decoder_width(c.depth - 1), 1, 1}, true});
  out.push_back({"head.bias", {UNetConfig::out_channels}, true});
  return out;
}

template <typename T>
UNet<T>::UNet(UNetConfig config, ParameterSet<T> params) : config_(config), params_(std::move(params)) {
  for (std::size_t i = 0; i < config_.depth; ++i) encoder_.push_back(block_indices("enc" + std::to_string(i)));
  bridge_ = block_indices("bridge");
  for (std::size_t j = 0; j < config_.depth; ++j) decoder_.push_back(block_indices("dec" + std::to_string(j)));
  head_weight_ = params_.index_of("head.weight");
  head_bias_ = params_.index_of("head.bias");
  grad_slot_.assign(params_.size(), kNoSlot);
  std::size_t slot = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& name = params_.name(i);
    if (!ends_with(name, ".running_mean") && !ends_with(name, ".running_var")) grad_slot_[i] = slot++;
  }
}

template <typename T>
typename UNet<T>::Block UNet<T>::block_indices(const std::string& prefix) const {
  Block b{};
  for (int u = 0; u < 2; ++u) {
    const std::string conv = prefix + ".conv" + std::to_string(u + 1);
    const std::string bn = prefix + ".bn" + std::to_string(u + 1);
    b.units[u] = Unit{params_.index_of(conv + ".weight"), params_.index_of(conv + ".bias"),
                      params_.index_of(bn + ".gamma"),    params_.index_of(bn + ".beta"),
                      params_.index_of(bn + ".running_mean"), params_.index_of(bn + ".running_var")};
  }
  return b;
}

template <typename T>
UNet<T> UNet<T>::build(const UNetConfig& config, Rng& rng) {
  ParameterSet<T> params;
  for (const auto& spec : unet_layout(config)) {
    Tensor<T> t(spec.shape);
    if (ends_with(spec.name, ".weight")) {
      const std::size_t fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3];
      t = rng_normal<T>(rng, spec.shape, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    } else if (ends_with(spec.name, ".gamma") || ends_with(spec.name, ".running_var")) {
      t = Tensor<T>::fill(spec.shape, T{1});
    }
    params.add(spec.name, std::move(t));
  }
  return UNet(config, std::move(params));
}

template <typename T>
UNet<T> UNet<T>::from_parameters(const UNetConfig& config, ParameterSet<T> params) {
  ParameterSet<T> expected;
  for (const auto& spec : unet_layout(config)) expected.add(spec.name, Tensor<T>(spec.shape));
  expected.require_aligned(params);
  return UNet(config, std::move(params));
}

template <typename T>
void UNet<T>::load_parameters(const ParameterSet<T>& params) {
  params_.require_aligned(params);
  for (std::size_t i = 0; i < params.size(); ++i) params_.tensor(i) = params.tensor(i);
}

template <typename T>
std::vector<std::string> UNet<T>::trainable_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grad_slot_[i] != kNoSlot) out.push_back(params_.name(i));
  }
  return out;
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& batch, nn::Mode mode, UNetTape<T>* tape) {
  UNetTape<T> scratch;
  return run(batch, mode, tape ? *tape : scratch, mode == nn::Mode::Train ? &params_ : nullptr);
}

template <typename T>
Tensor<T> UNet<T>::predict(const Tensor<T>& batch) const {
  UNetTape<T> scratch;
  return run(batch, nn::Mode::Eval, scratch, nullptr);
}

template <typename T>
Tensor<T> UNet<T>::run(const Tensor<T>& batch, nn::Mode mode, UNetTape<T>& tape, ParameterSet<T>* stats) const {
  if (batch.rank() != 4) throw ShapeError("unet: expected NCHW batch, got " + shape_to_string(batch.shape()));
  if (batch.dim(1) != config_.in_channels) {
    throw ShapeError("unet: batch has " + std::to_string(batch.dim(1)) + " channels, model expects " +
                     std::to_string(config_.in_channels));
  }
  if (!config_.supports_input(batch.dim(2), batch.dim(3))) {
    throw ShapeError("unet: spatial size " + shape_to_string(batch.shape()) + " not divisible by 2^" +
                     std::to_string(config_.depth));
  }

  const std::size_t depth = config_.depth;
  tape = UNetTape<T>{};
  tape.pools.resize(depth);
  tape.encoder.resize(depth);
  tape.upsamples.resize(depth);
  tape.decoder.resize(depth);

  auto run_block = [&](const Block& block, typename UNetTape<T>::Block& rec, Tensor<T> x) {
    for (int u = 0; u < 2; ++u) {
      const Unit& p = block.units[u];
      auto& r = rec.units[u];
      x = r.conv.forward(x, params_.tensor(p.weight), params_.tensor(p.bias));
      x = r.relu.forward(x);
      Tensor<T> mean = params_.tensor(p.mean);
      Tensor<T> var = params_.tensor(p.var);
      x = r.bn.forward(x, params_.tensor(p.gamma), params_.tensor(p.beta), mean, var, mode);
      if (stats) {
        stats->tensor(p.mean) = std::move(mean);
        stats->tensor(p.var) = std::move(var);
      }
    }
    return x;
  };

  std::vector<Tensor<T>> enc_out(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    Tensor<T> pooled = tape.pools[i].forward(i == 0 ? batch : enc_out[i - 1]);
    enc_out[i] = run_block(encoder_[i], tape.encoder[i], std::move(pooled));
  }
  Tensor<T> cur = run_block(bridge_, tape.bridge, enc_out[depth - 1]);
  for (std::size_t j = 0; j < depth; ++j) {
    Tensor<T> up = tape.upsamples[j].forward(cur);
    if (config_.skip_width(j) != 0) up = nn::concat_channels(up, enc_out[depth - 2 - j]);
    cur = run_block(decoder_[j], tape.decoder[j], std::move(up));
  }
  Tensor<T> logits = tape.head.forward(cur, params_.tensor(head_weight_), params_.tensor(head_bias_));
  tape.recorded = true;
  return tape.sigmoid.forward(logits);
}

template <typename T>
ParameterSet<T> UNet<T>::backward(UNetTape<T>& tape, const Tensor<T>& grad_output) const {
  if (!tape.recorded) throw UsageError("unet backward: tape holds no forward pass");
  tape.recorded = false;

  std::vector<Tensor<T>> grads(params_.size());
  auto put = [&](std::size_t index, Tensor<T> g) { grads[index] = std::move(g); };

  auto back_block = [&](const Block& block, typename UNetTape<T>::Block& rec, Tensor<T> d) {
    for (int u = 1; u >= 0; --u) {
      const Unit& p = block.units[u];
      auto& r = rec.units[u];
      auto bn = r.bn.backward(params_.tensor(p.gamma), d);
      put(p.gamma, std::move(bn.gamma));
      put(p.beta, std::move(bn.beta));
      d = r.relu.backward(bn.input);
      auto conv = r.conv.backward(params_.tensor(p.weight), d);
      put(p.weight, std::move(conv.weight));
      put(p.bias, std::move(conv.bias));
      d = std::move(conv.input);
    }
    return d;
  };

  const std::size_t depth = config_.depth;
  Tensor<T> d = tape.sigmoid.backward(grad_output);
  auto head = tape.head.backward(params_.tensor(head_weight_), d);
  put(head_weight_, std::move(head.weight));
  put(head_bias_, std::move(head.bias));
  d = std::move(head.input);

  std::vector<Tensor<T>> skip_grad(depth);
  for (std::size_t jj = depth; jj-- > 0;) {
    Tensor<T> d_in = back_block(decoder_[jj], tape.decoder[jj], std::move(d));
    const std::size_t skip = config_.skip_width(jj);
    if (skip != 0) {
      auto [d_up, d_skip] = nn::split_channels(d_in, d_in.dim(1) - skip);
      skip_grad[depth - 2 - jj] = std::move(d_skip);
      d_in = std::move(d_up);
    }
    d = tape.upsamples[jj].backward(d_in);
  }
  d = back_block(bridge_, tape.bridge, std::move(d));
  for (std::size_t ii = depth; ii-- > 0;) {
    if (!skip_grad[ii].empty()) accumulate(d, skip_grad[ii]);
    d = back_block(encoder_[ii], tape.encoder[ii], std::move(d));
    d = tape.pools[ii].backward(d);
  }

  ParameterSet<T> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grad_slot_[i] != kNoSlot) out.add(params_.name(i), std::move(grads[i]));
  }
  return out;
}

template <typename T>
UNetConfig infer_unet_config(const ParameterSet<T>& params) {
  UNetConfig config;
  if (!params.contains("enc0.conv1.weight")) throw ConfigError("not a U-Net parameter set: no enc0.conv1.weight");
  const Shape& w = params.at("enc0.conv1.weight").shape();
  if (w.size() != 4) throw ConfigError("enc0.conv1.weight has shape " + shape_to_string(w));
  config.base_channels = w[0];
  config.in_channels = w[1];
  config.depth = 0;
  while (params.contains("enc" + std::to_string(config.depth) + ".conv1.weight")) ++config.depth;
  config.validate();
  const auto layout = unet_layout(config);
  bool ok = layout.size() == params.size();
  for (std::size_t i = 0; ok && i < layout.size(); ++i)
    ok = layout[i].name == params.name(i) && layout[i].shape == params.tensor(i).shape();
  if (!ok)
    throw ConfigError("parameter set does not match the U-Net layout for depth " + std::to_string(config.depth) +
                      ", base " + std::to_string(config.base_channels));
  return config;
}

template UNetConfig infer_unet_config(const ParameterSet<float>&);
template UNetConfig infer_unet_config(const ParameterSet<double>&);

template class UNet<float>;
template class UNet<double>;

}  // namespace fedseg
