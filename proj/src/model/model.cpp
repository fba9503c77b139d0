// SPDX-License-Identifier: Apache-2.0
#include "ctg/model/model.hpp"

#include <stdexcept>

namespace ctg::model {

std::size_t ModelDims::code_dim() const {
  std::size_t n = 0;
  for (const auto& a : attributes) n += a.categories;
  return n;
}

std::size_t ModelDims::attribute_offset(std::size_t a) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < a; ++i) off += attributes[i].categories;
  return off;
}

namespace {

ad::Tensor zeros_param(ad::Shape shape) { return ad::Tensor::zeros(std::move(shape), true); }

ad::Tensor copy_param(const ad::Tensor& t) {
  return ad::Tensor::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), true);
}

LstmParams copy_lstm(const LstmParams& p) {
  LstmParams out = p;
  out.weight = copy_param(p.weight);
  out.bias = copy_param(p.bias);
  return out;
}

}  // namespace

void fill(ad::Tensor& t, double v) {
  for (auto& x : t.mutable_values()) x = v;
}

std::vector<ad::Parameter> GeneratorParams::parameters() const {
  std::vector<ad::Parameter> out{{"generator.embedding", embedding}};
  lstm.append_parameters("generator.lstm", out);
  out.push_back({"generator.init.weight", init_weight});
  out.push_back({"generator.init.bias", init_bias});
  out.push_back({"generator.out.weight", out_weight});
  out.push_back({"generator.out.bias", out_bias});
  return out;
}

GeneratorParams GeneratorParams::frozen() const {
  GeneratorParams g = *this;
  g.embedding = embedding.detach();
  g.lstm = lstm.frozen();
  g.init_weight = init_weight.detach();
  g.init_bias = init_bias.detach();
  g.out_weight = out_weight.detach();
  g.out_bias = out_bias.detach();
  return g;
}

std::vector<ad::Parameter> EncoderParams::parameters() const {
  std::vector<ad::Parameter> out{{"encoder.embedding", embedding}};
  lstm.append_parameters("encoder.lstm", out);
  out.push_back({"encoder.mu.weight", mu_weight});
  out.push_back({"encoder.mu.bias", mu_bias});
  out.push_back({"encoder.logvar.weight", logvar_weight});
  out.push_back({"encoder.logvar.bias", logvar_bias});
  return out;
}

EncoderParams EncoderParams::frozen() const {
  EncoderParams e = *this;
  e.embedding = embedding.detach();
  e.lstm = lstm.frozen();
  e.mu_weight = mu_weight.detach();
  e.mu_bias = mu_bias.detach();
  e.logvar_weight = logvar_weight.detach();
  e.logvar_bias = logvar_bias.detach();
  return e;
}

std::vector<ad::Parameter> DiscriminatorParams::parameters() const {
  const std::string prefix = "discriminator." + attribute;
  std::vector<ad::Parameter> out{{prefix + ".embedding", embedding}};
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::string conv = prefix + ".conv" + std::to_string(windows[i]);
    out.push_back({conv + ".weight", conv_weight[i]});
    out.push_back({conv + ".bias", conv_bias[i]});
  }
  out.push_back({prefix + ".head.weight", head_weight});
  out.push_back({prefix + ".head.bias", head_bias});
  return out;
}

DiscriminatorParams DiscriminatorParams::frozen() const {
  DiscriminatorParams d = *this;
  d.embedding = embedding.detach();
  for (auto& w : d.conv_weight) w = w.detach();
  for (auto& b : d.conv_bias) b = b.detach();
  d.head_weight = head_weight.detach();
  d.head_bias = head_bias.detach();
  return d;
}

GeneratorParams init_generator(const ModelDims& dims, util::Rng& rng) {
  const double s = dims.init_scale;
  GeneratorParams g;
  g.feed_latent = dims.feed_latent;
  const std::size_t latent = dims.d_z + dims.code_dim();
  g.embedding = uniform_tensor({dims.vocab, dims.d_emb}, s, rng);
  g.lstm = LstmParams::init(dims.d_emb + (dims.feed_latent ? latent : 0), dims.d_hid, s, rng);
  g.init_weight = uniform_tensor({latent, 2 * dims.d_hid}, s, rng);
  g.init_bias = zeros_param({2 * dims.d_hid});
  g.out_weight = uniform_tensor({dims.d_hid, dims.vocab}, s, rng);
  g.out_bias = zeros_param({dims.vocab});
  return g;
}

EncoderParams init_encoder(const ModelDims& dims, util::Rng& rng) {
  const double s = dims.init_scale;
  EncoderParams e;
  e.embedding = uniform_tensor({dims.vocab, dims.d_emb}, s, rng);
  e.lstm = LstmParams::init(dims.d_emb, dims.d_hid, s, rng);
  e.mu_weight = uniform_tensor({dims.d_hid, dims.d_z}, s, rng);
  e.mu_bias = zeros_param({dims.d_z});
  e.logvar_weight = uniform_tensor({dims.d_hid, dims.d_z}, s, rng);
  e.logvar_bias = zeros_param({dims.d_z});
  return e;
}

DiscriminatorParams init_discriminator(const ModelDims& dims, const AttributeDims& attr, util::Rng& rng) {
  const double s = dims.init_scale;
  DiscriminatorParams d;
  d.attribute = attr.name;
  d.categories = attr.categories;
  d.windows = dims.disc_windows;
  d.embedding = uniform_tensor({dims.vocab, dims.d_emb}, s, rng);
  for (auto w : d.windows) {
    d.conv_weight.push_back(uniform_tensor({w * dims.d_emb, dims.disc_filters}, s, rng));
    d.conv_bias.push_back(zeros_param({dims.disc_filters}));
  }
  d.head_weight = uniform_tensor({d.windows.size() * dims.disc_filters, attr.categories}, s, rng);
  d.head_bias = zeros_param({attr.categories});
  return d;
}

Model Model::init(const ModelDims& dims, std::uint64_t seed) {
  if (dims.vocab <= 4) throw std::invalid_argument("model needs a vocabulary beyond the reserved ids");
  Model m;
  m.dims = dims;
  auto grng = util::Rng::derive(seed, "init.generator");
  auto erng = util::Rng::derive(seed, "init.encoder");
  m.generator = init_generator(dims, grng);
  m.encoder = init_encoder(dims, erng);
  for (const auto& a : dims.attributes) {
    auto drng = util::Rng::derive(seed, "init.discriminator." + a.name);
    m.discriminators.push_back(init_discriminator(dims, a, drng));
  }
  return m;
}

std::size_t Model::attribute_index(const std::string& name) const {
  for (std::size_t i = 0; i < dims.attributes.size(); ++i) {
    if (dims.attributes[i].name == name) return i;
  }
  throw std::invalid_argument("model has no attribute '" + name + "'");
}

std::vector<ad::Parameter> Model::all_parameters() const {
  auto out = generator.parameters();
  for (auto& p : encoder.parameters()) out.push_back(p);
  for (const auto& d : discriminators) {
    for (auto& p : d.parameters()) out.push_back(p);
  }
  return out;
}

Model Model::clone() const {
  Model m = *this;
  auto& g = m.generator;
  g.embedding = copy_param(g.embedding);
  g.lstm = copy_lstm(g.lstm);
  g.init_weight = copy_param(g.init_weight);
  g.init_bias = copy_param(g.init_bias);
  g.out_weight = copy_param(g.out_weight);
  g.out_bias = copy_param(g.out_bias);
  auto& e = m.encoder;
  e.embedding = copy_param(e.embedding);
  e.lstm = copy_lstm(e.lstm);
  e.mu_weight = copy_param(e.mu_weight);
  e.mu_bias = copy_param(e.mu_bias);
  e.logvar_weight = copy_param(e.logvar_weight);
  e.logvar_bias = copy_param(e.logvar_bias);
  for (auto& d : m.discriminators) {
    d.embedding = copy_param(d.embedding);
    for (auto& w : d.conv_weight) w = copy_param(w);
    for (auto& b : d.conv_bias) b = copy_param(b);
    d.head_weight = copy_param(d.head_weight);
    d.head_bias = copy_param(d.head_bias);
  }
  return m;
}

}  // namespace ctg::model
