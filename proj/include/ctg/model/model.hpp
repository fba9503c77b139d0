// SPDX-License-Identifier: Apache-2.0
//
// Parameters of the three networks: the LSTM generator, the LSTM variational
// encoder and one convolutional discriminator per attribute. Each network
// owns its embedding matrix; row PAD of every embedding is masked to zero
// in the forward pass.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctg/ad/adam.hpp"
#include "ctg/ad/tensor.hpp"
#include "ctg/model/lstm.hpp"

namespace ctg::model {

struct AttributeDims {
  std::string name;
  std::size_t categories = 2;
};

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t d_emb = 64;
  std::size_t d_hid = 64;
  std::size_t d_z = 16;
  std::vector<AttributeDims> attributes;
  std::size_t disc_filters = 100;
  std::vector<std::size_t> disc_windows = {3, 4, 5};
  // Concatenate (z, c) to every generator input, not only the initial state.
  bool feed_latent = false;
  double init_scale = 0.1;

  std::size_t code_dim() const;
  std::size_t attribute_offset(std::size_t a) const;
};

struct GeneratorParams {
  ad::Tensor embedding;  // [V, E]
  LstmParams lstm;
  ad::Tensor init_weight;  // [d_z + d_c, 2H] -> (h0, c0)
  ad::Tensor init_bias;
  ad::Tensor out_weight;  // [H, V]
  ad::Tensor out_bias;
  bool feed_latent = false;

  std::vector<ad::Parameter> parameters() const;
  GeneratorParams frozen() const;
};

struct EncoderParams {
  ad::Tensor embedding;
  LstmParams lstm;
  ad::Tensor mu_weight;  // [H, d_z]
  ad::Tensor mu_bias;
  ad::Tensor logvar_weight;
  ad::Tensor logvar_bias;

  std::vector<ad::Parameter> parameters() const;
  EncoderParams frozen() const;
};

struct DiscriminatorParams {
  std::string attribute;
  std::size_t categories = 2;
  ad::Tensor embedding;
  std::vector<std::size_t> windows;
  std::vector<ad::Tensor> conv_weight;  // [w * E, F] per window
  std::vector<ad::Tensor> conv_bias;
  ad::Tensor head_weight;  // [windows * F, K]
  ad::Tensor head_bias;

  std::vector<ad::Parameter> parameters() const;
  DiscriminatorParams frozen() const;
};

GeneratorParams init_generator(const ModelDims& dims, util::Rng& rng);
EncoderParams init_encoder(const ModelDims& dims, util::Rng& rng);
DiscriminatorParams init_discriminator(const ModelDims& dims, const AttributeDims& attr, util::Rng& rng);

struct Model {
  ModelDims dims;
  GeneratorParams generator;
  EncoderParams encoder;
  std::vector<DiscriminatorParams> discriminators;  // same order as dims.attributes

  // Deterministic in `seed`; each network draws from its own stream.
  static Model init(const ModelDims& dims, std::uint64_t seed);

  std::size_t attribute_index(const std::string& name) const;
  std::vector<ad::Parameter> all_parameters() const;
  // Deep copy: parameter tensors do not alias the source.
  Model clone() const;
};

// Sets every entry of `t` to `v`.
void fill(ad::Tensor& t, double v);

}  // namespace ctg::model
