// SPDX-License-Identifier: Apache-2.0
#include "ctg/trainer/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "ctg/util/kv.hpp"

namespace ctg::train {

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("config key '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  errno = 0;
  const auto x = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw std::invalid_argument("config key '" + key + "' is out of range");
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw std::invalid_argument("config key '" + key + "' expects a real number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

AttributeConfig& attribute_slot(TrainConfig& c, const std::string& name) {
  for (auto& a : c.attributes) {
    if (a.name == name) return a;
  }
  c.attributes.push_back({name, {}, ""});
  return c.attributes.back();
}

}  // namespace

TrainConfig TrainConfig::parse(std::string_view text, const std::string& base_dir) {
  TrainConfig c;
  for (const auto& [key, value] : util::parse_key_values(text)) {
    auto u64 = [&, &key = key, &value = value] { return parse_u64(key, value); };
    auto real = [&, &key = key, &value = value] { return parse_real(key, value); };
    if (key == "seed") c.seed = u64();
    else if (key == "d_emb") c.d_emb = u64();
    else if (key == "d_hid") c.d_hid = u64();
    else if (key == "d_z") c.d_z = u64();
    else if (key == "disc_filters") c.disc_filters = u64();
    else if (key == "disc_windows") {
      c.disc_windows.clear();
      for (const auto& w : util::split_list(value)) c.disc_windows.push_back(parse_u64(key, w));
    } else if (key == "feed_latent") c.feed_latent = parse_bool(key, value);
    else if (key == "init_scale") c.init_scale = real();
    else if (key == "max_len") c.max_len = u64();
    else if (key == "lambda_c") c.weights.lambda_c = real();
    else if (key == "lambda_z") c.weights.lambda_z = real();
    else if (key == "lambda_u") c.weights.lambda_u = real();
    else if (key == "beta") c.weights.beta = real();
    else if (key == "kl_anneal_steps") c.weights.kl_anneal_steps = u64();
    else if (key == "tau_start") c.weights.tau_start = real();
    else if (key == "tau_end") c.weights.tau_end = real();
    else if (key == "tau_decay_steps") c.weights.tau_decay_steps = u64();
    else if (key == "reward_entropy") c.weights.reward_entropy = parse_bool(key, value);
    else if (key == "batch_size") c.batch_size = u64();
    else if (key == "lr_generator") c.lr_generator = real();
    else if (key == "lr_discriminator") c.lr_discriminator = real();
    else if (key == "grad_clip") c.grad_clip = real();
    else if (key == "vae_pretrain_steps") c.vae_pretrain_steps = u64();
    else if (key == "joint_steps") c.joint_steps = u64();
    else if (key == "disc_steps_per_cycle") c.disc_steps_per_cycle = u64();
    else if (key == "gen_steps_per_cycle") c.gen_steps_per_cycle = u64();
    else if (key == "checkpoint_every") c.checkpoint_every = u64();
    else if (key == "early_stop_patience") c.early_stop_patience = u64();
    else if (key == "early_stop_every") c.early_stop_every = u64();
    else if (key == "heldout_size") c.heldout_size = u64();
    else if (key == "corpus") c.corpus_path = resolve(base_dir, value);
    else if (key == "output_dir") c.output_dir = resolve(base_dir, value);
    else if (key == "vocab_min_freq") c.vocab_min_freq = u64();
    else if (key.rfind("attribute.", 0) == 0 && key.size() > 10) {
      auto& a = attribute_slot(c, key.substr(10));
      if (!a.categories.empty()) throw std::invalid_argument("attribute '" + a.name + "' declared twice");
      a.categories = util::split_list(value);
    } else if (key.rfind("labeled.", 0) == 0 && key.size() > 8) {
      attribute_slot(c, key.substr(8)).labeled_path = resolve(base_dir, value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  return parse(util::read_file(path), std::filesystem::path(path).parent_path().string());
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  auto list = [](const auto& xs) {
    std::string s;
    for (const auto& x : xs) {
      if (!s.empty()) s += ",";
      if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::string>) s += x;
      else s += std::to_string(x);
    }
    return s;
  };
  os << "seed = " << seed << "\n"
     << "d_emb = " << d_emb << "\n"
     << "d_hid = " << d_hid << "\n"
     << "d_z = " << d_z << "\n"
     << "disc_filters = " << disc_filters << "\n"
     << "disc_windows = " << list(disc_windows) << "\n"
     << "feed_latent = " << (feed_latent ? "true" : "false") << "\n"
     << "init_scale = " << fmt_real(init_scale) << "\n"
     << "max_len = " << max_len << "\n";
  for (const auto& a : attributes) {
    os << "attribute." << a.name << " = " << list(a.categories) << "\n";
    os << "labeled." << a.name << " = " << a.labeled_path << "\n";
  }
  os << "lambda_c = " << fmt_real(weights.lambda_c) << "\n"
     << "lambda_z = " << fmt_real(weights.lambda_z) << "\n"
     << "lambda_u = " << fmt_real(weights.lambda_u) << "\n"
     << "beta = " << fmt_real(weights.beta) << "\n"
     << "kl_anneal_steps = " << weights.kl_anneal_steps << "\n"
     << "tau_start = " << fmt_real(weights.tau_start) << "\n"
     << "tau_end = " << fmt_real(weights.tau_end) << "\n"
     << "tau_decay_steps = " << weights.tau_decay_steps << "\n"
     << "reward_entropy = " << (weights.reward_entropy ? "true" : "false") << "\n"
     << "batch_size = " << batch_size << "\n"
     << "lr_generator = " << fmt_real(lr_generator) << "\n"
     << "lr_discriminator = " << fmt_real(lr_discriminator) << "\n"
     << "grad_clip = " << fmt_real(grad_clip) << "\n"
     << "vae_pretrain_steps = " << vae_pretrain_steps << "\n"
     << "joint_steps = " << joint_steps << "\n"
     << "disc_steps_per_cycle = " << disc_steps_per_cycle << "\n"
     << "gen_steps_per_cycle = " << gen_steps_per_cycle << "\n"
     << "checkpoint_every = " << checkpoint_every << "\n"
     << "early_stop_patience = " << early_stop_patience << "\n"
     << "early_stop_every = " << early_stop_every << "\n"
     << "heldout_size = " << heldout_size << "\n"
     << "corpus = " << corpus_path << "\n"
     << "output_dir = " << output_dir << "\n"
     << "vocab_min_freq = " << vocab_min_freq << "\n";
  return os.str();
}

void TrainConfig::validate() const {
  auto positive = [](std::uint64_t v, const char* key) {
    if (v < 1) throw std::invalid_argument(std::string("config key '") + key + "' must be at least 1");
  };
  positive(d_emb, "d_emb");
  positive(d_hid, "d_hid");
  positive(d_z, "d_z");
  positive(disc_filters, "disc_filters");
  positive(max_len, "max_len");
  positive(batch_size, "batch_size");
  positive(disc_steps_per_cycle, "disc_steps_per_cycle");
  positive(gen_steps_per_cycle, "gen_steps_per_cycle");
  positive(early_stop_every, "early_stop_every");
  positive(vocab_min_freq, "vocab_min_freq");
  if (disc_windows.empty()) throw std::invalid_argument("disc_windows must list at least one width");
  for (auto w : disc_windows) positive(w, "disc_windows");
  if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be nonnegative");
  weights.validate();
  for (const auto& a : attributes) {
    if (a.categories.size() < 2) {
      throw std::invalid_argument("attribute '" + a.name + "' needs at least two categories (attribute." + a.name +
                                  " = a,b)");
    }
    if (a.labeled_path.empty()) {
      throw std::invalid_argument("attribute '" + a.name + "' has no labeled set (labeled." + a.name + " = path)");
    }
  }
}

model::ModelDims TrainConfig::dims(std::size_t vocab) const {
  model::ModelDims d;
  d.vocab = vocab;
  d.d_emb = d_emb;
  d.d_hid = d_hid;
  d.d_z = d_z;
  for (const auto& a : attributes) d.attributes.push_back({a.name, a.categories.size()});
  d.disc_filters = disc_filters;
  d.disc_windows = disc_windows;
  d.feed_latent = feed_latent;
  d.init_scale = init_scale;
  return d;
}

std::size_t TrainConfig::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return i;
  }
  throw std::invalid_argument("unknown attribute '" + std::string(name) + "'");
}

bool same_architecture(const TrainConfig& a, const TrainConfig& b) {
  if (a.attributes.size() != b.attributes.size()) return false;
  for (std::size_t i = 0; i < a.attributes.size(); ++i) {
    if (a.attributes[i].name != b.attributes[i].name || a.attributes[i].categories != b.attributes[i].categories) {
      return false;
    }
  }
  return a.d_emb == b.d_emb && a.d_hid == b.d_hid && a.d_z == b.d_z && a.disc_filters == b.disc_filters &&
         a.disc_windows == b.disc_windows && a.feed_latent == b.feed_latent && a.max_len == b.max_len;
}

}  // namespace ctg::train
