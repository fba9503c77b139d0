// SPDX-License-Identifier: Apache-2.0
#include "ctg/trainer/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <map>

#include "ctg/util/kv.hpp"

namespace ctg::train {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  void block(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s);
  }
  void entry(const std::string& name, const ad::Shape& shape, std::span<const double> values) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    pod<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) pod<std::uint64_t>(d);
    for (double v : values) pod<double>(v);
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

struct Entry {
  ad::Shape shape;
  std::vector<double> values;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}
  template <class T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string block(const char* what) { return bytes(pod<std::uint64_t>(what), what); }
  std::map<std::string, Entry> table(const char* what) {
    std::map<std::string, Entry> out;
    const auto count = pod<std::uint64_t>(what);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto name = bytes(pod<std::uint32_t>(what), what);
      Entry e;
      const auto rank = pod<std::uint32_t>(what);
      std::size_t numel = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        e.shape.push_back(pod<std::uint64_t>(what));
        numel *= e.shape.back();
      }
      need(numel * sizeof(double), what);
      e.values.resize(numel);
      std::memcpy(e.values.data(), data_.data() + pos_, numel * sizeof(double));
      pos_ += numel * sizeof(double);
      if (!out.emplace(name, std::move(e)).second) throw CheckpointError("duplicate checkpoint entry '" + name + "'");
    }
    return out;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::vector<std::pair<std::string, const ad::OptimizerState*>> optimizer_groups(const TrainState& s) {
  std::vector<std::pair<std::string, const ad::OptimizerState*>> g = {{"generator", &s.opt_generator},
                                                                      {"encoder", &s.opt_encoder}};
  for (std::size_t a = 0; a < s.opt_discriminators.size(); ++a) {
    g.emplace_back("discriminator." + s.model.discriminators[a].attribute, &s.opt_discriminators[a]);
  }
  return g;
}

std::vector<std::vector<ad::Parameter>> group_parameters(const TrainState& s) {
  std::vector<std::vector<ad::Parameter>> g = {s.model.generator.parameters(), s.model.encoder.parameters()};
  for (const auto& d : s.model.discriminators) g.push_back(d.parameters());
  return g;
}

void write_parameters(Writer& w, const TrainState& s) {
  const auto params = s.model.all_parameters();
  w.pod<std::uint64_t>(params.size());
  for (const auto& p : params) w.entry(p.name, p.tensor.shape(), p.tensor.values());
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const Entry& take(const std::map<std::string, Entry>& table, const std::string& name, const ad::Shape& shape) {
  auto it = table.find(name);
  if (it == table.end()) throw CheckpointError("checkpoint lacks entry '" + name + "'");
  if (it->second.shape != shape) {
    throw CheckpointError("checkpoint entry '" + name + "' has shape " + ad::shape_str(it->second.shape) +
                          ", model expects " + ad::shape_str(shape));
  }
  return it->second;
}

}  // namespace

std::string serialize_checkpoint(const TrainState& s) {
  Writer w;
  w.bytes("CTXG");
  w.pod<std::uint32_t>(kCheckpointVersion);
  write_parameters(w, s);

  const auto groups = optimizer_groups(s);
  const auto params = group_parameters(s);
  std::uint64_t count = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) count += 2 * params[g].size() + 1;
  w.pod<std::uint64_t>(count);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [name, st] = groups[g];
    for (std::size_t i = 0; i < params[g].size(); ++i) {
      w.entry("opt." + name + ".m." + params[g][i].name, params[g][i].tensor.shape(), st->m[i]);
      w.entry("opt." + name + ".v." + params[g][i].name, params[g][i].tensor.shape(), st->v[i]);
    }
    const double step = static_cast<double>(st->step);
    w.entry("opt." + name + ".step", {}, std::span<const double>(&step, 1));
  }

  w.block(s.config.to_text());
  w.block(s.vocab.to_text());
  w.block("global_step = " + std::to_string(s.global_step) + "\njoint_step = " + std::to_string(s.joint_step) +
          "\nbest_heldout = " + fmt_real(s.best_heldout) + "\nstale_evaluations = " +
          std::to_string(s.stale_evaluations) + "\nstopped_early = " + (s.stopped_early ? "1" : "0") + "\n");
  w.pod<std::uint64_t>(fnv1a(w.str().data(), w.str().size()));
  return std::move(w.str());
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "CTXG") != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  Reader r(bytes, body);
  r.bytes(4, "magic");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (fnv1a(bytes.data(), body) != stored) throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
  const auto params = r.table("parameters");
  const auto opt = r.table("optimizer state");
  const auto config = TrainConfig::parse(r.block("config"));
  const auto vocab = text::Vocabulary::from_text(r.block("vocabulary"));
  const auto meta_text = r.block("run counters");
  if (r.pos() != body) throw CheckpointError("checkpoint has trailing bytes before the checksum");

  TrainState s = init_state(config, vocab);
  const auto model_params = s.model.all_parameters();
  if (model_params.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(params.size()) + " parameters, model has " +
                          std::to_string(model_params.size()));
  }
  for (const auto& p : model_params) {
    const auto& e = take(params, p.name, p.tensor.shape());
    auto dst = ad::Tensor(p.tensor).mutable_values();
    std::copy(e.values.begin(), e.values.end(), dst.begin());
  }

  const auto groups = group_parameters(s);
  std::vector<ad::OptimizerState*> states = {&s.opt_generator, &s.opt_encoder};
  for (auto& d : s.opt_discriminators) states.push_back(&d);
  const auto names = optimizer_groups(s);
  std::size_t expected = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    expected += 2 * groups[g].size() + 1;
    const auto& prefix = "opt." + names[g].first;
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      states[g]->m[i] = take(opt, prefix + ".m." + groups[g][i].name, groups[g][i].tensor.shape()).values;
      states[g]->v[i] = take(opt, prefix + ".v." + groups[g][i].name, groups[g][i].tensor.shape()).values;
    }
    states[g]->step = static_cast<std::uint64_t>(take(opt, prefix + ".step", {}).values[0]);
  }
  if (expected != opt.size()) throw CheckpointError("checkpoint optimizer table has unexpected entries");

  for (const auto& [key, value] : util::parse_key_values(meta_text)) {
    if (key == "global_step") s.global_step = std::stoull(value);
    else if (key == "joint_step") s.joint_step = std::stoull(value);
    else if (key == "best_heldout") s.best_heldout = std::strtod(value.c_str(), nullptr);
    else if (key == "stale_evaluations") s.stale_evaluations = std::stoull(value);
    else if (key == "stopped_early") s.stopped_early = value == "1";
    else throw CheckpointError("unknown run counter '" + key + "'");
  }
  if (s.joint_step > s.global_step) throw CheckpointError("checkpoint joint_step exceeds global_step");
  return s;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  util::write_file(path, serialize_checkpoint(state));
}

TrainState load_checkpoint(const std::string& path) {
  std::string bytes;
  try {
    bytes = util::read_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(e.what());
  }
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

std::string checkpoint_digest(const TrainState& state) {
  Writer w;
  write_parameters(w, state);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(w.str().data(), w.str().size())));
  return buf;
}

}  // namespace ctg::train
