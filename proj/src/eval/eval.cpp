// SPDX-License-Identifier: Apache-2.0
#include "ctg/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ctg/ad/ops.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/objectives/losses.hpp"
#include "ctg/trainer/trainer.hpp"

namespace ctg::eval {

namespace {

constexpr std::size_t kChunk = 250;

// grammar category index for each model category of `attribute`.
std::vector<int> oracle_mapping(const train::TrainState& s, const text::SyntheticGrammarSpec& grammar,
                                const std::string& attribute) {
  const auto& cats = s.config.attributes[s.config.attribute_index(attribute)].categories;
  const text::AttributeSpec* spec = nullptr;
  for (const auto& a : grammar.attributes) {
    if (a.name == attribute) spec = &a;
  }
  if (!spec) throw std::invalid_argument("the grammar defines no oracle for attribute '" + attribute + "'");
  std::vector<int> map;
  for (const auto& c : cats) {
    auto it = std::find(spec->categories.begin(), spec->categories.end(), c);
    if (it == spec->categories.end()) {
      throw std::invalid_argument("category '" + c + "' of attribute '" + attribute + "' is unknown to the grammar");
    }
    map.push_back(static_cast<int>(it - spec->categories.begin()));
  }
  return map;
}

// z and categories for `batch` examples; attribute `a` follows `forced`,
// the rest come from the prior. Draw order: z row-major, then categories.
model::LatentCode draw_code(const model::ModelDims& dims, std::size_t batch, std::size_t a,
                            const std::vector<int>& forced, util::Rng& rng,
                            std::vector<std::vector<int>>* categories_out = nullptr) {
  auto prior = model::sample_prior(dims, batch, rng);
  prior.categories[a] = forced;
  if (categories_out) *categories_out = prior.categories;
  return {prior.code.z, model::code_from_categories(dims, prior.categories)};
}

std::optional<int> model_category(const std::vector<std::string>& words, const std::string& attribute,
                                  const text::SyntheticGrammarSpec& grammar, const std::vector<int>& mapping) {
  const auto verdict = text::oracle_classify(words, attribute, grammar);
  if (!verdict) return std::nullopt;
  auto it = std::find(mapping.begin(), mapping.end(), *verdict);
  if (it == mapping.end()) return std::nullopt;
  return static_cast<int>(it - mapping.begin());
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

}  // namespace

double AccuracyResult::stderr_() const {
  if (n == 0) return 0.0;
  const double p = accuracy();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::vector<std::string> to_words(const text::TokenSequence& ids, const text::Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == text::kEos) break;
    if (id == text::kPad || id == text::kBos) continue;
    words.push_back(vocab.token(id));
  }
  return words;
}

AccuracyResult eval_attribute_accuracy(const train::TrainState& s, const text::SyntheticGrammarSpec& grammar,
                                       const std::string& attribute, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("eval_attribute_accuracy needs n > 0");
  const auto mapping = oracle_mapping(s, grammar, attribute);
  const std::size_t a = s.config.attribute_index(attribute);
  const std::size_t K = mapping.size();
  AccuracyResult r;
  r.attribute = attribute;
  r.n = n;
  r.seed = seed;
  r.requests.assign(K, 0);
  for (std::size_t begin = 0, chunk = 0; begin < n; begin += kChunk, ++chunk) {
    const std::size_t B = std::min(kChunk, n - begin);
    std::vector<int> want(B);
    for (std::size_t b = 0; b < B; ++b) want[b] = static_cast<int>((begin + b) % K);
    auto rng = util::Rng::derive(seed, "eval.attribute", chunk);
    const auto code = draw_code(s.model.dims, B, a, want, rng);
    const auto samples = model::decode_sample(s.model.generator, code, 1.0, s.config.max_len, rng);
    for (std::size_t b = 0; b < B; ++b) {
      ++r.requests[static_cast<std::size_t>(want[b])];
      const auto got = model_category(to_words(samples[b], s.vocab), attribute, grammar, mapping);
      if (!got) ++r.undecidable;
      else if (*got == want[b]) ++r.correct;
    }
  }
  return r;
}

double pair_preservation(const std::vector<std::string>& a, const std::vector<std::string>& b,
                         const text::SyntheticGrammarSpec& grammar) {
  const auto sa = text::content_slots(a, grammar);
  const auto sb = text::content_slots(b, grammar);
  std::set<std::string> roles;
  for (const auto& [k, v] : sa) roles.insert(k);
  for (const auto& [k, v] : sb) roles.insert(k);
  if (roles.empty()) return a == b ? 1.0 : 0.0;
  std::size_t same = 0;
  for (const auto& role : roles) {
    auto ia = sa.find(role), ib = sb.find(role);
    same += ia != sa.end() && ib != sb.end() && ia->second == ib->second;
  }
  return static_cast<double>(same) / static_cast<double>(roles.size());
}

PreservationResult eval_disentanglement(const train::TrainState& s, const text::SyntheticGrammarSpec& grammar,
                                        const std::string& attribute, std::size_t n_pairs, std::uint64_t seed,
                                        bool change) {
  if (n_pairs == 0) throw std::invalid_argument("eval_disentanglement needs at least one pair");
  if (grammar.roles.empty()) throw std::invalid_argument("the grammar tags no content roles");
  const auto mapping = oracle_mapping(s, grammar, attribute);
  const std::size_t a = s.config.attribute_index(attribute);
  const std::size_t K = mapping.size();
  PreservationResult r;
  r.attribute = attribute;
  r.pairs = n_pairs;
  r.seed = seed;
  double total = 0.0;
  std::size_t flipped = 0;
  for (std::size_t begin = 0, chunk = 0; begin < n_pairs; begin += kChunk, ++chunk) {
    const std::size_t B = std::min(kChunk, n_pairs - begin);
    std::vector<int> first(B), second(B);
    for (std::size_t b = 0; b < B; ++b) {
      first[b] = static_cast<int>((begin + b) % K);
      second[b] = change ? static_cast<int>((begin + b + 1) % K) : first[b];
    }
    auto rng = util::Rng::derive(seed, "eval.disentangle", chunk);
    std::vector<std::vector<int>> cats;
    const auto code = draw_code(s.model.dims, B, a, first, rng, &cats);
    cats[a] = second;
    const model::LatentCode other{code.z, model::code_from_categories(s.model.dims, cats)};
    const auto da = model::decode_greedy(s.model.generator, code, s.config.max_len);
    const auto db = model::decode_greedy(s.model.generator, other, s.config.max_len);
    for (std::size_t b = 0; b < B; ++b) {
      const auto wa = to_words(da[b], s.vocab), wb = to_words(db[b], s.vocab);
      total += pair_preservation(wa, wb, grammar);
      const auto ga = model_category(wa, attribute, grammar, mapping);
      const auto gb = model_category(wb, attribute, grammar, mapping);
      flipped += ga && gb && *ga == first[b] && *gb == second[b];
    }
  }
  r.preservation = total / static_cast<double>(n_pairs);
  r.attribute_flipped = static_cast<double>(flipped) / static_cast<double>(n_pairs);
  return r;
}

AugmentVariant parse_variant(const std::string& name) {
  if (name == "std") return AugmentVariant::kStd;
  if (name == "h-reg") return AugmentVariant::kHReg;
  if (name == "ours") return AugmentVariant::kOurs;
  throw std::invalid_argument("unknown variant '" + name + "' (expected std, h-reg or ours)");
}

std::string variant_name(AugmentVariant v) {
  switch (v) {
    case AugmentVariant::kStd: return "std";
    case AugmentVariant::kHReg: return "h-reg";
    case AugmentVariant::kOurs: return "ours";
  }
  return "?";
}

AugmentResult augment_and_train_classifier(const train::TrainState& s, const std::string& attribute,
                                           const std::vector<text::LabeledExample>& train_set,
                                           const std::vector<text::LabeledExample>& test_set, AugmentVariant variant,
                                           std::size_t n_generated, std::uint64_t seed,
                                           const AugmentOptions& options) {
  if (train_set.empty() || test_set.empty()) throw std::invalid_argument("augmentation needs train and test sets");
  if (variant != AugmentVariant::kStd && n_generated == 0) {
    throw std::invalid_argument("variant " + variant_name(variant) + " needs generated sentences");
  }
  const std::size_t a = s.config.attribute_index(attribute);
  const auto& attr_dims = s.model.dims.attributes[a];
  const std::size_t K = attr_dims.categories;
  const std::size_t max_len = s.config.max_len;

  auto init_rng = util::Rng::derive(seed, "augment.init", 0);
  auto clf = model::init_discriminator(s.model.dims, attr_dims, init_rng);
  auto params = clf.parameters();
  auto opt = ad::make_optimizer_state(params, ad::AdamOptions{options.lr});

  std::vector<text::LabeledExample> generated;
  if (variant != AugmentVariant::kStd) {
    for (std::size_t begin = 0, chunk = 0; begin < n_generated; begin += kChunk, ++chunk) {
      const std::size_t B = std::min(kChunk, n_generated - begin);
      std::vector<int> want(B);
      for (std::size_t b = 0; b < B; ++b) want[b] = static_cast<int>((begin + b) % K);
      auto rng = util::Rng::derive(seed, "augment.generate", chunk);
      const auto code = draw_code(s.model.dims, B, a, want, rng);
      const auto samples = model::decode_sample(s.model.generator, code, 1.0, max_len, rng);
      for (std::size_t b = 0; b < B; ++b) generated.push_back({samples[b], {{attribute, want[b]}}});
    }
  }

  const auto& w = s.config.weights;
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (const auto& p : params) ad::Tensor(p.tensor).zero_grad();
    const auto batch = train::stream_batch(train_set, options.batch_size, seed, "augment.labeled", step, max_len);
    auto loss = obj::loss_disc_supervised(clf, batch);
    if (variant != AugmentVariant::kStd) {
      const auto gen =
          train::stream_batch(generated, options.batch_size, seed, "augment.generated", step, max_len);
      const auto logp = model::discriminate_log(clf, model::one_hot_sequence(gen, s.model.dims.vocab));
      auto extra = ad::mean(obj::entropy(logp)) * w.beta;
      if (variant == AugmentVariant::kOurs) {
        const auto labels = gen.label_column(attribute);
        std::vector<double> pick(gen.size * K, 0.0);
        for (std::size_t b = 0; b < gen.size; ++b) pick[b * K + static_cast<std::size_t>(labels[b])] = 1.0;
        extra = extra - ad::mean(ad::sum_cols(logp * ad::Tensor::from({gen.size, K}, std::move(pick))));
      }
      loss = loss + extra * w.lambda_u;
    }
    ad::backward(loss);
    ad::adam_step(params, opt);
  }

  AugmentResult r;
  r.variant = variant;
  r.n_train = train_set.size();
  r.n_generated = generated.size();
  r.n_test = test_set.size();
  r.seed = seed;
  const auto frozen = clf.frozen();
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < test_set.size(); begin += kChunk) {
    const std::span<const text::LabeledExample> part(test_set.data() + begin, std::min(kChunk, test_set.size() - begin));
    const auto batch = text::make_batch(part, max_len);
    const auto labels = batch.label_column(attribute);
    const auto p = model::discriminate_log(frozen, model::one_hot_sequence(batch, s.model.dims.vocab));
    for (std::size_t b = 0; b < batch.size; ++b) {
      const double* row = p.values().data() + b * K;
      correct += static_cast<int>(std::max_element(row, row + K) - row) == labels[b];
    }
  }
  r.test_accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  return r;
}

SampleGrid sample_grid(const train::TrainState& s, const GridSpec& spec) {
  const auto& dims = s.model.dims;
  for (const auto& [name, cat] : spec.fixed) {
    const auto& cats = s.config.attributes[s.config.attribute_index(name)].categories;
    if (std::find(cats.begin(), cats.end(), cat) == cats.end()) {
      throw std::invalid_argument("attribute '" + name + "' has no category '" + cat + "'");
    }
  }
  const bool vary_attr = !spec.vary.empty() && spec.vary != "z";
  const std::size_t va = vary_attr ? s.config.attribute_index(spec.vary) : 0;
  SampleGrid grid;
  const std::size_t rows = vary_attr ? dims.attributes[va].categories : spec.rows;
  for (std::size_t r = 0; r < rows; ++r) {
    grid.row_labels.push_back(vary_attr ? s.config.attributes[va].categories[r]
                                        : (spec.vary == "z" ? "z" + std::to_string(r) : "row" + std::to_string(r)));
  }
  auto rng = util::Rng::derive(spec.seed, "eval.grid", 0);
  for (std::size_t j = 0; j < spec.n_z; ++j) {
    // One base code per block; rows vary a single factor of it.
    auto base = model::sample_prior(dims, 1, rng);
    for (const auto& [name, cat] : spec.fixed) {
      const std::size_t a = s.config.attribute_index(name);
      const auto& cats = s.config.attributes[a].categories;
      base.categories[a][0] = static_cast<int>(std::find(cats.begin(), cats.end(), cat) - cats.begin());
    }
    std::vector<double> z;
    std::vector<std::vector<int>> cats(dims.attributes.size());
    for (std::size_t r = 0; r < rows; ++r) {
      if (spec.vary == "z" && r > 0) {
        for (std::size_t i = 0; i < dims.d_z; ++i) z.push_back(rng.normal());
      } else {
        z.insert(z.end(), base.code.z.values().begin(), base.code.z.values().end());
      }
      for (std::size_t a = 0; a < cats.size(); ++a) {
        cats[a].push_back(vary_attr && a == va ? static_cast<int>(r) : base.categories[a][0]);
      }
    }
    const model::LatentCode code{ad::Tensor::from({rows, dims.d_z}, std::move(z)),
                                 model::code_from_categories(dims, cats)};
    std::vector<std::string> block;
    for (const auto& seq : model::decode_greedy(s.model.generator, code, s.config.max_len)) {
      block.push_back(join(to_words(seq, s.vocab)));
    }
    grid.blocks.push_back(std::move(block));
  }
  return grid;
}

std::string SampleGrid::to_text() const {
  std::size_t width = 0;
  for (const auto& l : row_labels) width = std::max(width, l.size());
  std::string out;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    out += "[draw " + std::to_string(j) + "]\n";
    for (std::size_t r = 0; r < blocks[j].size(); ++r) {
      out += "  " + row_labels[r] + std::string(width - row_labels[r].size() + 2, ' ') + blocks[j][r] + "\n";
    }
  }
  return out;
}

}  // namespace ctg::eval
