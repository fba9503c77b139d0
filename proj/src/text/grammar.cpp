// SPDX-License-Identifier: Apache-2.0
#include "ctg/text/grammar.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ctg/util/kv.hpp"

namespace ctg::text {

namespace {

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

const std::vector<std::string>* role_words(const SyntheticGrammarSpec& spec, std::string_view role) {
  for (const auto& [name, words] : spec.roles) {
    if (name == role) return &words;
  }
  return nullptr;
}

}  // namespace

std::size_t SyntheticGrammarSpec::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return i;
  }
  throw std::invalid_argument("grammar has no attribute '" + std::string(name) + "'");
}

void SyntheticGrammarSpec::validate() const {
  if (templates.empty()) throw std::invalid_argument("grammar needs at least one template");
  std::map<std::string, std::string> owner;
  auto claim = [&](const std::string& word, const std::string& who) {
    auto [it, fresh] = owner.emplace(word, who);
    if (!fresh && it->second != who) {
      throw std::invalid_argument("word '" + word + "' is shared by " + it->second + " and " + who);
    }
  };
  for (const auto& [name, words] : roles) {
    if (words.empty()) throw std::invalid_argument("role '" + name + "' has no words");
    for (const auto& w : words) claim(w, "role " + name);
  }
  for (const auto& a : attributes) {
    if (a.categories.size() < 2) throw std::invalid_argument("attribute '" + a.name + "' needs two categories");
    if (a.words.size() != a.categories.size()) {
      throw std::invalid_argument("attribute '" + a.name + "' has mismatched word sets");
    }
    for (std::size_t k = 0; k < a.categories.size(); ++k) {
      if (a.words[k].empty()) throw std::invalid_argument("category " + a.name + "." + a.categories[k] + " is empty");
      for (const auto& w : a.words[k]) claim(w, "category " + a.name + "." + a.categories[k]);
    }
  }
  for (std::size_t t = 0; t < templates.size(); ++t) {
    std::map<std::string, int> seen;
    for (const auto& item : templates[t]) {
      switch (item.kind) {
        case TemplateItem::Kind::kLiteral:
          claim(item.text, "literal");
          break;
        case TemplateItem::Kind::kRole:
          if (!role_words(*this, item.text)) throw std::invalid_argument("template uses unknown role " + item.text);
          break;
        case TemplateItem::Kind::kAttribute:
          ++seen[item.text];
          break;
      }
    }
    for (const auto& a : attributes) {
      if (seen[a.name] != 1) {
        throw std::invalid_argument("template " + std::to_string(t) + " must hold attribute '" + a.name +
                                    "' exactly once");
      }
    }
  }
}

std::vector<std::string> SyntheticGrammarSpec::terminals() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (seen.insert(w).second) out.push_back(w);
  };
  for (const auto& tpl : templates) {
    for (const auto& item : tpl) {
      if (item.kind == TemplateItem::Kind::kLiteral) add(item.text);
    }
  }
  for (const auto& [name, words] : roles) {
    for (const auto& w : words) add(w);
  }
  for (const auto& a : attributes) {
    for (const auto& set : a.words) {
      for (const auto& w : set) add(w);
    }
  }
  return out;
}

std::string SyntheticGrammarSpec::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << '\n';
  for (const auto& [name, words] : roles) os << "role." << name << " = " << join(words, ", ") << '\n';
  for (const auto& a : attributes) {
    os << "attribute." << a.name << " = " << join(a.categories, ", ") << '\n';
    for (std::size_t k = 0; k < a.categories.size(); ++k) {
      os << "attribute." << a.name << '.' << a.categories[k] << " = " << join(a.words[k], ", ") << '\n';
    }
  }
  for (const auto& tpl : templates) {
    os << "template =";
    for (const auto& item : tpl) os << ' ' << (item.kind == TemplateItem::Kind::kLiteral ? "" : "$") << item.text;
    os << '\n';
  }
  return os.str();
}

SyntheticGrammarSpec SyntheticGrammarSpec::parse(std::string_view text) {
  SyntheticGrammarSpec spec;
  std::vector<std::string> raw_templates;
  std::map<std::string, std::vector<std::string>> category_words;
  for (const auto& [key, value] : util::parse_key_values(text)) {
    if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "template") {
      raw_templates.push_back(value);
    } else if (key.rfind("role.", 0) == 0) {
      spec.roles.emplace_back(key.substr(5), util::split_list(value));
    } else if (key.rfind("attribute.", 0) == 0) {
      const std::string rest = key.substr(10);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) {
        AttributeSpec a;
        a.name = rest;
        a.categories = util::split_list(value);
        spec.attributes.push_back(std::move(a));
      } else {
        category_words[rest] = util::split_list(value);
      }
    } else {
      throw std::invalid_argument("unknown grammar key '" + key + "'");
    }
  }
  for (auto& a : spec.attributes) {
    for (const auto& c : a.categories) {
      auto it = category_words.find(a.name + "." + c);
      if (it == category_words.end()) throw std::invalid_argument("missing words for " + a.name + "." + c);
      a.words.push_back(it->second);
      category_words.erase(it);
    }
  }
  if (!category_words.empty()) {
    throw std::invalid_argument("word set '" + category_words.begin()->first + "' belongs to no declared attribute");
  }
  for (const auto& raw : raw_templates) {
    std::vector<TemplateItem> tpl;
    for (const auto& w : util::split_whitespace(raw)) {
      if (w[0] == '$') {
        const std::string name = w.substr(1);
        const bool is_attr = std::any_of(spec.attributes.begin(), spec.attributes.end(),
                                         [&](const AttributeSpec& a) { return a.name == name; });
        tpl.push_back({is_attr ? TemplateItem::Kind::kAttribute : TemplateItem::Kind::kRole, name});
      } else {
        tpl.push_back({TemplateItem::Kind::kLiteral, w});
      }
    }
    spec.templates.push_back(std::move(tpl));
  }
  spec.validate();
  return spec;
}

SyntheticGrammarSpec default_grammar() {
  static const char* kText = R"(seed = 7
role.subject = film, movie, actor, plot, story, script, cast, ending, music, director, scene, dialogue
role.object = audience, critics, fans, kids, viewers, family, friends, teens, parents, students, public, crowd
role.connective = for, with, to, among, despite, unlike
attribute.sentiment = negative, positive
attribute.sentiment.negative = bad, awful, dull, boring, weak, clumsy, bland, tedious
attribute.sentiment.positive = good, great, superb, brilliant, fun, lovely, moving, clever
attribute.tense = past, present, future
attribute.tense.past = was, seemed, felt, looked
attribute.tense.present = is, seems, feels, looks
attribute.tense.future = will-be, will-seem, will-feel, will-look
template = the $subject $tense $sentiment
template = the $subject $tense $sentiment .
template = $subject $tense $sentiment $connective $object
template = the $subject $tense $sentiment $connective $object
template = the $subject $tense $sentiment $connective the $object
template = the $subject $tense $sentiment $connective $object .
template = $connective $object the $subject $tense $sentiment
)";
  return SyntheticGrammarSpec::parse(kText);
}

GeneratedSentence sample_sentence(const SyntheticGrammarSpec& spec, util::Rng& rng,
                                  const std::map<std::string, int>& forced) {
  GeneratedSentence out;
  const auto& tpl = spec.templates[static_cast<std::size_t>(rng.below(spec.templates.size()))];
  for (const auto& item : tpl) {
    switch (item.kind) {
      case TemplateItem::Kind::kLiteral:
        out.words.push_back(item.text);
        out.slots.emplace_back();
        break;
      case TemplateItem::Kind::kRole: {
        const auto& words = *role_words(spec, item.text);
        out.words.push_back(words[static_cast<std::size_t>(rng.below(words.size()))]);
        out.slots.push_back(item.text);
        break;
      }
      case TemplateItem::Kind::kAttribute: {
        const auto& a = spec.attribute(item.text);
        int k;
        if (auto it = forced.find(a.name); it != forced.end()) {
          k = it->second;
          if (k < 0 || static_cast<std::size_t>(k) >= a.categories.size()) {
            throw std::out_of_range("forced category " + std::to_string(k) + " outside attribute " + a.name);
          }
        } else {
          k = static_cast<int>(rng.below(a.categories.size()));
        }
        const auto& words = a.words[static_cast<std::size_t>(k)];
        out.words.push_back(words[static_cast<std::size_t>(rng.below(words.size()))]);
        out.slots.push_back(a.name);
        out.labels[a.name] = k;
        break;
      }
    }
  }
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticGrammarSpec& spec, std::size_t n_unlabeled,
                                          std::size_t n_labeled_per_attribute, std::uint64_t seed) {
  spec.validate();
  SyntheticCorpus corpus;
  auto unlabeled_rng = util::Rng::derive(seed, "corpus.unlabeled");
  for (std::size_t i = 0; i < n_unlabeled; ++i) {
    corpus.unlabeled.push_back(join(sample_sentence(spec, unlabeled_rng).words, " "));
  }
  for (const auto& a : spec.attributes) {
    auto rng = util::Rng::derive(seed, "corpus.labeled." + a.name);
    const std::size_t K = a.categories.size();
    std::vector<int> cats(n_labeled_per_attribute);
    for (std::size_t i = 0; i < cats.size(); ++i) cats[i] = static_cast<int>(i % K);
    rng.shuffle(cats);
    auto& set = corpus.labeled[a.name];
    for (int k : cats) {
      auto s = sample_sentence(spec, rng, {{a.name, k}});
      set.push_back({a.categories[static_cast<std::size_t>(k)], join(s.words, " ")});
    }
    auto& words = corpus.word_labeled[a.name];
    for (std::size_t k = 0; k < K; ++k) {
      for (const auto& w : a.words[k]) words.push_back({a.categories[k], w});
    }
  }
  return corpus;
}

std::optional<int> oracle_classify(std::span<const std::string> words, std::string_view attribute,
                                   const SyntheticGrammarSpec& spec) {
  const auto& a = spec.attribute(attribute);
  std::optional<int> found;
  for (const auto& w : words) {
    for (std::size_t k = 0; k < a.words.size(); ++k) {
      if (std::find(a.words[k].begin(), a.words[k].end(), w) == a.words[k].end()) continue;
      if (found && *found != static_cast<int>(k)) return std::nullopt;
      found = static_cast<int>(k);
    }
  }
  return found;
}

std::map<std::string, std::string> content_slots(std::span<const std::string> words,
                                                 const SyntheticGrammarSpec& spec) {
  std::map<std::string, std::string> out;
  for (const auto& w : words) {
    for (const auto& [role, set] : spec.roles) {
      if (out.count(role)) continue;
      if (std::find(set.begin(), set.end(), w) != set.end()) out[role] = w;
    }
  }
  return out;
}

}  // namespace ctg::text
