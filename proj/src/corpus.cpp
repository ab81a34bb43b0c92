#include "lut/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "lut/error.hpp"
#include "lut/features.hpp"

namespace lut {

namespace {

std::vector<std::string> word_list(const char* prefix, std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back(prefix + std::to_string(i));
  return words;
}

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = stddev * dist(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

void validate(const CorpusSpec& s) {
  if (s.source_words < 1 || s.target_words < 1 || s.speakers < 1 || s.intents < 1 ||
      s.feature_dim < 1 || s.frames_per_token < 1 || s.min_length < 1) {
    throw ConfigError("corpus sizes must all be >= 1");
  }
  if (s.max_length < s.min_length) throw ConfigError("corpus max_length < min_length");
  if (s.noise < 0.0 || s.speaker_scale < 0.0) throw ConfigError("noise scales must be >= 0");
  if (s.topic_strength < 0.0 || s.topic_strength > 1.0) {
    throw ConfigError("topic_strength must lie in [0, 1]");
  }
  if (s.grammar == SourceGrammar::kTopic && s.source_words < 2 * s.intents) {
    throw ConfigError("topic grammar needs at least two words per intent");
  }
}

}  // namespace

std::size_t SyntheticLanguage::model_feature_dim() const {
  return spec.raw_frame_rate ? 6 * spec.feature_dim : spec.feature_dim;
}

std::vector<int> SyntheticLanguage::translate(const std::vector<int>& z) const {
  const auto src_words = source.word_ids();
  const auto tgt_words = target.word_ids();
  std::vector<int> y;
  y.reserve(z.size());
  for (int id : z) {
    auto it = std::find(src_words.begin(), src_words.end(), id);
    if (it == src_words.end()) {
      y.push_back(target.unk());
      continue;
    }
    const auto w = static_cast<std::size_t>(it - src_words.begin());
    y.push_back(tgt_words[static_cast<std::size_t>(target_of_source[w])]);
  }
  if (spec.rule == TranslationRule::kReverseMap) std::reverse(y.begin(), y.end());
  return y;
}

int SyntheticLanguage::intent_of(const std::vector<int>& z) const {
  if (z.empty()) return 0;
  const int first_word = source.word_ids().front();
  return (z.front() - first_word) % static_cast<int>(spec.intents);
}

SyntheticLanguage make_language(const CorpusSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  SyntheticLanguage lang{spec,
                         Vocab::source(word_list("s", spec.source_words)),
                         Vocab::target(word_list("t", spec.target_words)),
                         {},
                         {},
                         {},
                         {}};
  lang.prototypes = gaussian(spec.source_words, spec.feature_dim, 1.0, rng);
  lang.speaker_offsets = gaussian(spec.speakers, spec.feature_dim, spec.speaker_scale, rng);

  std::vector<int> perm(spec.target_words);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  lang.target_of_source.resize(spec.source_words);
  for (std::size_t i = 0; i < spec.source_words; ++i) {
    lang.target_of_source[i] = perm[i % spec.target_words];
  }

  std::vector<int> order(spec.source_words);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  lang.successor.resize(spec.source_words);
  for (std::size_t i = 0; i < order.size(); ++i) {
    lang.successor[static_cast<std::size_t>(order[i])] = order[(i + 1) % order.size()];
  }
  return lang;
}

std::vector<Utterance> sample_utterances(const SyntheticLanguage& lang, std::size_t count,
                                         UtteranceKind kind, std::uint64_t seed,
                                         const std::string& id_prefix) {
  const CorpusSpec& spec = lang.spec;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length_dist(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> word_dist(0, spec.source_words - 1);
  std::uniform_int_distribution<int> speaker_dist(0, static_cast<int>(spec.speakers) - 1);
  std::uniform_int_distribution<int> topic_dist(0, static_cast<int>(spec.intents) - 1);
  std::bernoulli_distribution on_topic(spec.topic_strength);
  const std::size_t group_size = spec.source_words / spec.intents;
  const auto src_words = lang.source.word_ids();
  const std::size_t F0 = spec.feature_dim;
  const std::size_t frames_per_token =
      spec.raw_frame_rate ? 3 * spec.frames_per_token : spec.frames_per_token;

  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t length = length_dist(rng);
    const int topic = spec.grammar == SourceGrammar::kTopic ? topic_dist(rng) : 0;
    std::vector<std::size_t> words;
    words.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      if (spec.grammar == SourceGrammar::kTopic) {
        // Group members are topic, topic + intents, ...; redraw on a repeat.
        std::uniform_int_distribution<std::size_t> member(0, group_size - 1);
        std::size_t w;
        do {
          w = on_topic(rng) ? static_cast<std::size_t>(topic) + member(rng) * spec.intents
                            : word_dist(rng);
        } while (!words.empty() && w == words.back());
        words.push_back(w);
      } else if (i == 0) {
        words.push_back(word_dist(rng));
      } else if (spec.grammar == SourceGrammar::kChain) {
        words.push_back(static_cast<std::size_t>(lang.successor[words.back()]));
      } else if (spec.source_words == 1) {
        words.push_back(0);
      } else {
        // Uniform over the words other than the previous one.
        std::uniform_int_distribution<std::size_t> other(0, spec.source_words - 2);
        std::size_t w = other(rng);
        if (w >= words.back()) ++w;
        words.push_back(w);
      }
    }
    Utterance u;
    char id[32];
    std::snprintf(id, sizeof(id), "%06zu", n);
    u.id = id_prefix + id;
    u.speaker_id = speaker_dist(rng);
    for (std::size_t w : words) u.z.push_back(src_words[w]);
    u.intent_id = lang.intent_of(u.z);

    std::vector<double> frames(length * frames_per_token * F0);
    std::size_t pos = 0;
    for (std::size_t w : words) {
      for (std::size_t k = 0; k < frames_per_token; ++k) {
        for (std::size_t j = 0; j < F0; ++j) {
          double v = lang.prototypes.at(w, j) +
                     lang.speaker_offsets.at(static_cast<std::size_t>(u.speaker_id), j);
          if (spec.noise > 0.0) v += spec.noise * noise(rng);
          frames[pos++] = v;
        }
      }
    }
    Tensor raw = Tensor::matrix(length * frames_per_token, F0, std::move(frames));
    u.features = spec.raw_frame_rate ? featurize(raw) : raw;
    if (kind == UtteranceKind::kTriple) u.y = lang.translate(u.z);
    out.push_back(std::move(u));
  }
  return out;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  Corpus c{make_language(spec), {}};
  c.utterances = sample_utterances(c.language, spec.utterances, UtteranceKind::kTriple,
                                   spec.seed ^ 0x9e3779b97f4a7c15ull, "utt");
  return c;
}

std::string to_string(TranslationRule rule) {
  return rule == TranslationRule::kCopyMap ? "copy-map" : "reverse-map";
}

std::string to_string(SourceGrammar grammar) {
  switch (grammar) {
    case SourceGrammar::kChain:
      return "chain";
    case SourceGrammar::kTopic:
      return "topic";
    default:
      return "uniform";
  }
}

TranslationRule parse_translation_rule(const std::string& s) {
  if (s == "copy-map") return TranslationRule::kCopyMap;
  if (s == "reverse-map") return TranslationRule::kReverseMap;
  throw ConfigError("translation rule must be copy-map or reverse-map, got '" + s + "'");
}

SourceGrammar parse_source_grammar(const std::string& s) {
  if (s == "uniform") return SourceGrammar::kUniform;
  if (s == "chain") return SourceGrammar::kChain;
  if (s == "topic") return SourceGrammar::kTopic;
  throw ConfigError("source grammar must be uniform, chain or topic, got '" + s + "'");
}

}  // namespace lut
