#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lut/tensor.hpp"
#include "lut/vocab.hpp"

namespace lut {

enum class UtteranceKind { kTriple, kAsrPair };

// One training example. Features are [T_x x F]; z holds source ids (never
// blank/pad/sos/eos); y holds target word ids without <sos>/<eos> and is
// absent for ASR pairs.
struct Utterance {
  std::string id;
  Tensor features;
  std::vector<int> z;
  std::optional<std::vector<int>> y;
  int speaker_id = 0;
  int intent_id = 0;

  UtteranceKind kind() const { return y ? UtteranceKind::kTriple : UtteranceKind::kAsrPair; }
  std::size_t frames() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
};

enum class TranslationRule { kCopyMap, kReverseMap };

// How source sentences are drawn.
//   kUniform: i.i.d. words with no word repeated back-to-back.
//   kChain: a random first word, then a fixed successor permutation, so every
//           word is determined by its left neighbour.
//   kTopic: a topic is drawn first; each word then comes from that
//           topic's word group (index % intents) with probability
//           topic_strength and uniformly otherwise, never repeating the
//           previous word.
// The intent label is always the first word's group.
enum class SourceGrammar { kUniform, kChain, kTopic };

struct CorpusSpec {
  std::size_t source_words = 12;
  std::size_t target_words = 12;
  std::size_t utterances = 2000;
  std::size_t min_length = 2;
  std::size_t max_length = 6;
  std::size_t frames_per_token = 3;
  double noise = 0.1;
  std::size_t feature_dim = 8;
  std::size_t speakers = 4;
  std::size_t intents = 4;
  // Stddev of the per-speaker constant offset added to every frame.
  double speaker_scale = 0.5;
  TranslationRule rule = TranslationRule::kReverseMap;
  SourceGrammar grammar = SourceGrammar::kTopic;
  double topic_strength = 0.6;
  // Render 3 * frames_per_token raw frames per token and run featurize()
  // (stack 5 right, downsample 3, per-utterance normalization). Output width
  // becomes 6 * feature_dim.
  bool raw_frame_rate = false;
  std::uint64_t seed = 1;
};

// Everything shared by all samples of one synthetic language: vocabularies,
// per-word prototype frames, speaker offsets and the translation word map.
struct SyntheticLanguage {
  CorpusSpec spec;
  Vocab source;
  Vocab target;
  Tensor prototypes;       // [source_words x feature_dim]
  Tensor speaker_offsets;  // [speakers x feature_dim]
  std::vector<int> target_of_source;  // source word index -> target word index
  std::vector<int> successor;         // chain grammar successor, word index

  std::size_t model_feature_dim() const;
  // y for a transcription under the configured rule.
  std::vector<int> translate(const std::vector<int>& z) const;
  int intent_of(const std::vector<int>& z) const;
};

SyntheticLanguage make_language(const CorpusSpec& spec);

// Draws utterances from `language`; pure function of the arguments.
std::vector<Utterance> sample_utterances(const SyntheticLanguage& language, std::size_t count,
                                         UtteranceKind kind, std::uint64_t seed,
                                         const std::string& id_prefix);

struct Corpus {
  SyntheticLanguage language;
  std::vector<Utterance> utterances;
};

// make_language(spec) plus spec.utterances triples.
Corpus generate_corpus(const CorpusSpec& spec);

std::string to_string(TranslationRule rule);
std::string to_string(SourceGrammar grammar);
TranslationRule parse_translation_rule(const std::string& s);
SourceGrammar parse_source_grammar(const std::string& s);

}  // namespace lut
