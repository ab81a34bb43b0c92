#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lut {

// Levenshtein distance with unit substitution/insertion/deletion costs.
template <class T>
std::size_t edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

// edit_distance / |ref|. Throws EmptyInputError for an empty reference.
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);
double wer(std::span<const int> ref, std::span<const int> hyp);

// Total edits over total reference length.
double corpus_wer(const std::vector<std::vector<std::string>>& refs,
                  const std::vector<std::vector<std::string>>& hyps);

struct BleuOptions {
  int max_n = 4;
  bool lowercase = true;
  // Split into characters (UTF-8 code points, whitespace dropped) instead of
  // whitespace-separated words.
  bool character_level = false;
};

std::vector<std::string> bleu_tokens(std::string_view sentence, const BleuOptions& options);

// Corpus BLEU in [0, 100] with clipped n-gram precisions and a brevity
// penalty against the single reference, following multi-bleu: any zero
// precision gives 0. Inputs are already-tokenized sentences.
double bleu(const std::vector<std::vector<std::string>>& refs,
            const std::vector<std::vector<std::string>>& hyps, int max_n = 4);
// Same over raw strings, tokenized by `options`.
double bleu(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
            const BleuOptions& options);

// Per-sentence BLEU with add-one smoothing of the n >= 2 precisions.
double sentence_bleu(std::span<const std::string> ref, std::span<const std::string> hyp,
                     int max_n = 4);

// Sample Pearson correlation. Throws UndefinedCorrelationError when n < 2,
// the sizes differ, or either sequence is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace lut
