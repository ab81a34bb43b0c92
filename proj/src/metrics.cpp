#include "lut/metrics.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "lut/error.hpp"

namespace lut {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

// Clipped matches and hypothesis n-gram total for order n.
std::pair<std::size_t, std::size_t> match_counts(std::span<const std::string> ref,
                                                 std::span<const std::string> hyp,
                                                 std::size_t n) {
  const auto r = count_ngrams(ref, n);
  const auto h = count_ngrams(hyp, n);
  std::size_t matched = 0, total = 0;
  for (const auto& [gram, c] : h) {
    total += c;
    auto it = r.find(gram);
    if (it != r.end()) matched += std::min(c, it->second);
  }
  return {matched, total};
}

double brevity_penalty(double hyp_len, double ref_len) {
  if (hyp_len <= 0.0) return 0.0;
  return hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
}

}  // namespace

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) throw EmptyInputError("WER against an empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double wer(std::span<const int> ref, std::span<const int> hyp) {
  if (ref.empty()) throw EmptyInputError("WER against an empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double corpus_wer(const std::vector<std::vector<std::string>>& refs,
                  const std::vector<std::vector<std::string>>& hyps) {
  if (refs.size() != hyps.size()) throw DimensionError("WER needs one hypothesis per reference");
  std::size_t edits = 0, words = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance<std::string>(refs[i], hyps[i]);
    words += refs[i].size();
  }
  if (words == 0) throw EmptyInputError("WER over empty references");
  return static_cast<double>(edits) / static_cast<double>(words);
}

std::vector<std::string> bleu_tokens(std::string_view sentence, const BleuOptions& options) {
  std::string s(sentence);
  if (options.lowercase) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::vector<std::string> out;
  if (!options.character_level) {
    std::istringstream is(s);
    for (std::string w; is >> w;) out.push_back(w);
    return out;
  }
  for (std::size_t i = 0; i < s.size();) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xe ? 3 : 4;
    len = std::min(len, s.size() - i);
    if (!(len == 1 && std::isspace(lead))) out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

double bleu(const std::vector<std::vector<std::string>>& refs,
            const std::vector<std::vector<std::string>>& hyps, int max_n) {
  if (refs.empty()) throw EmptyInputError("BLEU over an empty corpus");
  if (refs.size() != hyps.size()) throw DimensionError("BLEU needs one hypothesis per reference");
  if (max_n < 1) throw UsageError("BLEU max_n must be >= 1");
  std::vector<std::size_t> matched(static_cast<std::size_t>(max_n)),
      total(static_cast<std::size_t>(max_n));
  double hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < refs.size(); ++s) {
    hyp_len += static_cast<double>(hyps[s].size());
    ref_len += static_cast<double>(refs[s].size());
    for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
      auto [m, t] = match_counts(refs[s], hyps[s], n);
      matched[n - 1] += m;
      total[n - 1] += t;
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < matched.size(); ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  return 100.0 * brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / max_n);
}

double bleu(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
            const BleuOptions& options) {
  std::vector<std::vector<std::string>> r, h;
  for (const auto& s : refs) r.push_back(bleu_tokens(s, options));
  for (const auto& s : hyps) h.push_back(bleu_tokens(s, options));
  return bleu(r, h, options.max_n);
}

double sentence_bleu(std::span<const std::string> ref, std::span<const std::string> hyp,
                     int max_n) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
    auto [m, t] = match_counts(ref, hyp, n);
    double p;
    if (n == 1) {
      if (m == 0) return 0.0;
      p = static_cast<double>(m) / static_cast<double>(t);
    } else {
      p = (static_cast<double>(m) + 1.0) / (static_cast<double>(t) + 1.0);
    }
    log_sum += std::log(p);
  }
  return 100.0 * brevity_penalty(static_cast<double>(hyp.size()),
                                 static_cast<double>(ref.size())) *
         std::exp(log_sum / max_n);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw UndefinedCorrelationError("pearson: sizes differ");
  if (xs.size() < 2) throw UndefinedCorrelationError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("pearson of a constant sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace lut
