#include "lut/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lut/ctc.hpp"
#include "lut/error.hpp"

namespace lut {

namespace {

std::size_t resolve_max_len(const LutModel& model, std::size_t max_len) {
  const std::size_t cap = model.config().max_st_len;
  return max_len == 0 ? cap : std::min(max_len, cap);
}

bool proposable(int id, bool exclude_specials) {
  return !exclude_specials || (id != kTargetPad && id != kTargetSos);
}

// Last-row log-probs for the prefix <sos> tokens.
std::vector<double> next_log_probs(const LutModel& model, const Tensor& h_se,
                                   const std::vector<int>& tokens) {
  const std::vector<int> prefix = decoder_input(tokens);
  const Tensor lp = model.decode_forward(prefix, h_se);
  const std::size_t V = lp.cols(), last = lp.rows() - 1;
  return {lp.data().begin() + static_cast<std::ptrdiff_t>(last * V),
          lp.data().begin() + static_cast<std::ptrdiff_t>((last + 1) * V)};
}

std::vector<std::string> words(const Vocab& v, std::span<const int> ids) { return v.decode(ids); }

}  // namespace

std::vector<int> greedy_from(const LutModel& model, const Tensor& h_se, std::size_t max_len) {
  NoGradScope no_grad;
  const std::size_t limit = resolve_max_len(model, max_len);
  std::vector<int> out;
  while (out.size() < limit) {
    const auto lp = next_log_probs(model, h_se, out);
    int best = -1;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (!proposable(static_cast<int>(v), true)) continue;
      if (best < 0 || lp[v] > lp[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
    }
    if (best == kTargetEos) break;
    out.push_back(best);
  }
  return out;
}

std::vector<int> greedy_translate(const LutModel& model, const Tensor& x, std::size_t max_len) {
  NoGradScope no_grad;
  return greedy_from(model, model.encode(x).h_se, max_len);
}

double hypothesis_score(const Hypothesis& h, double length_penalty) {
  if (length_penalty == 0.0 || h.tokens.empty()) return h.log_prob;
  return h.log_prob / std::pow(static_cast<double>(h.tokens.size()), length_penalty);
}

Hypothesis beam_search_from(const LutModel& model, const Tensor& h_se,
                            const BeamOptions& options) {
  if (options.beam == 0) throw UsageError("beam size must be >= 1");
  NoGradScope no_grad;
  const std::size_t limit = resolve_max_len(model, options.max_len);
  std::vector<Hypothesis> alive{Hypothesis{}}, finished;

  struct Candidate {
    double log_prob;
    std::size_t parent;
    int token;
  };
  for (std::size_t step = 0; step < limit && !alive.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t p = 0; p < alive.size(); ++p) {
      const auto lp = next_log_probs(model, h_se, alive[p].tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (!proposable(static_cast<int>(v), options.exclude_specials)) continue;
        cands.push_back({alive[p].log_prob + lp[v], p, static_cast<int>(v)});
      }
    }
    const std::size_t keep = std::min(options.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis h = alive[cands[i].parent];
      h.tokens.push_back(cands[i].token);
      h.log_prob = cands[i].log_prob;
      if (options.stop_at_eos && cands[i].token == kTargetEos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  // Hypotheses cut off at max_len compete with the finished ones.
  std::vector<Hypothesis>& pool = finished;
  pool.insert(pool.end(), alive.begin(), alive.end());
  const Hypothesis* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& h : pool) {
    const double s = hypothesis_score(h, options.length_penalty);
    if (best == nullptr || s > best_score) {
      best = &h;
      best_score = s;
    }
  }
  return best == nullptr ? Hypothesis{} : *best;
}

Hypothesis beam_search(const LutModel& model, const Tensor& x, const BeamOptions& options) {
  NoGradScope no_grad;
  return beam_search_from(model, model.encode(x).h_se, options);
}

double sequence_log_prob(const LutModel& model, const Tensor& h_se, std::span<const int> tokens) {
  if (tokens.empty()) return 0.0;
  NoGradScope no_grad;
  // Feed <sos> plus all but the last token; row i scores tokens[i].
  std::vector<int> prefix = decoder_input(tokens.first(tokens.size() - 1));
  const Tensor lp = model.decode_forward(prefix, h_se);
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    total += lp.at(i, static_cast<std::size_t>(tokens[i]));
  }
  return total;
}

std::vector<int> strip_eos(std::vector<int> tokens) {
  if (!tokens.empty() && tokens.back() == kTargetEos) tokens.pop_back();
  return tokens;
}

double token_accuracy(const LutModel& model, std::span<const Utterance> utts) {
  NoGradScope no_grad;
  std::size_t correct = 0, total = 0;
  for (const auto& u : utts) {
    if (!u.y) continue;
    const Tensor h_se = model.encode(u.features).h_se;
    const Tensor lp = model.decode_forward(decoder_input(*u.y), h_se);
    const std::vector<int> target = decoder_target(*u.y);
    for (std::size_t i = 0; i < target.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t v = 1; v < lp.cols(); ++v) {
        if (lp.at(i, v) > lp.at(i, best)) best = v;
      }
      correct += static_cast<int>(best) == target[i];
      ++total;
    }
  }
  if (total == 0) throw EmptyInputError("token accuracy over no translated utterances");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double ctc_greedy_wer(const LutModel& model, std::span<const Utterance> utts) {
  NoGradScope no_grad;
  std::size_t edits = 0, words = 0;
  for (const auto& u : utts) {
    const auto hyp = ctc::greedy_decode(model.acoustic_encode(u.features).second, kBlank);
    edits += edit_distance<int>(u.z, hyp);
    words += u.z.size();
  }
  if (words == 0) throw EmptyInputError("WER over empty transcriptions");
  return static_cast<double>(edits) / static_cast<double>(words);
}

EvalReport evaluate(const LutModel& model, std::span<const Utterance> utts, const Vocab& source,
                    const Vocab& target, const EvalOptions& options) {
  NoGradScope no_grad;
  EvalReport report;
  std::vector<std::vector<std::string>> refs, hyps, trans_refs, trans_hyps;
  std::vector<double> wers, bleus;
  BleuOptions tok = options.bleu;
  for (const auto& u : utts) {
    if (!u.y) continue;
    const EncoderOutputs enc = model.encode(u.features);
    std::vector<int> out;
    if (options.beam == 0) {
      out = greedy_from(model, enc.h_se, options.max_len);
    } else {
      BeamOptions b;
      b.beam = options.beam;
      b.length_penalty = options.length_penalty;
      b.max_len = options.max_len;
      out = strip_eos(beam_search_from(model, enc.h_se, b).tokens);
    }
    UtteranceScore s;
    s.utt_id = u.id;
    // Re-tokenize the word strings so case folding and character mode apply.
    auto retok = [&](const std::vector<std::string>& ws) {
      std::string joined;
      for (const auto& w : ws) joined += (joined.empty() ? "" : " ") + w;
      return bleu_tokens(joined, tok);
    };
    s.hypothesis = retok(words(target, out));
    s.reference = retok(words(target, *u.y));
    s.transcription = words(source, ctc::greedy_decode(enc.ctc_log_probs, kBlank));
    s.transcript_ref = words(source, u.z);
    s.wer = wer(std::span<const std::string>(s.transcript_ref),
                std::span<const std::string>(s.transcription));
    s.sentence_bleu = sentence_bleu(s.reference, s.hypothesis, tok.max_n);
    refs.push_back(s.reference);
    hyps.push_back(s.hypothesis);
    trans_refs.push_back(s.transcript_ref);
    trans_hyps.push_back(s.transcription);
    wers.push_back(s.wer);
    bleus.push_back(s.sentence_bleu);
    report.utterances.push_back(std::move(s));
  }
  if (report.utterances.empty()) throw EmptyInputError("evaluation set has no triples");
  report.bleu = bleu(refs, hyps, tok.max_n);
  report.wer = corpus_wer(trans_refs, trans_hyps);
  report.token_accuracy = token_accuracy(model, utts);
  try {
    report.pearson = pearson(wers, bleus);
  } catch (const UndefinedCorrelationError&) {
    report.pearson.reset();
  }
  return report;
}

}  // namespace lut
