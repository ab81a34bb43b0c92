#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lut/corpus.hpp"
#include "lut/metrics.hpp"
#include "lut/model.hpp"
#include "lut/vocab.hpp"

namespace lut {

struct Hypothesis {
  std::vector<int> tokens;  // after <sos>; ends with <eos> when finished
  double log_prob = 0.0;
  bool finished = false;
};

struct BeamOptions {
  std::size_t beam = 8;
  // 0 means the model's max_st_len.
  std::size_t max_len = 0;
  // Finished hypotheses are ranked by log_prob / length^penalty; 0 ranks by
  // log_prob alone.
  double length_penalty = 0.6;
  // Stop a hypothesis when it emits <eos>. Off, every hypothesis runs to
  // max_len.
  bool stop_at_eos = true;
  // Never propose <pad> or <sos>.
  bool exclude_specials = true;
};

// Iterated argmax from <sos> until <eos> or max_len (0 = model maximum);
// ties go to the lowest id. Returns the tokens without the trailing <eos>.
std::vector<int> greedy_translate(const LutModel& model, const Tensor& x, std::size_t max_len = 0);
std::vector<int> greedy_from(const LutModel& model, const Tensor& h_se, std::size_t max_len = 0);

// Beam search; candidates are ranked by (log-prob desc, parent rank, token
// id), which makes the search deterministic.
Hypothesis beam_search(const LutModel& model, const Tensor& x, const BeamOptions& options = {});
Hypothesis beam_search_from(const LutModel& model, const Tensor& h_se,
                            const BeamOptions& options = {});

// Ranking score of a hypothesis under `length_penalty`.
double hypothesis_score(const Hypothesis& h, double length_penalty);

// Sum of decoder log-probs of `tokens` (after <sos>) given h_se.
double sequence_log_prob(const LutModel& model, const Tensor& h_se, std::span<const int> tokens);

// Drops a trailing <eos>.
std::vector<int> strip_eos(std::vector<int> tokens);

// Teacher-forced argmax accuracy over every y <eos> position.
double token_accuracy(const LutModel& model, std::span<const Utterance> utts);

// Corpus WER of the CTC greedy transcription against z.
double ctc_greedy_wer(const LutModel& model, std::span<const Utterance> utts);

struct EvalOptions {
  // 0 selects greedy decoding.
  std::size_t beam = 8;
  double length_penalty = 0.6;
  std::size_t max_len = 0;
  BleuOptions bleu;
};

struct UtteranceScore {
  std::string utt_id;
  std::vector<std::string> hypothesis;     // translation
  std::vector<std::string> reference;      // y
  std::vector<std::string> transcription;  // CTC greedy
  std::vector<std::string> transcript_ref; // z
  double wer = 0.0;
  double sentence_bleu = 0.0;
};

struct EvalReport {
  double bleu = 0.0;
  double wer = 0.0;
  double token_accuracy = 0.0;
  std::vector<UtteranceScore> utterances;
  // Absent when either per-utterance series is constant.
  std::optional<double> pearson;
};

// Translates every triple, transcribes it with the CTC head and scores both.
EvalReport evaluate(const LutModel& model, std::span<const Utterance> utts, const Vocab& source,
                    const Vocab& target, const EvalOptions& options = {});

}  // namespace lut
