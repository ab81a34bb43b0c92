#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lut/config.hpp"
#include "lut/corpus.hpp"
#include "lut/decode.hpp"
#include "lut/model.hpp"
#include "lut/probe.hpp"
#include "lut/teacher.hpp"
#include "lut/training.hpp"
#include "lut/vocab.hpp"

namespace lut::app {

// Vocabularies plus the manifests named by a config.
struct Dataset {
  Vocab source;
  Vocab target;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> asr;
};

Dataset load_dataset(const RunConfig& config);

// ModelConfig of `config` with the data-dependent sizes filled in.
ModelConfig model_config(const RunConfig& config, const Dataset& data);

// Trained teacher from `teacher_checkpoint`, a table teacher, or a teacher
// trained on the train transcriptions, in that order of preference.
TeacherModel obtain_teacher(const RunConfig& config, const Dataset& data,
                            TeacherReport* report = nullptr);

// Loads a model checkpoint and checks it against the config hash.
LutModel load_model(const RunConfig& config, const Dataset& data,
                    const std::filesystem::path& checkpoint, bool with_branches = false);

struct TrainOutcome {
  TrainResult result;
  double dev_token_accuracy = 0.0;
  double dev_wer = 0.0;
};

// Trains a fresh model; writes train_log.jsonl, model.ckpt and
// train_report.json to `out` when it is non-empty.
TrainOutcome train_model(const RunConfig& config, const Dataset& data, const TeacherModel& teacher,
                         LutModel& model, const std::filesystem::path& out = {});

// Each command writes its artifacts under `out`, prints a summary to `log`
// and returns the process exit status.
int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
int cmd_train_teacher(const RunConfig& config, const std::filesystem::path& out,
                      std::ostream& log);
int cmd_train(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
// Empty `manifest` selects the dev manifest.
int cmd_decode(const RunConfig& config, const std::filesystem::path& checkpoint,
               const std::filesystem::path& manifest, const std::filesystem::path& out,
               std::ostream& log);
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& manifest, const std::filesystem::path& out,
                 std::ostream& log);
// Empty `manifest` selects train + dev.
int cmd_probe(const RunConfig& config, const std::filesystem::path& checkpoint, ProbeTask task,
              const std::filesystem::path& manifest, const std::filesystem::path& out,
              std::ostream& log);

enum class SweepAxis { kLayers, kLossWeights };
SweepAxis parse_sweep_axis(const std::string& s);  // "layers" | "loss-weights"

struct SweepRow {
  std::string label;
  std::size_t n_ae = 0;
  std::size_t n_se = 0;
  LossWeights weights;
};

std::vector<SweepRow> sweep_rows(SweepAxis axis, const RunConfig& config);

struct SweepResult {
  SweepRow row;
  double dev_token_accuracy = 0.0;
  double bleu = 0.0;
  double wer = 0.0;
};

std::vector<SweepResult> run_sweep(const RunConfig& config, SweepAxis axis,
                                   const std::filesystem::path& out, std::ostream& log);
int cmd_sweep(const RunConfig& config, SweepAxis axis, const std::filesystem::path& out,
              std::ostream& log);

// Attention matrices of one utterance (encoders plus teacher-forced decoder on
// the greedy translation); empty `manifest` searches dev, then train.
Checkpoint export_attention(const RunConfig& config, const std::filesystem::path& checkpoint,
                            const std::string& utt_id, const std::filesystem::path& manifest);
int cmd_export_attention(const RunConfig& config, const std::filesystem::path& checkpoint,
                         const std::string& utt_id, const std::filesystem::path& manifest,
                         const std::filesystem::path& out, std::ostream& log);

}  // namespace lut::app
