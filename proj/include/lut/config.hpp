#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lut/corpus.hpp"
#include "lut/model.hpp"
#include "lut/optim.hpp"
#include "lut/teacher.hpp"
#include "lut/training.hpp"

namespace lut {

enum class TrainMode { kBase, kExpanded };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);  // "base" | "expanded"

// Merged view of every tunable. Text form is flat `key = value` lines with
// `#` comments; the documented keys are listed by RunConfig::keys().
struct RunConfig {
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kBase;

  CorpusSpec data;
  double dev_fraction = 0.1;
  std::size_t asr_utterances = 0;

  ModelConfig model;
  TrainPlan plan;
  Schedule schedule = Schedule::desk();
  TeacherConfig teacher;
  TeacherMode teacher_mode = TeacherMode::kTrained;

  std::size_t beam = 8;
  double length_penalty = 0.6;

  // Data locations; relative paths resolve against `data_dir`.
  std::filesystem::path data_dir;
  std::filesystem::path train_manifest = "train.jsonl";
  std::filesystem::path dev_manifest = "dev.jsonl";
  std::filesystem::path asr_manifest;
  std::filesystem::path source_vocab = "source.vocab";
  std::filesystem::path target_vocab = "target.vocab";
  std::filesystem::path teacher_checkpoint;

  // Parses text; unknown keys and malformed values raise ConfigError.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  // Sets one key (same syntax as a config line).
  void set(const std::string& key, const std::string& value);
  // Copies the root seed into every component seed.
  void apply_seed(std::uint64_t root);
  // Applies LUT_SEED when present in the environment.
  void apply_env();

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Checks component invariants and that every referenced file exists.
  // `need_data` selects whether manifests/vocabularies must be present.
  void validate(bool need_data) const;

  // Canonical text of all keys, readable by parse().
  std::string to_text() const;
  static std::vector<std::string> keys();
};

}  // namespace lut
