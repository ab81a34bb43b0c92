#include "lut/app.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "lut/checkpoint.hpp"
#include "lut/error.hpp"
#include "lut/manifest.hpp"
#include "lut/metrics.hpp"

namespace lut::app {

namespace {

using nlohmann::json;

constexpr std::uint64_t kAsrSeedSalt = 0x9e3779b97f4a7c15ULL;

void ensure_dir(const std::filesystem::path& out) {
  if (out.empty()) throw UsageError("an output directory is required (--out)");
  std::filesystem::create_directories(out);
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

// Sidecar recording the command, root seed and merged configuration.
void write_run_record(const std::filesystem::path& out, const std::string& command,
                      const RunConfig& config) {
  json j;
  j["command"] = command;
  j["seed"] = config.seed;
  j["config"] = config.to_text();
  write_json(out / "run.json", j);
  std::ofstream os(out / "config.txt");
  os << config.to_text();
}

json to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<Utterance> triples_of(std::vector<Utterance> utts) {
  std::erase_if(utts, [](const Utterance& u) { return !u.y; });
  return utts;
}

std::vector<Utterance> select_manifest(const Dataset& data,
                                       const std::filesystem::path& manifest) {
  if (manifest.empty()) return data.dev;
  return read_manifest(manifest, data.source, data.target);
}

}  // namespace

Dataset load_dataset(const RunConfig& config) {
  config.validate(true);
  Vocab source = Vocab::load(config.resolve(config.source_vocab));
  Vocab target = Vocab::load(config.resolve(config.target_vocab));
  Dataset d{source, target, {}, {}, {}};
  d.train = read_manifest(config.resolve(config.train_manifest), source, target);
  d.dev = read_manifest(config.resolve(config.dev_manifest), source, target);
  if (config.mode == TrainMode::kExpanded) {
    d.asr = read_manifest(config.resolve(config.asr_manifest), source, target);
  }
  return d;
}

ModelConfig model_config(const RunConfig& config, const Dataset& data) {
  ModelConfig m = config.model;
  m.source_classes = data.source.ctc_classes();
  m.target_vocab = data.target.size();
  for (const auto* set : {&data.train, &data.dev, &data.asr}) {
    if (!set->empty()) {
      m.feature_dim = set->front().feature_dim();
      break;
    }
  }
  m.init_seed = config.model.init_seed;
  m.validate();
  return m;
}

TeacherModel obtain_teacher(const RunConfig& config, const Dataset& data, TeacherReport* report) {
  if (!config.teacher_checkpoint.empty()) {
    TeacherModel t = TeacherModel::from_checkpoint(
        load_checkpoint(config.resolve(config.teacher_checkpoint)));
    if (t.d_model() != config.model.d_model) {
      throw ConfigError("teacher width " + std::to_string(t.d_model()) +
                        " differs from model.d_model " + std::to_string(config.model.d_model));
    }
    return t;
  }
  if (config.teacher_mode == TeacherMode::kTable) {
    return TeacherModel::table_mode(data.source, config.model.d_model, config.teacher.seed);
  }
  TeacherConfig tc = config.teacher;
  tc.d_model = config.model.d_model;
  std::vector<std::vector<int>> sentences;
  for (const auto& u : data.train) sentences.push_back(u.z);
  for (const auto& u : data.asr) sentences.push_back(u.z);
  return train_teacher(sentences, data.source, tc, report);
}

LutModel load_model(const RunConfig& config, const Dataset& data,
                    const std::filesystem::path& checkpoint, bool with_branches) {
  if (checkpoint.empty()) throw UsageError("a model checkpoint is required (--checkpoint)");
  LutModel model(model_config(config, data), with_branches);
  model.load(load_checkpoint(checkpoint));
  return model;
}

TrainOutcome train_model(const RunConfig& config, const Dataset& data, const TeacherModel& teacher,
                         LutModel& model, const std::filesystem::path& out) {
  if (config.mode == TrainMode::kExpanded && data.asr.empty()) {
    throw ConfigError("mode=expanded needs a non-empty ASR manifest");
  }
  std::ofstream log_file;
  TrainHooks hooks;
  if (!out.empty()) {
    ensure_dir(out);
    log_file.open(out / "train_log.jsonl");
    hooks.log_stream = &log_file;
  }
  TrainOutcome o;
  o.result = run_semi_supervised(config.plan, config.schedule, model, &teacher, data.train,
                                 data.asr, data.dev, hooks);
  const auto dev = triples_of(data.dev);
  if (!dev.empty()) {
    o.dev_token_accuracy = token_accuracy(model, dev);
    o.dev_wer = ctc_greedy_wer(model, dev);
  }
  if (!out.empty()) {
    std::map<std::string, std::string> meta{{"seed", std::to_string(config.seed)},
                                            {"mode", to_string(config.mode)},
                                            {"steps", std::to_string(o.result.steps)}};
    save_checkpoint(out / "model.ckpt", model.to_checkpoint(meta));
    json j;
    j["seed"] = config.seed;
    j["mode"] = to_string(config.mode);
    j["steps"] = o.result.steps;
    j["step1_updates"] = o.result.step1_updates;
    j["step2_updates"] = o.result.step2_updates;
    j["early_stopped"] = o.result.early_stopped;
    j["best_dev_loss"] = o.result.best_dev_loss;
    j["averaged"] = o.result.averaged;
    j["dev_token_accuracy"] = o.dev_token_accuracy;
    j["dev_ctc_wer"] = o.dev_wer;
    j["config_hash"] = hex64(model.config().hash());
    write_json(out / "train_report.json", j);
  }
  return o;
}

int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out, std::ostream& log) {
  config.validate(false);
  ensure_dir(out);
  const Corpus corpus = generate_corpus(config.data);
  const std::size_t n = corpus.utterances.size();
  const auto n_dev = static_cast<std::size_t>(config.dev_fraction * static_cast<double>(n));
  if (n_dev == 0 || n_dev >= n) throw ConfigError("dev split leaves an empty train or dev set");
  std::vector<Utterance> train(corpus.utterances.begin(), corpus.utterances.end() - n_dev);
  std::vector<Utterance> dev(corpus.utterances.end() - n_dev, corpus.utterances.end());
  const Vocab& src = corpus.language.source;
  const Vocab& tgt = corpus.language.target;
  src.save(out / "source.vocab");
  tgt.save(out / "target.vocab");
  write_manifest(out / "train.jsonl", train, src, tgt);
  write_manifest(out / "dev.jsonl", dev, src, tgt);
  RunConfig written = config;
  written.data_dir.clear();
  written.train_manifest = "train.jsonl";
  written.dev_manifest = "dev.jsonl";
  written.source_vocab = "source.vocab";
  written.target_vocab = "target.vocab";
  if (config.asr_utterances > 0) {
    const auto asr = sample_utterances(corpus.language, config.asr_utterances,
                                       UtteranceKind::kAsrPair, config.data.seed ^ kAsrSeedSalt,
                                       "asr");
    write_manifest(out / "asr.jsonl", asr, src, tgt);
    written.asr_manifest = "asr.jsonl";
  }
  write_run_record(out, "gen-data", written);
  log << "wrote " << train.size() << " train, " << dev.size() << " dev";
  if (config.asr_utterances > 0) log << ", " << config.asr_utterances << " asr";
  log << " utterances to " << out.string() << " (seed " << config.seed << ")\n";
  return 0;
}

int cmd_train_teacher(const RunConfig& config, const std::filesystem::path& out,
                      std::ostream& log) {
  RunConfig c = config;
  c.teacher_checkpoint.clear();
  const Dataset data = load_dataset(c);
  ensure_dir(out);
  TeacherReport report;
  TeacherModel teacher = obtain_teacher(c, data, &report);
  Checkpoint ckpt = teacher.to_checkpoint();
  ckpt.metadata["seed"] = std::to_string(c.seed);
  save_checkpoint(out / "teacher.ckpt", ckpt);
  json j;
  j["seed"] = c.seed;
  j["mode"] = teacher.mode() == TeacherMode::kTable ? "table" : "trained";
  j["steps"] = report.steps;
  j["final_loss"] = report.final_loss;
  j["heldout_accuracy"] = report.heldout_accuracy;
  j["heldout_sentences"] = report.heldout_sentences;
  write_json(out / "teacher_report.json", j);
  write_run_record(out, "train-teacher", c);
  log << "teacher (" << j["mode"].get<std::string>() << ") saved to "
      << (out / "teacher.ckpt").string() << ", held-out masked accuracy "
      << report.heldout_accuracy << '\n';
  return 0;
}

int cmd_train(const RunConfig& config, const std::filesystem::path& out, std::ostream& log) {
  const Dataset data = load_dataset(config);
  ensure_dir(out);
  const TeacherModel teacher = obtain_teacher(config, data);
  LutModel model(model_config(config, data));
  const TrainOutcome o = train_model(config, data, teacher, model, out);
  write_run_record(out, "train", config);
  log << "trained " << o.result.steps << " steps (" << o.result.step1_updates << " step-1, "
      << o.result.step2_updates << " step-2" << (o.result.early_stopped ? ", early stop" : "")
      << "); dev token accuracy " << o.dev_token_accuracy << ", dev CTC WER " << o.dev_wer
      << '\n';
  return 0;
}

int cmd_decode(const RunConfig& config, const std::filesystem::path& checkpoint,
               const std::filesystem::path& manifest, const std::filesystem::path& out,
               std::ostream& log) {
  const Dataset data = load_dataset(config);
  const LutModel model = load_model(config, data, checkpoint);
  const auto utts = triples_of(select_manifest(data, manifest));
  ensure_dir(out);
  std::ofstream os(out / "decode.jsonl");
  write_run_record(out, "decode", config);
  if (utts.empty()) {
    log << "warning: manifest has no utterances to decode; wrote empty output\n";
    return 0;
  }
  EvalOptions eo;
  eo.beam = config.beam;
  eo.length_penalty = config.length_penalty;
  const EvalReport report = evaluate(model, utts, data.source, data.target, eo);
  for (const auto& s : report.utterances) {
    json j;
    j["utt_id"] = s.utt_id;
    j["hypothesis"] = s.transcription;
    j["reference"] = s.transcript_ref;
    j["wer"] = s.wer;
    j["translation"] = s.hypothesis;
    j["translation_reference"] = s.reference;
    os << j.dump() << '\n';
  }
  log << "decoded " << utts.size() << " utterances to " << (out / "decode.jsonl").string()
      << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& manifest, const std::filesystem::path& out,
                 std::ostream& log) {
  const Dataset data = load_dataset(config);
  const LutModel model = load_model(config, data, checkpoint);
  const auto utts = triples_of(select_manifest(data, manifest));
  if (utts.empty()) throw EmptyInputError("evaluation manifest has no triples");
  EvalOptions eo;
  eo.beam = config.beam;
  eo.length_penalty = config.length_penalty;
  const EvalReport report = evaluate(model, utts, data.source, data.target, eo);
  ensure_dir(out);
  json j;
  j["seed"] = config.seed;
  j["utterances"] = report.utterances.size();
  j["bleu"] = report.bleu;
  j["wer"] = report.wer;
  j["token_accuracy"] = report.token_accuracy;
  j["pearson_wer_bleu"] = to_json(report.pearson);
  write_json(out / "eval_report.json", j);
  write_run_record(out, "evaluate", config);
  log << "BLEU " << report.bleu << "  WER " << report.wer << "  token accuracy "
      << report.token_accuracy << '\n';
  return 0;
}

int cmd_probe(const RunConfig& config, const std::filesystem::path& checkpoint, ProbeTask task,
              const std::filesystem::path& manifest, const std::filesystem::path& out,
              std::ostream& log) {
  const Dataset data = load_dataset(config);
  const LutModel model = load_model(config, data, checkpoint);
  std::vector<Utterance> utts;
  if (manifest.empty()) {
    utts = data.train;
    utts.insert(utts.end(), data.dev.begin(), data.dev.end());
  } else {
    utts = read_manifest(manifest, data.source, data.target);
  }
  const auto labels = probe_labels(utts, task);
  ProbeOptions po;
  po.seed = config.seed;
  ensure_dir(out);
  json j;
  j["seed"] = config.seed;
  j["task"] = to_string(task);
  for (ProbeLayer layer : {ProbeLayer::kAcoustic, ProbeLayer::kSemantic}) {
    const ProbeResult r = linear_probe(pooled_features(model, utts, layer), labels, po);
    j[to_string(layer)] = {{"train_accuracy", r.train_accuracy},
                           {"test_accuracy", r.test_accuracy},
                           {"classes", r.classes},
                           {"train_size", r.train_size},
                           {"test_size", r.test_size}};
    log << to_string(task) << " probe on " << to_string(layer) << ": test accuracy "
        << r.test_accuracy << '\n';
  }
  write_json(out / ("probe_" + to_string(task) + ".json"), j);
  write_run_record(out, "probe", config);
  return 0;
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "layers") return SweepAxis::kLayers;
  if (s == "loss-weights") return SweepAxis::kLossWeights;
  throw ConfigError("sweep axis must be layers or loss-weights, got '" + s + "'");
}

std::vector<SweepRow> sweep_rows(SweepAxis axis, const RunConfig& config) {
  std::vector<SweepRow> rows;
  if (axis == SweepAxis::kLayers) {
    const std::pair<std::size_t, std::size_t> split[] = {{2, 6}, {3, 5}, {4, 4}, {5, 3}, {6, 2}};
    for (auto [a, s] : split) {
      rows.push_back({std::to_string(a) + " " + std::to_string(s), a, s, config.model.weights});
    }
    return rows;
  }
  const std::pair<const char*, LossWeights> table[] = {
      {"I", {0.50, 0.05, 0.45}}, {"II", {0.40, 0.20, 0.40}},  {"III", {0.30, 0.40, 0.30}},
      {"IV", {0.20, 0.05, 0.75}}, {"V", {0.20, 0.60, 0.20}}, {"VI", {0.80, 0.05, 0.15}}};
  for (const auto& [label, w] : table) {
    rows.push_back({label, config.model.n_ae, config.model.n_se, w});
  }
  return rows;
}

std::vector<SweepResult> run_sweep(const RunConfig& config, SweepAxis axis,
                                   const std::filesystem::path& out, std::ostream& log) {
  const Dataset data = load_dataset(config);
  const TeacherModel teacher = obtain_teacher(config, data);
  const auto dev = triples_of(data.dev);
  if (dev.empty()) throw EmptyInputError("sweep needs dev triples");
  std::vector<SweepResult> results;
  std::size_t index = 0;
  for (const SweepRow& row : sweep_rows(axis, config)) {
    RunConfig c = config;
    c.model.n_ae = row.n_ae;
    c.model.n_se = row.n_se;
    c.model.weights = row.weights;
    LutModel model(model_config(c, data));
    const auto row_dir = out.empty() ? out : out / ("row" + std::to_string(index++));
    const TrainOutcome o = train_model(c, data, teacher, model, row_dir);
    EvalOptions eo;
    eo.beam = c.beam;
    eo.length_penalty = c.length_penalty;
    const EvalReport report = evaluate(model, dev, data.source, data.target, eo);
    results.push_back({row, o.dev_token_accuracy, report.bleu, report.wer});
    log << "row " << row.label << ": dev token accuracy " << o.dev_token_accuracy << ", BLEU "
        << report.bleu << '\n';
  }
  return results;
}

int cmd_sweep(const RunConfig& config, SweepAxis axis, const std::filesystem::path& out,
              std::ostream& log) {
  ensure_dir(out);
  const auto results = run_sweep(config, axis, out, log);
  const std::string name = axis == SweepAxis::kLayers ? "layers" : "loss-weights";
  std::ofstream tsv(out / ("sweep_" + name + ".tsv"));
  std::ostringstream table;
  table << "row\tn_ae\tn_se\talpha\tbeta\tgamma\tdev_token_acc\tbleu\twer\n";
  table << std::fixed << std::setprecision(4);
  for (const auto& r : results) {
    table << r.row.label << '\t' << r.row.n_ae << '\t' << r.row.n_se << '\t'
          << r.row.weights.alpha << '\t' << r.row.weights.beta << '\t' << r.row.weights.gamma
          << '\t' << r.dev_token_accuracy << '\t' << r.bleu << '\t' << r.wer << '\n';
  }
  tsv << "# seed " << config.seed << '\n' << table.str();
  log << table.str();
  write_run_record(out, "sweep " + name, config);
  return 0;
}

Checkpoint export_attention(const RunConfig& config, const std::filesystem::path& checkpoint,
                            const std::string& utt_id, const std::filesystem::path& manifest) {
  const Dataset data = load_dataset(config);
  const LutModel model = load_model(config, data, checkpoint);
  std::vector<Utterance> pool;
  if (manifest.empty()) {
    pool = data.dev;
    pool.insert(pool.end(), data.train.begin(), data.train.end());
  } else {
    pool = read_manifest(manifest, data.source, data.target);
  }
  const Utterance* u = nullptr;
  for (const auto& candidate : pool) {
    if (candidate.id == utt_id) {
      u = &candidate;
      break;
    }
  }
  if (u == nullptr) throw UsageError("utterance '" + utt_id + "' not found");
  nn::AttentionRecorder recorder;
  const EncoderOutputs enc = model.encode(u->features, nullptr, {}, &recorder);
  auto hyp = greedy_from(model, enc.h_se);
  if (hyp.size() >= model.config().max_st_len) hyp.resize(model.config().max_st_len - 1);
  model.decode_forward(decoder_input(hyp), enc.h_se, {}, &recorder);
  Checkpoint ckpt;
  ckpt.metadata = {{"kind", "attention"},
                   {"utt_id", utt_id},
                   {"seed", std::to_string(config.seed)},
                   {"translation", [&] {
                      std::string s;
                      for (const auto& t : data.target.decode(hyp)) s += (s.empty() ? "" : " ") + t;
                      return s;
                    }()}};
  ckpt.tensors = std::move(recorder.matrices);
  return ckpt;
}

int cmd_export_attention(const RunConfig& config, const std::filesystem::path& checkpoint,
                         const std::string& utt_id, const std::filesystem::path& manifest,
                         const std::filesystem::path& out, std::ostream& log) {
  const Checkpoint ckpt = export_attention(config, checkpoint, utt_id, manifest);
  ensure_dir(out);
  const auto path = out / ("attention_" + utt_id + ".ckpt");
  save_checkpoint(path, ckpt);
  write_run_record(out, "export-attention", config);
  log << "wrote " << ckpt.tensors.size() << " attention matrices to " << path.string() << '\n';
  return 0;
}

}  // namespace lut::app
