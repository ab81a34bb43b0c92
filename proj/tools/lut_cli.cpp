// Command-line entry point: lut <command> [flags]; `lut <command> --help`
// lists the flags of each command.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lut/app.hpp"
#include "lut/config.hpp"
#include "lut/error.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> branch;
  std::optional<std::size_t> beam;
  std::vector<std::string> set;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data, "directory holding manifests and vocabularies");
  cmd->add_option("--seed", f.seed, "root seed (overrides LUT_SEED and the config)");
  cmd->add_option("--mode", f.mode, "training setting")->check(CLI::IsMember({"base", "expanded"}));
  cmd->add_option("--branch", f.branch, "semantic branch")->check(CLI::IsMember({"seq", "word"}));
  cmd->add_option("--beam", f.beam, "beam width")->check(CLI::PositiveNumber);
  cmd->add_option("--set", f.set, "override one config key, KEY=VALUE (repeatable)");
  cmd->add_option("--out", f.out, "output directory")->required();
}

lut::RunConfig build_config(const CommonFlags& f) {
  lut::RunConfig c = f.config.empty() ? lut::RunConfig{} : lut::RunConfig::load(f.config);
  c.apply_env();
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lut::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.data.empty()) c.data_dir = f.data;
  if (f.seed) c.apply_seed(*f.seed);
  if (f.mode) c.mode = lut::parse_train_mode(*f.mode);
  if (f.branch) c.model.branch = lut::parse_branch_mode(*f.branch);
  if (f.beam) c.beam = *f.beam;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Listen-understand-translate speech translation toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint, manifest, task = "speaker", axis, utt_id;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus into --out");
  add_common(gen, flags);
  auto* teacher = app.add_subcommand("train-teacher", "train and freeze the teacher encoder");
  add_common(teacher, flags);
  auto* train = app.add_subcommand("train", "train a model with the semi-supervised schedule");
  add_common(train, flags);
  auto* decode = app.add_subcommand("decode", "translate and transcribe a manifest");
  add_common(decode, flags);
  auto* eval = app.add_subcommand("evaluate", "BLEU, WER and token accuracy on a manifest");
  add_common(eval, flags);
  auto* probe = app.add_subcommand("probe", "linear probes on pooled encoder states");
  add_common(probe, flags);
  auto* sweep = app.add_subcommand("sweep", "layer or loss-weight ablation sweep");
  add_common(sweep, flags);
  auto* attn = app.add_subcommand("export-attention", "dump attention matrices of one utterance");
  add_common(attn, flags);

  for (auto* cmd : {decode, eval, probe, attn}) {
    cmd->add_option("--checkpoint", checkpoint, "model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--manifest", manifest, "manifest to use instead of the defaults")
        ->check(CLI::ExistingFile);
  }
  probe->add_option("--task", task, "probe label")->check(CLI::IsMember({"speaker", "intent"}));
  sweep->add_option("--axis", axis, "sweep axis")
      ->required()
      ->check(CLI::IsMember({"layers", "loss-weights"}));
  attn->add_option("--utt-id", utt_id, "utterance id")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const lut::RunConfig config = build_config(flags);
    std::ostream& log = std::cout;
    if (gen->parsed()) return lut::app::cmd_gen_data(config, flags.out, log);
    if (teacher->parsed()) return lut::app::cmd_train_teacher(config, flags.out, log);
    if (train->parsed()) return lut::app::cmd_train(config, flags.out, log);
    if (decode->parsed()) {
      return lut::app::cmd_decode(config, checkpoint, manifest, flags.out, log);
    }
    if (eval->parsed()) {
      return lut::app::cmd_evaluate(config, checkpoint, manifest, flags.out, log);
    }
    if (probe->parsed()) {
      return lut::app::cmd_probe(config, checkpoint, lut::parse_probe_task(task), manifest,
                                 flags.out, log);
    }
    if (sweep->parsed()) {
      return lut::app::cmd_sweep(config, lut::app::parse_sweep_axis(axis), flags.out, log);
    }
    if (attn->parsed()) {
      return lut::app::cmd_export_attention(config, checkpoint, utt_id, manifest, flags.out, log);
    }
  } catch (const lut::ConfigError& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
    return 2;
  } catch (const lut::UsageError& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
    return 2;
  } catch (const lut::Error& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
