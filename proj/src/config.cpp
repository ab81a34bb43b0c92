#include "lut/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "lut/error.hpp"

namespace lut {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  }
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LUT_SIZE(expr)                                                                \
  Field {                                                                             \
    [](RunConfig& c, const std::string& k, const std::string& v) {                    \
      expr = parse_number<std::size_t>(k, v);                                         \
    },                                                                                \
        [](const RunConfig& c) { return std::to_string(expr); }                      \
  }
#define LUT_REAL(expr)                                                                \
  Field {                                                                             \
    [](RunConfig& c, const std::string& k, const std::string& v) { expr = parse_real(k, v); }, \
        [](const RunConfig& c) { return fmt(expr); }                                 \
  }
#define LUT_BOOL(expr)                                                                \
  Field {                                                                             \
    [](RunConfig& c, const std::string& k, const std::string& v) { expr = parse_bool(k, v); }, \
        [](const RunConfig& c) { return std::string((expr) ? "true" : "false"); }    \
  }
#define LUT_PATH(expr)                                                                \
  Field {                                                                             \
    [](RunConfig& c, const std::string&, const std::string& v) { expr = v; },         \
        [](const RunConfig& c) { return (expr).string(); }                           \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", Field{[](RunConfig& c, const std::string& k,
                        const std::string& v) { c.apply_seed(parse_number<std::uint64_t>(k, v)); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"mode", Field{[](RunConfig& c, const std::string&,
                        const std::string& v) { c.mode = parse_train_mode(v); },
                     [](const RunConfig& c) { return to_string(c.mode); }}},

      {"data.source_words", LUT_SIZE(c.data.source_words)},
      {"data.target_words", LUT_SIZE(c.data.target_words)},
      {"data.utterances", LUT_SIZE(c.data.utterances)},
      {"data.min_length", LUT_SIZE(c.data.min_length)},
      {"data.max_length", LUT_SIZE(c.data.max_length)},
      {"data.frames_per_token", LUT_SIZE(c.data.frames_per_token)},
      {"data.noise", LUT_REAL(c.data.noise)},
      {"data.feature_dim", LUT_SIZE(c.data.feature_dim)},
      {"data.speakers", LUT_SIZE(c.data.speakers)},
      {"data.intents", LUT_SIZE(c.data.intents)},
      {"data.speaker_scale", LUT_REAL(c.data.speaker_scale)},
      {"data.rule", Field{[](RunConfig& c, const std::string&,
                             const std::string& v) { c.data.rule = parse_translation_rule(v); },
                          [](const RunConfig& c) { return to_string(c.data.rule); }}},
      {"data.grammar", Field{[](RunConfig& c, const std::string&,
                                const std::string& v) { c.data.grammar = parse_source_grammar(v); },
                             [](const RunConfig& c) { return to_string(c.data.grammar); }}},
      {"data.topic_strength", LUT_REAL(c.data.topic_strength)},
      {"data.raw_frame_rate", LUT_BOOL(c.data.raw_frame_rate)},
      {"data.dev_fraction", LUT_REAL(c.dev_fraction)},
      {"data.asr_utterances", LUT_SIZE(c.asr_utterances)},

      {"model.n_ae", LUT_SIZE(c.model.n_ae)},
      {"model.n_se", LUT_SIZE(c.model.n_se)},
      {"model.n_td", LUT_SIZE(c.model.n_td)},
      {"model.d_model", LUT_SIZE(c.model.d_model)},
      {"model.heads", LUT_SIZE(c.model.heads)},
      {"model.d_ff", LUT_SIZE(c.model.d_ff)},
      {"model.alpha", LUT_REAL(c.model.weights.alpha)},
      {"model.beta", LUT_REAL(c.model.weights.beta)},
      {"model.gamma", LUT_REAL(c.model.weights.gamma)},
      {"model.branch", Field{[](RunConfig& c, const std::string&,
                                const std::string& v) { c.model.branch = parse_branch_mode(v); },
                             [](const RunConfig& c) { return to_string(c.model.branch); }}},
      {"model.dropout", LUT_REAL(c.model.dropout)},
      {"model.label_smoothing", LUT_REAL(c.model.label_smoothing)},
      {"model.max_asr_len", LUT_SIZE(c.model.max_asr_len)},
      {"model.max_st_len", LUT_SIZE(c.model.max_st_len)},
      {"model.conv_kernel_time", LUT_SIZE(c.model.conv_kernel_time)},
      {"model.conv_kernel_feature", LUT_SIZE(c.model.conv_kernel_feature)},
      {"model.conv_stride_feature", LUT_SIZE(c.model.conv_stride_feature)},

      {"train.step1_ratio", LUT_SIZE(c.plan.step1_ratio)},
      {"train.step2_ratio", LUT_SIZE(c.plan.step2_ratio)},
      {"train.max_steps", LUT_SIZE(c.plan.max_steps)},
      {"train.checkpoint_interval", LUT_SIZE(c.plan.checkpoint_interval)},
      {"train.average_last_k", LUT_SIZE(c.plan.average_last_k)},
      {"train.eval_interval", LUT_SIZE(c.plan.eval_interval)},
      {"train.patience", LUT_SIZE(c.plan.patience)},
      {"train.dev_eval_limit", LUT_SIZE(c.plan.dev_eval_limit)},
      {"train.frames_budget", LUT_SIZE(c.plan.frames_budget)},
      {"train.grad_clip", LUT_REAL(c.plan.grad_clip)},
      {"train.spec_augment", LUT_BOOL(c.plan.spec_augment)},
      {"train.peak_lr", LUT_REAL(c.schedule.peak_lr)},
      {"train.warmup_steps", LUT_SIZE(c.schedule.warmup_steps)},
      {"train.decay_rate", LUT_REAL(c.schedule.decay_rate)},
      {"train.decay_steps", LUT_SIZE(c.schedule.decay_steps)},

      {"teacher.mode", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                               if (v == "trained") {
                                 c.teacher_mode = TeacherMode::kTrained;
                               } else if (v == "table") {
                                 c.teacher_mode = TeacherMode::kTable;
                               } else {
                                 throw ConfigError("config key '" + k +
                                                   "': expected trained or table, got '" + v + "'");
                               }
                             },
                             [](const RunConfig& c) {
                               return std::string(c.teacher_mode == TeacherMode::kTable ? "table"
                                                                                        : "trained");
                             }}},
      {"teacher.layers", LUT_SIZE(c.teacher.layers)},
      {"teacher.heads", LUT_SIZE(c.teacher.heads)},
      {"teacher.d_ff", LUT_SIZE(c.teacher.d_ff)},
      {"teacher.mask_prob", LUT_REAL(c.teacher.mask_prob)},
      {"teacher.steps", LUT_SIZE(c.teacher.steps)},
      {"teacher.batch_sentences", LUT_SIZE(c.teacher.batch_sentences)},
      {"teacher.peak_lr", LUT_REAL(c.teacher.peak_lr)},
      {"teacher.warmup_steps", LUT_SIZE(c.teacher.warmup_steps)},
      {"teacher.heldout_fraction", LUT_REAL(c.teacher.heldout_fraction)},
      {"teacher.supervision_layer", LUT_SIZE(c.teacher.supervision_layer)},

      {"decode.beam", LUT_SIZE(c.beam)},
      {"decode.length_penalty", LUT_REAL(c.length_penalty)},

      {"paths.data_dir", LUT_PATH(c.data_dir)},
      {"paths.train_manifest", LUT_PATH(c.train_manifest)},
      {"paths.dev_manifest", LUT_PATH(c.dev_manifest)},
      {"paths.asr_manifest", LUT_PATH(c.asr_manifest)},
      {"paths.source_vocab", LUT_PATH(c.source_vocab)},
      {"paths.target_vocab", LUT_PATH(c.target_vocab)},
      {"paths.teacher_checkpoint", LUT_PATH(c.teacher_checkpoint)},
  };
  return table;
}

#undef LUT_SIZE
#undef LUT_REAL
#undef LUT_BOOL
#undef LUT_PATH

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::kBase ? "base" : "expanded"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "base") return TrainMode::kBase;
  if (s == "expanded") return TrainMode::kExpanded;
  throw ConfigError("mode must be base or expanded, got '" + s + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + " has no '=': " + line);
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse(ss.str());
  if (c.data_dir.empty() || c.data_dir.is_relative()) {
    c.data_dir = std::filesystem::absolute(path).parent_path() / c.data_dir;
  }
  return c;
}

void RunConfig::apply_seed(std::uint64_t root) {
  seed = root;
  data.seed = root;
  model.init_seed = root;
  plan.seed = root;
  teacher.seed = root;
}

void RunConfig::apply_env() {
  if (const char* s = std::getenv("LUT_SEED")) {
    apply_seed(parse_number<std::uint64_t>("LUT_SEED", s));
  }
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return data_dir / p;
}

void RunConfig::validate(bool need_data) const {
  model.validate();
  plan.validate();
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw ConfigError("data.dev_fraction must lie in [0, 1)");
  }
  if (beam == 0) throw ConfigError("decode.beam must be >= 1");
  if (!need_data) return;
  for (const auto* p : {&train_manifest, &dev_manifest, &source_vocab, &target_vocab}) {
    if (!std::filesystem::exists(resolve(*p))) {
      throw ConfigError("referenced file does not exist: " + resolve(*p).string());
    }
  }
  if (mode == TrainMode::kExpanded) {
    if (asr_manifest.empty()) {
      throw ConfigError("mode=expanded needs paths.asr_manifest (external ASR pairs)");
    }
    if (!std::filesystem::exists(resolve(asr_manifest))) {
      throw ConfigError("referenced file does not exist: " + resolve(asr_manifest).string());
    }
  }
  if (!teacher_checkpoint.empty() && !std::filesystem::exists(resolve(teacher_checkpoint))) {
    throw ConfigError("referenced file does not exist: " + resolve(teacher_checkpoint).string());
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [name, field] : fields()) os << name << " = " << field.get(*this) << '\n';
  return os.str();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [name, field] : fields()) out.push_back(name);
  return out;
}

}  // namespace lut
