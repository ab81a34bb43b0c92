#include "lut/training.hpp"

#include <deque>
#include <limits>
#include <random>

#include "json.hpp"
#include "lut/batching.hpp"
#include "lut/ctc.hpp"
#include "lut/error.hpp"
#include "lut/ops.hpp"

namespace lut {

namespace {

std::vector<Utterance> select(std::span<const Utterance> corpus,
                              const std::vector<std::size_t>& keep) {
  std::vector<Utterance> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(corpus[i]);
  return out;
}

std::vector<std::size_t> lengths_of(const std::vector<Utterance>& corpus) {
  std::vector<std::size_t> lengths;
  for (const auto& u : corpus) lengths.push_back(u.frames());
  return lengths;
}

}  // namespace

void TrainPlan::validate() const {
  if (step1_ratio == 0 && step2_ratio == 0) throw ConfigError("step ratio 0:0");
  if (max_steps == 0) throw ConfigError("max_steps must be >= 1");
  if (frames_budget == 0) throw ConfigError("frames_budget must be >= 1");
}

StepKind TrainPlan::kind_at(std::size_t step) const {
  const std::size_t cycle = step1_ratio + step2_ratio;
  return (step - 1) % cycle < step1_ratio ? StepKind::kAuxiliary : StepKind::kFull;
}

std::string TrainLogRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["lr"] = lr;
  j["L_ae"] = l_ae;
  j["L_se"] = l_se;
  j["L_td"] = l_td ? nlohmann::ordered_json(*l_td) : nlohmann::ordered_json(nullptr);
  j["L_total"] = l_total;
  j["branch_mode"] = to_string(branch);
  j["step_kind"] = to_string(kind);
  return j.dump();
}

const TeacherEmbedding* TeacherCache::get(const std::vector<int>& z) {
  if (teacher_ == nullptr) return nullptr;
  auto it = cache_.find(z);
  if (it == cache_.end()) it = cache_.emplace(z, teacher_->embed(z)).first;
  return &it->second;
}

LossComponents batch_loss(const LutModel& model, std::span<const Utterance> corpus,
                          std::span<const std::size_t> batch, TeacherCache& teachers,
                          StepKind kind, const LossWeights& weights,
                          const nn::ForwardContext& ctx) {
  if (batch.empty()) throw EmptyInputError("empty batch");
  LossComponents out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double l_td = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Utterance& u = corpus[batch[k]];
    LossComponents c = model.utterance_loss(u, teachers.get(u.z), kind, weights, ctx);
    out.total = k == 0 ? c.total : ops::add(out.total, c.total);
    out.l_ae += c.l_ae * inv;
    out.l_se += c.l_se * inv;
    if (c.l_td) l_td += *c.l_td * inv;
  }
  out.total = ops::scale(out.total, inv);
  if (kind == StepKind::kFull) out.l_td = l_td;
  return out;
}

double dev_loss(const LutModel& model, std::span<const Utterance> dev, TeacherCache& teachers,
                std::size_t limit) {
  NoGradScope no_grad;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& u : dev) {
    if (n == limit) break;
    if (!u.y || !ctc::feasible(u.frames(), u.z)) continue;
    total += model.utterance_loss(u, teachers.get(u.z), StepKind::kFull, model.config().weights)
                 .total.item();
    ++n;
  }
  if (n == 0) throw EmptyInputError("dev set has no usable triples");
  return total / static_cast<double>(n);
}

TrainResult run_semi_supervised(const TrainPlan& plan, const Schedule& schedule, LutModel& model,
                                const TeacherModel* teacher, std::span<const Utterance> triples,
                                std::span<const Utterance> asr_pairs,
                                std::span<const Utterance> dev, const TrainHooks& hooks) {
  plan.validate();
  if (triples.empty()) throw EmptyInputError("training needs at least one triple");
  const LossWeights& weights = model.config().weights;
  if (weights.beta > 0.0 && teacher == nullptr) {
    throw ConfigError("beta > 0 but no teacher was supplied");
  }
  if (teacher != nullptr && teacher->d_model() != model.config().d_model) {
    throw ConfigError("teacher width " + std::to_string(teacher->d_model()) +
                      " differs from d_model " + std::to_string(model.config().d_model));
  }

  const std::vector<Utterance> S = select(triples, feasible_indices(triples));
  if (S.empty()) throw EmptyInputError("no triple admits a CTC alignment");
  std::vector<Utterance> A;
  if (!asr_pairs.empty()) A = select(asr_pairs, feasible_indices(asr_pairs));
  const std::vector<Utterance>& step1_source = A.empty() ? S : A;

  BatchStream s_stream(lengths_of(S), plan.frames_budget, plan.seed);
  BatchStream a_stream(lengths_of(step1_source), plan.frames_budget, plan.seed ^ 0xa5a5a5a5ull);
  std::mt19937_64 rng(plan.seed * 0x9e3779b97f4a7c15ull + 17);
  const nn::ForwardContext ctx{model.config().dropout, &rng};
  TeacherCache teachers(model.has_branches() ? teacher : nullptr);

  nn::ParameterList params = model.parameters();
  Adam adam(params);
  TrainResult result;
  result.best_dev_loss = std::numeric_limits<double>::infinity();
  std::deque<Checkpoint> kept;
  const std::size_t keep_k = std::max<std::size_t>(plan.average_last_k, 1);
  std::size_t bad_evals = 0;

  for (std::size_t step = 1; step <= plan.max_steps; ++step) {
    const StepKind kind = plan.kind_at(step);
    const std::vector<Utterance>& source = kind == StepKind::kFull ? S : step1_source;
    const BatchIndices& batch = kind == StepKind::kFull ? s_stream.next() : a_stream.next();

    std::vector<Utterance> augmented;
    std::span<const Utterance> view = source;
    std::vector<std::size_t> ids(batch.begin(), batch.end());
    if (plan.spec_augment) {
      for (std::size_t k = 0; k < batch.size(); ++k) {
        Utterance u = source[batch[k]];
        u.features = spec_augment(u.features, plan.spec_augment_options, rng).features;
        augmented.push_back(std::move(u));
        ids[k] = k;
      }
      view = augmented;
    }

    nn::zero_grads(params);
    LossComponents loss;
    {
      Tape tape;
      TapeScope scope(tape);
      loss = batch_loss(model, view, ids, teachers, kind, weights, ctx);
      if (loss.total.requires_grad()) tape.backward(loss.total);
    }
    if (plan.grad_clip > 0.0) clip_grad_norm(params, plan.grad_clip);
    if (hooks.on_gradients) hooks.on_gradients(kind, model);
    const double lr = lr_at(step, schedule);
    adam.step(lr);
    ++(kind == StepKind::kFull ? result.step2_updates : result.step1_updates);
    result.steps = step;

    TrainLogRecord rec{step, lr, loss.l_ae, loss.l_se, loss.l_td, loss.total.item(),
                       model.config().branch, kind};
    if (hooks.log_stream != nullptr) *hooks.log_stream << rec.to_json() << '\n';
    if (hooks.on_log) hooks.on_log(rec);
    result.log.push_back(std::move(rec));

    const bool last = step == plan.max_steps;
    bool stop = false;
    if (plan.eval_interval > 0 && !dev.empty() && (step % plan.eval_interval == 0 || last)) {
      const double d = dev_loss(model, dev, teachers, plan.dev_eval_limit);
      result.dev.push_back({step, d});
      if (d < result.best_dev_loss) {
        result.best_dev_loss = d;
        bad_evals = 0;
      } else if (++bad_evals >= plan.patience) {
        stop = true;
        result.early_stopped = !last;
      }
    }
    if ((plan.checkpoint_interval > 0 && step % plan.checkpoint_interval == 0) || last || stop) {
      if (kept.empty() || kept.back().metadata.at("step") != std::to_string(step)) {
        kept.push_back(model.to_checkpoint({{"step", std::to_string(step)}}));
        if (kept.size() > keep_k) kept.pop_front();
      }
    }
    if (stop) break;
  }
  result.checkpoints.assign(kept.begin(), kept.end());
  if (plan.average_last_k > 1 && result.checkpoints.size() > 1) {
    model.load(average_checkpoints(result.checkpoints));
    result.averaged = true;
  }
  return result;
}

}  // namespace lut
