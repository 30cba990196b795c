#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/grpo.hpp"
#include "hdk/metrics.hpp"
#include "hdk/random.hpp"
#include "hdk/reward.hpp"
#include "hdk/tool_call.hpp"
#include "hdk/transcript.hpp"

// Desk-scale stand-in for the VLM policy: a tabular softmax policy trained
// with group-normalized score-function updates. It exists to exercise the
// reward and advantage machinery end to end, not to model driving.
namespace hdk::toy {

struct ModeCeilings {
  double text = 1.0;
  double tool = 1.0;
};

/// Scenarios plus the best per-step accuracy each mode can reach. Tool mode
/// reaches its ceiling only with the full call budget.
struct SyntheticEnv {
  std::vector<Scenario> scenarios;
  ModeCeilings simple{1.0, 1.0};
  ModeCeilings complex{0.4, 1.0};

  const ModeCeilings& ceilings(const Scenario& s) const {
    return s.complexity_tag == Complexity::Complex ? complex : simple;
  }

  void validate() const {
    if (scenarios.empty()) throw Error(Errc::InvalidConfig, "synthetic env has no scenarios");
    for (const auto* c : {&simple, &complex}) {
      if (c->text < 0 || c->text > 1 || c->tool < 0 || c->tool > 1) {
        throw Error(Errc::InvalidConfig, "ceilings must lie in [0, 1]");
      }
    }
    if (simple.text != simple.tool) throw Error(Errc::InvalidConfig, "simple scenarios need equal ceilings");
    const bool any_complex = std::any_of(scenarios.begin(), scenarios.end(),
                                         [](const Scenario& s) { return s.complexity_tag == Complexity::Complex; });
    if (any_complex && !(complex.tool > complex.text)) {
      throw Error(Errc::InvalidConfig, "complex scenarios need tool ceiling > text ceiling");
    }
    for (const auto& s : scenarios) {
      if (s.ground_truth.size() != MetaActionSequence::kSteps) {
        throw Error(Errc::InvalidConfig, "scenario '" + s.id + "' needs a 4-step ground truth");
      }
    }
  }

  /// Random ground truths; the first round(n * complex_fraction) scenarios are complex.
  static SyntheticEnv generate(std::size_t n, double complex_fraction, std::uint64_t seed) {
    Rng rng(seed);
    SyntheticEnv env;
    const auto n_complex = static_cast<std::size_t>(std::llround(static_cast<double>(n) * complex_fraction));
    for (std::size_t i = 0; i < n; ++i) {
      Scenario s;
      s.id = "toy-" + std::to_string(i);
      s.speed_kmh = static_cast<double>(rng.below(80));
      s.navigation = "Go straight";
      for (std::size_t t = 0; t < MetaActionSequence::kSteps; ++t) {
        s.ground_truth.actions.push_back(composite_from_index(rng.below(kCompositeActions)));
      }
      s.complexity_tag = i < n_complex ? Complexity::Complex : Complexity::Simple;
      env.scenarios.push_back(std::move(s));
    }
    return env;
  }
};

using Logits12 = std::array<double, kCompositeActions>;

struct PolicyTable {
  std::array<double, 2> mode_logits{};  // [text, tool]
  std::array<std::array<Logits12, MetaActionSequence::kSteps>, 2> action_logits{};
  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

template <std::size_t N>
std::array<double, N> softmax(const std::array<double, N>& logits, double temperature) {
  std::array<double, N> p{};
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < N; ++i) z += p[i] = std::exp((logits[i] - top) / temperature);
  for (auto& x : p) x /= z;
  return p;
}

constexpr std::size_t mode_slot(Mode m) noexcept { return m == Mode::Text ? 0 : 1; }

/// One tabular policy per scenario.
class ToyPolicy {
 public:
  explicit ToyPolicy(std::size_t n_scenarios, double initial_tool_logit = 0.0) : tables_(n_scenarios) {
    for (auto& t : tables_) t.mode_logits[1] = initial_tool_logit;
  }

  std::size_t size() const noexcept { return tables_.size(); }
  const PolicyTable& table(std::size_t s) const { return tables_.at(s); }
  PolicyTable& table(std::size_t s) { return tables_.at(s); }

  std::array<double, 2> mode_probs(std::size_t s, double temperature) const {
    return softmax(tables_.at(s).mode_logits, temperature);
  }
  Logits12 action_probs(std::size_t s, Mode m, std::size_t step, double temperature) const {
    return softmax(tables_.at(s).action_logits[mode_slot(m)][step], temperature);
  }

  double sequence_probability(std::size_t s, Mode m, const MetaActionSequence& seq, double temperature) const {
    double p = 1.0;
    for (std::size_t t = 0; t < seq.size() && t < MetaActionSequence::kSteps; ++t) {
      p *= action_probs(s, m, t, temperature)[composite_index(seq[t])];
    }
    return p;
  }

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  std::vector<PolicyTable> tables_;
};

struct StageSchedule {
  Stage stage = Stage::FCM;
  int epochs = 1;
};

struct TrainingConfig {
  std::size_t group_size = 4;
  int max_tool_calls = 3;
  double learning_rate = 0.5;
  double train_temperature = 1.0;
  double eval_temperature = 0.7;
  int iterations_per_epoch = 500;
  int eval_rollouts = 8;
  double initial_tool_logit = 0.0;
  std::uint64_t seed = 0;
  reward::RewardConfig reward;
  std::optional<reward::WeightTable> weights;  // unit weights when empty

  void validate() const {
    if (group_size < 2 || max_tool_calls < 1 || iterations_per_epoch < 0 || eval_rollouts < 1 ||
        !(train_temperature > 0) || !(eval_temperature > 0) || !(learning_rate >= 0)) {
      throw Error(Errc::InvalidConfig, "invalid toy training config");
    }
    reward.validate();
  }
};

// What one rollout decided, kept for the policy-gradient update.
struct RolloutTrace {
  Mode mode = Mode::Text;
  bool mode_forced = false;
  std::array<std::size_t, MetaActionSequence::kSteps> intended{};
  int n_calls = 0;
  std::string transcript;
};

struct EvalSummary {
  double mean_r_acc = 0.0;
  double msa = 0.0;
  double tool_fraction = 0.0;
  double first_frame_acc = 0.0;
  double seq_avg_acc = 0.0;
};

struct EpochReport {
  Stage stage = Stage::FCM;
  int epoch = 0;
  double mean_r_acc = 0.0;      // training rollouts
  double mean_r_total = 0.0;
  double tool_fraction = 0.0;   // training rollouts
  EvalSummary eval;
};

struct TrainingReport {
  std::uint64_t seed = 0;
  EvalSummary initial;
  std::vector<EpochReport> epochs;
  EvalSummary final_eval;
};

class ToyTrainer {
 public:
  ToyTrainer(SyntheticEnv env, TrainingConfig config)
      : env_(std::move(env)),
        config_(std::move(config)),
        policy_(env_.scenarios.size(), config_.initial_tool_logit),
        rng_(config_.seed),
        weights_(config_.weights.value_or(reward::WeightTable::uniform())) {
    env_.validate();
    config_.validate();
  }

  const ToyPolicy& policy() const noexcept { return policy_; }
  const SyntheticEnv& env() const noexcept { return env_; }

  // Per-step accuracy ceiling after `n_calls` tool calls.
  double ceiling(const Scenario& s, Mode mode, int n_calls) const {
    const auto& c = env_.ceilings(s);
    if (mode == Mode::Text) return c.text;
    const double frac = std::min(1.0, static_cast<double>(n_calls) / config_.max_tool_calls);
    return c.text + (c.tool - c.text) * frac;
  }

  RolloutTrace rollout(std::size_t s, std::optional<Mode> forced, double temperature, Rng& rng) const {
    const Scenario& sc = env_.scenarios[s];
    RolloutTrace tr;
    tr.mode_forced = forced.has_value();
    if (forced) {
      tr.mode = *forced;
    } else {
      const auto p = policy_.mode_probs(s, temperature);
      tr.mode = rng.categorical(p) == 0 ? Mode::Text : Mode::Tool;
    }
    tr.n_calls = tr.mode == Mode::Tool ? 1 + static_cast<int>(rng.below(static_cast<std::size_t>(config_.max_tool_calls))) : 0;
    const double cap = ceiling(sc, tr.mode, tr.n_calls);

    protocol::TranscriptDraft draft;
    draft.mode = tr.mode;
    for (std::size_t t = 0; t < MetaActionSequence::kSteps; ++t) {
      const auto p = policy_.action_probs(s, tr.mode, t, temperature);
      tr.intended[t] = rng.categorical(p);
      std::size_t emitted = tr.intended[t];
      if (!(rng.uniform() < cap)) {
        // Missing evidence: the answer at this step is wrong.
        const std::size_t truth = composite_index(sc.ground_truth[t]);
        emitted = (truth + 1 + rng.below(kCompositeActions - 1)) % kCompositeActions;
      }
      draft.actions.actions.push_back(composite_from_index(emitted));
    }
    draft.sections = {"Ego at " + std::to_string(static_cast<int>(sc.speed_kmh)) + " km/h; " + sc.navigation + ".",
                      "Plan follows the observed scene.", "Predicted " + std::to_string(draft.actions.size()) + " steps."};
    for (int c = 0; c < tr.n_calls; ++c) {
      protocol::ToolCall call;
      switch (c % 3) {
        case 0: call.params = protocol::RetrieveViewParams{protocol::FrameIndex{1}, protocol::View::FrontLeft}; break;
        case 1: call.params = protocol::DepthEstimationParams{protocol::View::Front}; break;
        default: call.params = protocol::ObjectDetection3DParams{protocol::View::Front, "vehicle"}; break;
      }
      draft.tool_calls.emplace_back(c == 0 ? protocol::Section::Description : protocol::Section::Reasoning, call);
    }
    tr.transcript = protocol::render_transcript(draft);
    return tr;
  }

  struct IterationStats {
    double mean_r_acc = 0.0;
    double mean_r_total = 0.0;
    double tool_fraction = 0.0;
  };

  /// Samples one scenario, builds and scores a group, and applies the update.
  IterationStats iterate(Stage stage) {
    const std::size_t s = rng_.below(env_.scenarios.size());
    return iterate_on(s, stage);
  }

  IterationStats iterate_on(std::size_t s, Stage stage) {
    TraceSampler sampler(*this, s, rng_);
    grpo::GroupOptions opts;
    opts.parse.max_tool_calls = static_cast<std::size_t>(config_.max_tool_calls);
    ResponseGroup group = grpo::build_group(sampler, env_.scenarios[s], config_.group_size, stage, opts);
    reward::score_group(group, env_.scenarios[s].ground_truth, weights_, config_.reward);
    grpo::assign_advantages(group);
    apply_update(s, sampler.traces, group.advantages);

    IterationStats st;
    for (const auto& t : group.trajectories) {
      st.mean_r_acc += t.r_acc;
      st.mean_r_total += t.r_total;
      st.tool_fraction += t.mode == Mode::Tool;
    }
    const double g = static_cast<double>(group.size());
    st.mean_r_acc /= g;
    st.mean_r_total /= g;
    st.tool_fraction /= g;
    return st;
  }

  /// Adaptive-mode rollouts at the eval temperature with a dedicated stream,
  /// so evaluation never perturbs training randomness.
  EvalSummary evaluate(std::uint64_t stream) const {
    Rng rng(config_.seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    std::vector<metrics::EvalRecord> records;
    double r_acc = 0.0;
    double tool = 0.0;
    for (std::size_t s = 0; s < env_.scenarios.size(); ++s) {
      const Scenario& sc = env_.scenarios[s];
      const auto& c = env_.ceilings(sc);
      for (int k = 0; k < config_.eval_rollouts; ++k) {
        RolloutTrace tr = rollout(s, std::nullopt, config_.eval_temperature, rng);
        const auto transcript = protocol::parse_transcript(tr.transcript);
        r_acc += reward::accuracy_reward(transcript.prediction, sc.ground_truth, weights_, config_.reward);
        tool += tr.mode == Mode::Tool;
        metrics::EvalRecord rec;
        rec.scenario_id = sc.id;
        rec.prediction = transcript.prediction.value_or(MetaActionSequence{});
        rec.ground_truth = sc.ground_truth;
        rec.mode_chosen = tr.mode;
        rec.acc_text = c.text;
        rec.acc_tool = c.tool;
        records.push_back(std::move(rec));
      }
    }
    EvalSummary out;
    const double n = static_cast<double>(records.size());
    out.mean_r_acc = r_acc / n;
    out.tool_fraction = tool / n;
    out.msa = metrics::mode_selection_accuracy(records);
    const auto scores = metrics::evaluate_dataset(records);
    out.first_frame_acc = scores.first_frame_acc;
    out.seq_avg_acc = scores.seq_avg_acc;
    return out;
  }

  TrainingReport run(std::span<const StageSchedule> schedule) {
    for (const auto& st : schedule) {
      if (st.epochs < 0) throw Error(Errc::InvalidConfig, "negative epoch count");
      if (st.stage == Stage::FCM && config_.group_size % 2 != 0) {
        throw Error(Errc::InvalidConfig, "FCM needs an even group size");
      }
    }
    TrainingReport report;
    report.seed = config_.seed;
    std::uint64_t stream = 0;
    report.initial = evaluate(stream++);
    for (const auto& st : schedule) {
      for (int e = 0; e < st.epochs; ++e) {
        EpochReport ep;
        ep.stage = st.stage;
        ep.epoch = static_cast<int>(report.epochs.size());
        for (int it = 0; it < config_.iterations_per_epoch; ++it) {
          const auto stats = iterate(st.stage);
          ep.mean_r_acc += stats.mean_r_acc;
          ep.mean_r_total += stats.mean_r_total;
          ep.tool_fraction += stats.tool_fraction;
        }
        if (config_.iterations_per_epoch > 0) {
          const double n = config_.iterations_per_epoch;
          ep.mean_r_acc /= n;
          ep.mean_r_total /= n;
          ep.tool_fraction /= n;
        }
        ep.eval = evaluate(stream++);
        report.epochs.push_back(ep);
      }
    }
    report.final_eval = report.epochs.empty() ? report.initial : report.epochs.back().eval;
    return report;
  }

 private:
  struct TraceSampler final : grpo::RolloutSampler {
    TraceSampler(const ToyTrainer& trainer, std::size_t scenario, Rng& rng)
        : trainer(trainer), scenario(scenario), rng(rng) {}
    std::string sample(const Scenario&, std::optional<Mode> forced) override {
      traces.push_back(trainer.rollout(scenario, forced, trainer.config_.train_temperature, rng));
      return traces.back().transcript;
    }
    const ToyTrainer& trainer;
    std::size_t scenario;
    Rng& rng;
    std::vector<RolloutTrace> traces;
  };

  // logits += lr * A * d log pi / d logits, evaluated at the pre-update policy.
  void apply_update(std::size_t s, const std::vector<RolloutTrace>& traces, const std::vector<double>& advantages) {
    const double lr = config_.learning_rate;
    if (lr == 0.0) return;
    const double temp = config_.train_temperature;
    const PolicyTable before = policy_.table(s);
    PolicyTable& table = policy_.table(s);
    const auto mode_p = softmax(before.mode_logits, temp);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const double a = advantages[i];
      if (a == 0.0) continue;
      const auto& tr = traces[i];
      const std::size_t m = mode_slot(tr.mode);
      if (!tr.mode_forced) {
        for (std::size_t k = 0; k < 2; ++k) {
          table.mode_logits[k] += lr * a * ((k == m ? 1.0 : 0.0) - mode_p[k]) / temp;
        }
      }
      for (std::size_t t = 0; t < MetaActionSequence::kSteps; ++t) {
        const auto p = softmax(before.action_logits[m][t], temp);
        for (std::size_t c = 0; c < kCompositeActions; ++c) {
          table.action_logits[m][t][c] += lr * a * ((c == tr.intended[t] ? 1.0 : 0.0) - p[c]) / temp;
        }
      }
    }
  }

  SyntheticEnv env_;
  TrainingConfig config_;
  ToyPolicy policy_;
  Rng rng_;
  reward::WeightTable weights_;
};

/// Runs the cascaded schedule (e.g. FCM then AMS) from a fresh policy.
inline TrainingReport train_toy_policy(const SyntheticEnv& env, std::span<const StageSchedule> stages,
                                       const TrainingConfig& config) {
  ToyTrainer trainer(env, config);
  return trainer.run(stages);
}

}  // namespace hdk::toy
