#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/group.hpp"
#include "hdk/transcript.hpp"

namespace hdk::reward {

struct WeightParams {
  double gamma = 0.5;
  double w_min = 0.7;
  double w_max = 1.3;
  double epsilon = 1e-6;
};

template <std::size_t N>
using WeightRows = std::vector<std::array<double, N>>;

/// Position-action weights w[t][c] for the speed (4 classes) and trajectory
/// (3 classes) components. Positions past the last row reuse the last row.
struct WeightTable {
  WeightRows<4> speed;
  WeightRows<3> traj;
  WeightParams params;

  static WeightTable uniform(std::size_t steps = MetaActionSequence::kSteps) {
    WeightTable t;
    t.speed.assign(steps, {1.0, 1.0, 1.0, 1.0});
    t.traj.assign(steps, {1.0, 1.0, 1.0});
    return t;
  }

  // `position` is the 1-based ground-truth index.
  double weight(Velocity v, std::size_t position) const { return lookup(speed, position)[index_of(v)]; }
  double weight(Trajectory j, std::size_t position) const { return lookup(traj, position)[index_of(j)]; }

 private:
  template <std::size_t N>
  static const std::array<double, N>& lookup(const WeightRows<N>& rows, std::size_t position) {
    if (rows.empty() || position == 0) {
      throw Error(Errc::WeightLookupOutOfRange, "no weights for position " + std::to_string(position));
    }
    return rows[std::min(position, rows.size()) - 1];
  }
};

/// Raw inverse-frequency weights ((mean+eps)/(f+eps))^gamma, clipped to
/// [w_min, w_max], then rescaled so each row averages exactly one.
template <std::size_t N>
WeightRows<N> component_weights(std::span<const std::array<double, N>> counts, const WeightParams& params) {
  if (counts.empty()) throw Error(Errc::EmptyFrequencyTable, "no timesteps in frequency table");
  WeightRows<N> out;
  out.reserve(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    double total = 0.0;
    for (double f : counts[t]) {
      if (f < 0 || !std::isfinite(f)) throw Error(Errc::NegativeCount, "negative or non-finite count at step " + std::to_string(t + 1));
      total += f;
    }
    if (!(total > 0)) throw Error(Errc::EmptyFrequencyTable, "timestep " + std::to_string(t + 1) + " has no counts");
    const double mean = total / N;
    std::array<double, N> w{};
    double clipped_sum = 0.0;
    for (std::size_t c = 0; c < N; ++c) {
      const double raw = std::pow((mean + params.epsilon) / (counts[t][c] + params.epsilon), params.gamma);
      w[c] = std::clamp(raw, params.w_min, params.w_max);
      clipped_sum += w[c];
    }
    const double clipped_mean = clipped_sum / N;
    for (auto& x : w) x /= clipped_mean;
    out.push_back(w);
  }
  return out;
}

struct ActionFrequencies {
  WeightRows<4> speed;
  WeightRows<3> traj;
};

/// Per-timestep class counts over a set of ground-truth sequences.
inline ActionFrequencies count_action_frequencies(std::span<const MetaActionSequence> sequences,
                                                  std::size_t steps = MetaActionSequence::kSteps) {
  ActionFrequencies f;
  f.speed.assign(steps, {});
  f.traj.assign(steps, {});
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < std::min(steps, seq.size()); ++t) {
      f.speed[t][index_of(seq[t].speed)] += 1.0;
      f.traj[t][index_of(seq[t].traj)] += 1.0;
    }
  }
  return f;
}

inline WeightTable compute_action_weights(const ActionFrequencies& freq, const WeightParams& params = {}) {
  WeightTable table;
  table.params = params;
  table.speed = component_weights<4>(freq.speed, params);
  table.traj = component_weights<3>(freq.traj, params);
  return table;
}

struct LevenshteinCosts {
  double c_del = 0.6;
  double c_ins = 0.6;
};

/// Weighted edit distance. Substituting pred[i] for gt[j] costs
/// 1 - [match] * w(gt[j], j), floored at zero so an over-weighted match
/// never earns negative cost. `weight(token, j)` takes a 1-based position.
template <typename Token, typename WeightFn>
double weighted_levenshtein(std::span<const Token> pred, std::span<const Token> gt, WeightFn&& weight,
                            const LevenshteinCosts& costs = {}) {
  const std::size_t m = pred.size();
  const std::size_t n = gt.size();
  std::vector<double> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<double>(j) * costs.c_ins;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<double>(i) * costs.c_del;
    for (std::size_t j = 1; j <= n; ++j) {
      const double match = pred[i - 1] == gt[j - 1] ? weight(gt[j - 1], j) : 0.0;
      const double sub = std::max(0.0, 1.0 - match);
      cur[j] = std::min({prev[j] + costs.c_del, cur[j - 1] + costs.c_ins, prev[j - 1] + sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

/// clamp(1 - D / max(m, n), 0, 1).
template <typename Token, typename WeightFn>
double sequence_similarity(std::span<const Token> pred, std::span<const Token> gt, WeightFn&& weight,
                           const LevenshteinCosts& costs = {}) {
  if (gt.empty()) throw Error(Errc::EmptySequence, "ground truth must be non-empty");
  const double d = weighted_levenshtein(pred, gt, std::forward<WeightFn>(weight), costs);
  const double longest = static_cast<double>(std::max(pred.size(), gt.size()));
  return std::clamp(1.0 - d / longest, 0.0, 1.0);
}

struct RewardConfig {
  double lambda_speed = 0.7;
  double lambda_traj = 0.3;
  double tool_cost = 0.01;
  double tool_clip_lo = -0.2;
  double tool_clip_hi = 0.2;
  double fmt_penalty = 0.5;
  double fmt_reward = 0.0;
  LevenshteinCosts costs;

  void validate() const {
    if (std::abs(lambda_speed + lambda_traj - 1.0) > 1e-12 || !(tool_clip_lo < tool_clip_hi) ||
        !(costs.c_del > 0) || !(costs.c_ins > 0)) {
      throw Error(Errc::InvalidConfig, "reward config: lambdas must sum to 1, clip lo < hi, edit costs > 0");
    }
  }
};

struct AccuracyBreakdown {
  double r_speed = 0.0;
  double r_traj = 0.0;
  double r_acc = 0.0;
};

inline AccuracyBreakdown accuracy_breakdown(const std::optional<MetaActionSequence>& pred,
                                            const MetaActionSequence& gt, const WeightTable& weights,
                                            const RewardConfig& config = {}) {
  if (!pred) return {};
  const auto ps = pred->speeds();
  const auto gs = gt.speeds();
  const auto pj = pred->trajectories();
  const auto gj = gt.trajectories();
  auto w = [&weights](auto token, std::size_t pos) { return weights.weight(token, pos); };
  AccuracyBreakdown b;
  b.r_speed = sequence_similarity<Velocity>(ps, gs, w, config.costs);
  b.r_traj = sequence_similarity<Trajectory>(pj, gj, w, config.costs);
  b.r_acc = config.lambda_speed * b.r_speed + config.lambda_traj * b.r_traj;
  return b;
}

/// lambda_s * R_speed + lambda_j * R_traj; an unparseable prediction scores 0.
inline double accuracy_reward(const std::optional<MetaActionSequence>& pred, const MetaActionSequence& gt,
                              const WeightTable& weights, const RewardConfig& config = {}) {
  return accuracy_breakdown(pred, gt, weights, config).r_acc;
}

/// Penalty-only: fmt_reward when clean, fmt_reward - fmt_penalty if any violation.
inline double format_reward(const protocol::Transcript& transcript, const RewardConfig& config = {}) {
  return transcript.valid() ? config.fmt_reward : config.fmt_reward - config.fmt_penalty;
}

/// Contrastive tool reward. Baseline is the mean R_acc of the group's text
/// rollouts; with no text rollout every entry is zero.
inline std::vector<double> tool_reward(const ResponseGroup& group, const RewardConfig& config = {}) {
  std::vector<double> out(group.size(), 0.0);
  double baseline = 0.0;
  std::size_t n_text = 0;
  for (const auto& t : group.trajectories) {
    if (t.mode == Mode::Text) {
      baseline += t.r_acc;
      ++n_text;
    }
  }
  if (n_text == 0) return out;
  baseline /= static_cast<double>(n_text);
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& t = group.trajectories[i];
    if (t.mode != Mode::Tool) continue;
    const double raw = (t.r_acc - baseline) - static_cast<double>(t.n_tool_calls) * config.tool_cost;
    out[i] = std::clamp(raw, config.tool_clip_lo, config.tool_clip_hi);
  }
  return out;
}

/// FCM: R_acc + R_fmt. AMS adds R_tool for tool-mode rollouts.
inline double total_reward(const ScoredTrajectory& t, Stage stage) {
  double r = t.r_acc + t.r_fmt;
  if (stage == Stage::AMS && t.mode == Mode::Tool) r += t.r_tool;
  return r;
}

/// Fills every reward component of every trajectory in the group.
inline void score_group(ResponseGroup& group, const MetaActionSequence& gt, const WeightTable& weights,
                        const RewardConfig& config = {}) {
  for (auto& t : group.trajectories) {
    t.r_acc = accuracy_reward(t.prediction, gt, weights, config);
    t.r_fmt = format_reward(t.transcript, config);
  }
  const auto tool = tool_reward(group, config);
  for (std::size_t i = 0; i < group.size(); ++i) {
    auto& t = group.trajectories[i];
    t.r_tool = tool[i];
    t.r_total = total_reward(t, group.stage);
  }
}

}  // namespace hdk::reward
