#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/group.hpp"
#include "hdk/transcript.hpp"

namespace hdk::grpo {

inline constexpr double kAdvantageEpsilon = 1e-8;

// Rewards closer than this (relative to their magnitude) count as equal.
// Equal rewards reached along different arithmetic paths can differ in the
// last bits, e.g. 0.375 and 0.37499999999999994.
inline constexpr double kRewardTieTolerance = 1e-12;

/// Group-relative advantages (r - mean) / (std + eps) with the population
/// standard deviation. A group whose rewards are all equal gets zeros.
inline std::vector<double> compute_advantages(std::span<const double> rewards, double epsilon = kAdvantageEpsilon) {
  if (rewards.empty()) throw Error(Errc::EmptyGroup, "cannot normalize an empty group");
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  std::vector<double> out(rewards.size(), 0.0);
  const double scale = std::max({1.0, std::abs(*lo), std::abs(*hi)});
  if (*hi - *lo <= kRewardTieTolerance * scale) return out;

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

/// Source of policy rollouts. `forced_mode` pins the leading mode token;
/// the returned text is the full transcript.
class RolloutSampler {
 public:
  virtual ~RolloutSampler() = default;
  virtual std::string sample(const Scenario& query, std::optional<Mode> forced_mode) = 0;
};

struct GroupOptions {
  protocol::ParseOptions parse;
};

/// FCM: G/2 rollouts forced to text then G/2 forced to tool. AMS: G free
/// rollouts. All G are kept together for normalization.
inline ResponseGroup build_group(RolloutSampler& sampler, const Scenario& query, std::size_t group_size, Stage stage,
                                 const GroupOptions& options = {}) {
  if (group_size < 2) throw Error(Errc::InvalidConfig, "group size must be at least 2");
  if (stage == Stage::FCM && group_size % 2 != 0) {
    throw Error(Errc::OddGroupSize, "FCM needs an even group size, got " + std::to_string(group_size));
  }
  ResponseGroup group;
  group.query_id = query.id;
  group.stage = stage;
  group.trajectories.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    std::optional<Mode> forced;
    if (stage == Stage::FCM) forced = i < group_size / 2 ? Mode::Text : Mode::Tool;
    std::string text;
    try {
      text = sampler.sample(query, forced);
    } catch (const std::exception& e) {
      throw Error(Errc::SamplerFailure, "rollout " + std::to_string(i) + " for '" + query.id + "': " + e.what());
    }
    auto transcript = protocol::parse_for_scoring(text, options.parse, forced.value_or(Mode::Text));
    group.trajectories.push_back(ScoredTrajectory::from_transcript(std::move(transcript), forced));
  }
  group.validate();
  return group;
}

/// Normalizes the group's total rewards into advantages.
inline void assign_advantages(ResponseGroup& group, double epsilon = kAdvantageEpsilon) {
  std::vector<double> rewards;
  rewards.reserve(group.size());
  for (const auto& t : group.trajectories) rewards.push_back(t.r_total);
  group.advantages = compute_advantages(rewards, epsilon);
}

}  // namespace hdk::grpo
