#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/transcript.hpp"

namespace hdk {

// One sampled rollout plus its reward breakdown.
struct ScoredTrajectory {
  Mode mode = Mode::Text;
  protocol::Transcript transcript;
  std::optional<MetaActionSequence> prediction;  // empty when the answer failed to parse
  std::size_t n_tool_calls = 0;
  double r_acc = 0.0;
  double r_fmt = 0.0;
  double r_tool = 0.0;
  double r_total = 0.0;

  /// Builds an unscored trajectory. `forced_mode` overrides the parsed mode
  /// tag (MP-GRPO forces the first token). Text-mode calls do not count
  /// toward n_tool_calls; they surface as format violations instead.
  static ScoredTrajectory from_transcript(protocol::Transcript transcript,
                                          std::optional<Mode> forced_mode = std::nullopt) {
    ScoredTrajectory t;
    t.mode = forced_mode.value_or(transcript.mode);
    t.prediction = transcript.prediction;
    t.n_tool_calls = t.mode == Mode::Tool ? transcript.n_tool_calls() : 0;
    t.transcript = std::move(transcript);
    return t;
  }
};

// G rollouts for one query, normalized together.
struct ResponseGroup {
  std::string query_id;
  Stage stage = Stage::AMS;
  std::vector<ScoredTrajectory> trajectories;
  std::vector<double> advantages;

  std::size_t size() const noexcept { return trajectories.size(); }

  std::size_t count(Mode m) const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.mode == m;
    return n;
  }

  /// FCM groups must split exactly half text, half tool.
  void validate() const {
    if (trajectories.empty()) throw Error(Errc::EmptyGroup, "group '" + query_id + "' is empty");
    if (stage == Stage::FCM) {
      if (trajectories.size() % 2 != 0) {
        throw Error(Errc::OddGroupSize, "FCM group '" + query_id + "' has odd size " + std::to_string(size()));
      }
      if (count(Mode::Text) != size() / 2) {
        throw Error(Errc::QuotaViolation, "FCM group '" + query_id + "' needs " + std::to_string(size() / 2) +
                                              " text and " + std::to_string(size() / 2) + " tool rollouts");
      }
    }
  }
};

}  // namespace hdk
