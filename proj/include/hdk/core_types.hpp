#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hdk/error.hpp"

namespace hdk {

// Declaration order is the safety order: Accelerate < KeepSpeed < Decelerate < Stop.
enum class Velocity { Accelerate, KeepSpeed, Decelerate, Stop };
enum class Trajectory { Straight, RightTurn, LeftTurn };

inline constexpr std::array<Velocity, 4> kAllVelocities = {
    Velocity::Accelerate, Velocity::KeepSpeed, Velocity::Decelerate, Velocity::Stop};
inline constexpr std::array<Trajectory, 3> kAllTrajectories = {
    Trajectory::Straight, Trajectory::RightTurn, Trajectory::LeftTurn};

// Reasoning mode selected by the leading mode token.
enum class Mode { Text, Tool };
// Cascaded RL stage: forced contrastive mode (FCM) or adaptive mode selection (AMS).
enum class Stage { FCM, AMS };

constexpr std::size_t index_of(Velocity v) noexcept { return static_cast<std::size_t>(v); }
constexpr std::size_t index_of(Trajectory j) noexcept { return static_cast<std::size_t>(j); }

constexpr std::string_view to_string(Velocity v) noexcept {
  switch (v) {
    case Velocity::Accelerate: return "Accelerate";
    case Velocity::KeepSpeed: return "Keep Speed";
    case Velocity::Decelerate: return "Decelerate";
    case Velocity::Stop: return "Stop";
  }
  return "";
}

constexpr std::string_view to_string(Trajectory j) noexcept {
  switch (j) {
    case Trajectory::Straight: return "Straight";
    case Trajectory::RightTurn: return "Right Turn";
    case Trajectory::LeftTurn: return "Left Turn";
  }
  return "";
}

constexpr std::string_view to_string(Mode m) noexcept { return m == Mode::Text ? "text" : "tool"; }
constexpr std::string_view to_string(Stage s) noexcept { return s == Stage::FCM ? "fcm" : "ams"; }

struct MetaAction {
  Velocity speed = Velocity::KeepSpeed;
  Trajectory traj = Trajectory::Straight;

  friend constexpr bool operator==(const MetaAction&, const MetaAction&) = default;
  friend constexpr auto operator<=>(const MetaAction&, const MetaAction&) = default;
};

inline constexpr std::size_t kCompositeActions = 12;

constexpr std::size_t composite_index(MetaAction a) noexcept {
  return index_of(a.speed) * kAllTrajectories.size() + index_of(a.traj);
}

constexpr MetaAction composite_from_index(std::size_t i) noexcept {
  return {kAllVelocities[i / kAllTrajectories.size()], kAllTrajectories[i % kAllTrajectories.size()]};
}

// A plan of meta-actions, one per 2 s step. Ground truth always has 4 steps;
// parsed predictions may hold 1..kMaxParsedActions.
struct MetaActionSequence {
  static constexpr double kHorizonSeconds = 8.0;
  static constexpr double kStepSeconds = 2.0;
  static constexpr std::size_t kSteps = 4;

  std::vector<MetaAction> actions;

  std::size_t size() const noexcept { return actions.size(); }
  bool empty() const noexcept { return actions.empty(); }
  const MetaAction& operator[](std::size_t i) const { return actions[i]; }

  std::vector<Velocity> speeds() const {
    std::vector<Velocity> out;
    out.reserve(actions.size());
    for (const auto& a : actions) out.push_back(a.speed);
    return out;
  }

  std::vector<Trajectory> trajectories() const {
    std::vector<Trajectory> out;
    out.reserve(actions.size());
    for (const auto& a : actions) out.push_back(a.traj);
    return out;
  }

  friend bool operator==(const MetaActionSequence&, const MetaActionSequence&) = default;
};

inline constexpr std::size_t kMaxParsedActions = 8;

enum class Complexity { Simple, Complex };

struct Scenario {
  std::string id;
  double speed_kmh = 0.0;
  std::string navigation;
  MetaActionSequence ground_truth;
  std::map<std::string, std::string> views;
  std::optional<Complexity> complexity_tag;
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Lower-cases and collapses internal whitespace runs to one space.
inline std::string normalize_words(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace detail

inline Velocity parse_velocity(std::string_view text) {
  const std::string word = detail::normalize_words(text);
  for (Velocity v : kAllVelocities) {
    if (word == detail::normalize_words(to_string(v))) return v;
  }
  throw Error(Errc::UnknownToken, "unknown speed token '" + std::string(text) + "'");
}

inline Trajectory parse_trajectory(std::string_view text) {
  const std::string word = detail::normalize_words(text);
  for (Trajectory j : kAllTrajectories) {
    if (word == detail::normalize_words(to_string(j))) return j;
  }
  throw Error(Errc::UnknownToken, "unknown trajectory token '" + std::string(text) + "'");
}

inline std::string to_string(const MetaAction& a) {
  std::string out(to_string(a.speed));
  out += ", ";
  out += to_string(a.traj);
  return out;
}

/// Parses "<speed>, <traj>" ignoring case and surrounding whitespace.
inline MetaAction parse_meta_action(std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
    throw Error(Errc::MalformedPair, "expected '<speed>, <trajectory>' but got '" + std::string(text) + "'");
  }
  const auto speed = detail::trim(text.substr(0, comma));
  const auto traj = detail::trim(text.substr(comma + 1));
  if (speed.empty() || traj.empty()) {
    throw Error(Errc::MalformedPair, "empty token in '" + std::string(text) + "'");
  }
  return {parse_velocity(speed), parse_trajectory(traj)};
}

/// Parses the bracketed quoted list found between the meta-actions delimiters,
/// e.g. "['Stop, Straight', 'Keep Speed, Left Turn']". Both quote styles are
/// accepted. Length is not checked against the 4-step horizon; at most
/// kMaxParsedActions elements are accepted.
inline MetaActionSequence parse_meta_action_sequence(std::string_view text) {
  std::string_view s = detail::trim(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw Error(Errc::MalformedList, "meta-action list must be enclosed in [ ]");
  }
  s = detail::trim(s.substr(1, s.size() - 2));
  if (s.empty()) throw Error(Errc::EmptyList, "meta-action list is empty");

  MetaActionSequence seq;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  };
  while (true) {
    skip_ws();
    if (pos >= s.size() || (s[pos] != '\'' && s[pos] != '"')) {
      throw Error(Errc::MalformedList, "expected a quoted element at offset " + std::to_string(pos));
    }
    const char quote = s[pos++];
    const auto close = s.find(quote, pos);
    if (close == std::string_view::npos) throw Error(Errc::MalformedList, "unterminated quoted element");
    if (seq.actions.size() == kMaxParsedActions) {
      throw Error(Errc::MalformedList, "more than " + std::to_string(kMaxParsedActions) + " actions");
    }
    seq.actions.push_back(parse_meta_action(s.substr(pos, close - pos)));
    pos = close + 1;
    skip_ws();
    if (pos == s.size()) break;
    if (s[pos] != ',') throw Error(Errc::MalformedList, "expected ',' between elements");
    ++pos;
  }
  return seq;
}

inline std::string format_meta_action_sequence(const MetaActionSequence& seq) {
  if (seq.empty()) throw Error(Errc::EmptySequence, "cannot format an empty sequence");
  std::string out = "[";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ", ";
    out += '\'';
    out += to_string(seq[i]);
    out += '\'';
  }
  out += ']';
  return out;
}

}  // namespace hdk
