#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"

namespace hdk::labeler {

// Planar sample of the ego trajectory. Frame is x-forward / y-left, so a
// positive (counter-clockwise) heading change is a left turn.
struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  std::optional<double> v;
};

struct LabelingConfig {
  double stop_speed_mps = 0.5;
  double accel_mps2 = 0.3;
  double turn_deg = 15.0;
  double history_s = 1.0;
  double future_s = 2.0;
  double step_s = 2.0;
  int steps = 4;
  // Shifts every window center; +1 reproduces the [0-2s), [2-4s), ... layout.
  double center_offset_s = 0.0;

  double window_s() const { return history_s + future_s; }

  void validate() const {
    if (!(stop_speed_mps > 0) || !(accel_mps2 > 0) || !(turn_deg > 0) || !(step_s > 0) ||
        !(history_s >= 0) || !(future_s >= 0) || !(window_s() > 0) || steps < 1) {
      throw Error(Errc::InvalidConfig, "labeling thresholds and window must be positive, steps >= 1");
    }
  }
};

// Time tolerance used for window membership and coverage checks.
inline constexpr double kTimeEps = 1e-6;

/// Window statistics used by the classification rules.
struct WindowStats {
  double mean_speed = 0.0;     // path length / duration
  double acceleration = 0.0;   // (v_last - v_first) / duration
  double heading_change_deg = 0.0;
};

inline void check_monotone(std::span<const TrajectoryPoint> points) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].t > points[i - 1].t)) {
      throw Error(Errc::NonMonotoneTime, "timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

/// Fills missing instantaneous speeds with the central finite difference of
/// position (one-sided at the ends).
inline std::vector<TrajectoryPoint> with_speeds(std::span<const TrajectoryPoint> points) {
  std::vector<TrajectoryPoint> out(points.begin(), points.end());
  const std::size_t n = out.size();
  if (n < 2) {
    for (auto& p : out) p.v = p.v.value_or(0.0);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].v) continue;
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == n ? n - 1 : i + 1;
    const double dist = std::hypot(points[b].x - points[a].x, points[b].y - points[a].y);
    out[i].v = dist / (points[b].t - points[a].t);
  }
  return out;
}

// Signed angle in degrees from u to w; zero if either vector is degenerate.
inline double signed_angle_deg(double ux, double uy, double wx, double wy) {
  if ((ux == 0.0 && uy == 0.0) || (wx == 0.0 && wy == 0.0)) return 0.0;
  return std::atan2(ux * wy - uy * wx, ux * wx + uy * wy) * 180.0 / std::numbers::pi;
}

inline WindowStats window_stats(std::span<const TrajectoryPoint> window) {
  if (window.size() < 3) {
    throw Error(Errc::TooFewPoints, "a window needs at least 3 points, got " + std::to_string(window.size()));
  }
  const auto filled = with_speeds(window);
  const auto& first = filled.front();
  const auto& last = filled.back();
  const double duration = last.t - first.t;
  if (!(duration > 0)) throw Error(Errc::NonMonotoneTime, "window has zero duration");

  double path = 0.0;
  for (std::size_t i = 1; i < filled.size(); ++i) {
    path += std::hypot(filled[i].x - filled[i - 1].x, filled[i].y - filled[i - 1].y);
  }
  const auto& second = filled[1];
  const auto& penultimate = filled[filled.size() - 2];

  WindowStats stats;
  stats.mean_speed = path / duration;
  stats.acceleration = (*last.v - *first.v) / duration;
  stats.heading_change_deg = signed_angle_deg(second.x - first.x, second.y - first.y,
                                              last.x - penultimate.x, last.y - penultimate.y);
  return stats;
}

/// Applies the threshold rules. Ties at a threshold resolve to the calmer
/// label; a Stop window is always Straight.
inline MetaAction classify_stats(const WindowStats& stats, const LabelingConfig& config) {
  MetaAction action;
  if (stats.mean_speed < config.stop_speed_mps) {
    return {Velocity::Stop, Trajectory::Straight};
  }
  if (stats.acceleration > config.accel_mps2) {
    action.speed = Velocity::Accelerate;
  } else if (stats.acceleration < -config.accel_mps2) {
    action.speed = Velocity::Decelerate;
  } else {
    action.speed = Velocity::KeepSpeed;
  }
  if (std::abs(stats.heading_change_deg) <= config.turn_deg) {
    action.traj = Trajectory::Straight;
  } else {
    action.traj = stats.heading_change_deg > 0 ? Trajectory::LeftTurn : Trajectory::RightTurn;
  }
  return action;
}

inline MetaAction classify_window(std::span<const TrajectoryPoint> window, const LabelingConfig& config = {}) {
  config.validate();
  check_monotone(window);
  return classify_stats(window_stats(window), config);
}

/// Labels `config.steps` consecutive windows centered at t0 + offset + k*step,
/// each spanning [center - history, center + future].
inline MetaActionSequence label_trajectory(std::span<const TrajectoryPoint> points, double t0,
                                           const LabelingConfig& config = {}) {
  config.validate();
  check_monotone(points);
  if (points.empty()) throw Error(Errc::InsufficientCoverage, "empty trajectory");
  const auto filled = with_speeds(points);

  MetaActionSequence seq;
  for (int k = 0; k < config.steps; ++k) {
    const double center = t0 + config.center_offset_s + k * config.step_s;
    const double lo = center - config.history_s;
    const double hi = center + config.future_s;
    if (filled.front().t > lo + kTimeEps || filled.back().t < hi - kTimeEps) {
      throw Error(Errc::InsufficientCoverage, "trajectory does not cover window " + std::to_string(k) + " [" +
                                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    std::vector<TrajectoryPoint> window;
    for (const auto& p : filled) {
      if (p.t >= lo - kTimeEps && p.t <= hi + kTimeEps) window.push_back(p);
    }
    if (window.size() < 3) {
      throw Error(Errc::InsufficientCoverage, "window " + std::to_string(k) + " holds fewer than 3 points");
    }
    seq.actions.push_back(classify_stats(window_stats(window), config));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Refinement response validation

struct RefinementResponse {
  int score = 0;
  std::string reason;
  std::vector<std::string> final_meta_actions;
};

struct RefinementRejection {
  Errc code;
  std::optional<std::size_t> index;
  std::string message;
};

struct RefinementOutcome {
  MetaActionSequence sequence;
  std::optional<RefinementRejection> rejection;

  bool accepted() const noexcept { return !rejection.has_value(); }
};

/// Returns the refined labels when the response keeps exactly four legal
/// actions and every original speed token; otherwise the original labels and
/// the reason for rejection.
inline RefinementOutcome validate_refinement(const RefinementResponse& response,
                                             const MetaActionSequence& original) {
  if (original.size() != MetaActionSequence::kSteps) {
    throw Error(Errc::WrongArity, "original sequence must have 4 actions");
  }
  auto reject = [&](Errc code, std::optional<std::size_t> index, std::string msg) {
    return RefinementOutcome{original, RefinementRejection{code, index, std::move(msg)}};
  };
  if (response.score < 0 || response.score > 10) {
    return reject(Errc::ScoreOutOfRange, std::nullopt, "score " + std::to_string(response.score) + " not in 0..10");
  }
  if (response.final_meta_actions.size() != MetaActionSequence::kSteps) {
    return reject(Errc::WrongArity, std::nullopt,
                  "expected 4 actions, got " + std::to_string(response.final_meta_actions.size()));
  }
  MetaActionSequence refined;
  for (std::size_t i = 0; i < response.final_meta_actions.size(); ++i) {
    try {
      refined.actions.push_back(parse_meta_action(response.final_meta_actions[i]));
    } catch (const Error& e) {
      return reject(Errc::IllegalLabel, i, e.detail());
    }
  }
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (refined[i].speed != original[i].speed) {
      return reject(Errc::SpeedMutated, i,
                    "step " + std::to_string(i + 1) + " changed speed from '" + std::string(to_string(original[i].speed)) +
                        "' to '" + std::string(to_string(refined[i].speed)) + "'");
    }
  }
  return {refined, std::nullopt};
}

}  // namespace hdk::labeler
