#pragma once

// Independent oracles and fixture builders shared by the unit tests and the
// acceptance binary. Nothing here calls into the code under test except for
// plain types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/labeler.hpp"
#include "hdk/random.hpp"
#include "hdk/session.hpp"
#include "hdk/tool_call.hpp"

namespace hdk::fixtures {

// ---------------------------------------------------------------------------
// Edit-script enumeration

// Every script that turns pred into gt: at each point either delete the next
// prediction token, insert the next ground-truth token, or align the two.
// Returns the minimum total cost over all scripts (no memoization).
template <typename Token>
double brute_force_edit_distance(const std::vector<Token>& pred, const std::vector<Token>& gt,
                                 const std::function<double(Token, std::size_t)>& weight, double c_del = 0.6,
                                 double c_ins = 0.6) {
  std::function<double(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    if (i == pred.size() && j == gt.size()) return acc;
    double best = std::numeric_limits<double>::infinity();
    if (i < pred.size()) best = std::min(best, walk(i + 1, j, acc + c_del));
    if (j < gt.size()) best = std::min(best, walk(i, j + 1, acc + c_ins));
    if (i < pred.size() && j < gt.size()) {
      double cost = 1.0;
      if (pred[i] == gt[j]) cost = std::max(0.0, 1.0 - weight(gt[j], j + 1));
      best = std::min(best, walk(i + 1, j + 1, acc + cost));
    }
    return best;
  };
  return walk(0, 0, 0.0);
}

// All sequences over `vocab` with length in [min_len, max_len].
template <typename Token, std::size_t N>
std::vector<std::vector<Token>> all_sequences(const std::array<Token, N>& vocab, std::size_t min_len,
                                              std::size_t max_len) {
  std::vector<std::vector<Token>> out;
  std::vector<Token> cur;
  std::function<void()> grow = [&] {
    if (cur.size() >= min_len) out.push_back(cur);
    if (cur.size() == max_len) return;
    for (Token t : vocab) {
      cur.push_back(t);
      grow();
      cur.pop_back();
    }
  };
  grow();
  return out;
}

// ---------------------------------------------------------------------------
// Weight oracle: the three steps written out long-hand for one row.

template <std::size_t N>
std::array<double, N> scripted_clipped_row(const std::array<double, N>& counts, double gamma = 0.5, double w_min = 0.7,
                                           double w_max = 1.3, double eps = 1e-6) {
  double sum = 0.0;
  for (double c : counts) sum = sum + c;
  const double mean = sum / static_cast<double>(N);
  std::array<double, N> clipped{};
  for (std::size_t k = 0; k < N; ++k) {
    double raw = std::pow((mean + eps) / (counts[k] + eps), gamma);
    if (raw < w_min) raw = w_min;
    if (raw > w_max) raw = w_max;
    clipped[k] = raw;
  }
  return clipped;
}

template <std::size_t N>
std::array<double, N> scripted_weight_row(const std::array<double, N>& counts, double gamma = 0.5, double w_min = 0.7,
                                          double w_max = 1.3, double eps = 1e-6) {
  const auto clipped = scripted_clipped_row(counts, gamma, w_min, w_max, eps);
  double clipped_sum = 0.0;
  for (double w : clipped) clipped_sum = clipped_sum + w;
  std::array<double, N> out{};
  for (std::size_t k = 0; k < N; ++k) out[k] = clipped[k] / (clipped_sum / static_cast<double>(N));
  return out;
}

// ---------------------------------------------------------------------------
// Analytic motion and the labeling rule oracle

struct MotionSegment {
  double duration = 0.0;
  double accel = 0.0;       // m/s^2
  double yaw_rate_deg = 0.0;  // deg/s, positive = counter-clockwise (left)
};

struct MotionState {
  double t = 0.0, x = 0.0, y = 0.0, heading_deg = 0.0, v = 0.0, distance = 0.0;
};

// Fine-step integration of piecewise constant acceleration / yaw rate. Speed
// is clamped at zero and the heading only changes while the vehicle moves.
class MotionProfile {
 public:
  static constexpr double kDt = 1e-3;
  static constexpr int kSubsteps = 100;  // samples every 0.1 s

  MotionProfile(double v0, std::vector<MotionSegment> segments) : segments_(std::move(segments)) {
    MotionState s;
    s.v = v0;
    states_.push_back(s);
    double total = 0.0;
    for (const auto& seg : segments_) total += seg.duration;
    const auto n = static_cast<long>(std::llround(total / kDt));
    for (long k = 0; k < n; ++k) {
      const double t_mid = (static_cast<double>(k) + 0.5) * kDt;
      const auto& seg = segment_at(t_mid);
      MotionState next = s;
      next.t = static_cast<double>(k + 1) * kDt;
      next.v = std::max(0.0, s.v + seg.accel * kDt);
      const double v_mid = 0.5 * (s.v + next.v);
      if (v_mid > 0) next.heading_deg = s.heading_deg + seg.yaw_rate_deg * kDt;
      const double h_mid = 0.5 * (s.heading_deg + next.heading_deg) * std::numbers::pi / 180.0;
      next.x = s.x + v_mid * std::cos(h_mid) * kDt;
      next.y = s.y + v_mid * std::sin(h_mid) * kDt;
      next.distance = s.distance + v_mid * kDt;
      states_.push_back(next);
      s = next;
    }
  }

  double duration() const { return states_.back().t; }

  // State at a time on the 1 ms grid.
  const MotionState& at(double t) const {
    const auto k = static_cast<std::size_t>(std::llround(t / kDt));
    return states_.at(std::min(k, states_.size() - 1));
  }

  // Samples every 0.1 s. Timestamps are k / 10 exactly.
  std::vector<labeler::TrajectoryPoint> sample(bool with_speed) const {
    std::vector<labeler::TrajectoryPoint> out;
    for (std::size_t k = 0; k < states_.size(); k += kSubsteps) {
      const auto& s = states_[k];
      labeler::TrajectoryPoint p{static_cast<double>(k / kSubsteps) / 10.0, s.x, s.y, std::nullopt};
      if (with_speed) p.v = s.v;
      out.push_back(p);
    }
    return out;
  }

  double min_speed(double lo, double hi) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : states_) {
      if (s.t >= lo - 1e-9 && s.t <= hi + 1e-9) m = std::min(m, s.v);
    }
    return m;
  }

 private:
  const MotionSegment& segment_at(double t) const {
    double start = 0.0;
    for (const auto& seg : segments_) {
      if (t < start + seg.duration) return seg;
      start += seg.duration;
    }
    return segments_.back();
  }

  std::vector<MotionSegment> segments_;
  std::vector<MotionState> states_;
};

struct RuleInputs {
  double mean_speed = 0.0;
  double accel = 0.0;
  double heading_change_deg = 0.0;
  double min_speed = 0.0;
};

inline RuleInputs exact_window(const MotionProfile& m, double lo, double hi) {
  const auto& a = m.at(lo);
  const auto& b = m.at(hi);
  RuleInputs r;
  r.mean_speed = (b.distance - a.distance) / (hi - lo);
  r.accel = (b.v - a.v) / (hi - lo);
  r.heading_change_deg = b.heading_deg - a.heading_deg;
  r.min_speed = m.min_speed(lo, hi);
  return r;
}

// The labeling rules applied directly to exact window quantities.
inline MetaAction rule_oracle(const RuleInputs& r, double stop = 0.5, double accel = 0.3, double turn = 15.0) {
  if (r.mean_speed < stop) return {Velocity::Stop, Trajectory::Straight};
  Velocity v = Velocity::KeepSpeed;
  if (r.accel > accel) v = Velocity::Accelerate;
  if (r.accel < -accel) v = Velocity::Decelerate;
  Trajectory j = Trajectory::Straight;
  if (r.heading_change_deg > turn) j = Trajectory::LeftTurn;
  if (r.heading_change_deg < -turn) j = Trajectory::RightTurn;
  return {v, j};
}

// A window is decidable when every quantity sits clear of its threshold, so
// sampling error cannot flip the rule outcome.
inline bool decidable(const RuleInputs& r) {
  if (r.mean_speed < 0.4) return true;
  if (r.mean_speed <= 0.6 || r.min_speed < 1.0) return false;
  if (std::abs(std::abs(r.accel) - 0.3) < 0.1) return false;
  if (std::abs(std::abs(r.heading_change_deg) - 15.0) < 5.0) return false;
  return true;
}

enum class MotionFamily { ConstantSpeed, ConstantAccel, ConstantYaw, Piecewise };

struct LabelCase {
  MotionFamily family;
  std::vector<labeler::TrajectoryPoint> points;
  double t0 = 1.0;
  MetaActionSequence expected;
};

inline constexpr double kCaseDuration = 10.0;

// Draws one candidate of the family. Returns nullopt when a window falls
// inside a threshold margin.
inline std::optional<LabelCase> draw_label_case(MotionFamily family, Rng& rng) {
  std::vector<MotionSegment> segs;
  double v0 = 0.0;
  switch (family) {
    case MotionFamily::ConstantSpeed:
      v0 = rng.uniform() < 0.15 ? 0.0 : 1.0 + 14.0 * rng.uniform();
      segs.push_back({kCaseDuration, 0.0, 0.0});
      break;
    case MotionFamily::ConstantAccel: {
      const double a = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.05 + 1.5 * rng.uniform());
      v0 = a > 0 ? 1.0 + 5.0 * rng.uniform() : 16.0 + 4.0 * rng.uniform();
      segs.push_back({kCaseDuration, a, 0.0});
      break;
    }
    case MotionFamily::ConstantYaw:
      v0 = 2.0 + 10.0 * rng.uniform();
      segs.push_back({kCaseDuration, 0.0, -25.0 + 50.0 * rng.uniform()});
      break;
    case MotionFamily::Piecewise: {
      v0 = 3.0 + 10.0 * rng.uniform();
      double used = 0.0;
      while (used < kCaseDuration) {
        const double d = std::min(kCaseDuration - used, 1.0 + 3.0 * rng.uniform());
        const double a = rng.uniform() < 0.3 ? 0.0 : -1.5 + 3.0 * rng.uniform();
        const double w = rng.uniform() < 0.4 ? 0.0 : -20.0 + 40.0 * rng.uniform();
        segs.push_back({d, a, w});
        used += d;
      }
      break;
    }
  }
  MotionProfile profile(v0, segs);
  LabelCase c{family, profile.sample(rng.uniform() < 0.5), 1.0, {}};
  for (int k = 0; k < 4; ++k) {
    const double center = c.t0 + 2.0 * k;
    const auto r = exact_window(profile, center - 1.0, center + 2.0);
    if (!decidable(r)) return std::nullopt;
    c.expected.actions.push_back(rule_oracle(r));
  }
  return c;
}

// ---------------------------------------------------------------------------
// The four tool-call listings, byte for byte. RoI uses a concrete bbox since
// the listing shows placeholders.

inline const std::array<std::string, 4>& listing_blocks() {
  static const std::array<std::string, 4> blocks = {
      "<tool_call>\n"
      "    <tool_name>Retrieve View</tool_name>\n"
      "    <params>{\"frame_index\": \"-1s\", \"view_index\": \"front_left\"}</params>\n"
      "</tool_call>",
      "<tool_call>\n"
      "    <tool_name>RoI Inspection</tool_name>\n"
      "    <params>{\"view_index\": \"front_left\", \"bbox\": [120, 80, 640, 400], \"description\": \"the traffic "
      "lights\"}</params>\n"
      "</tool_call>",
      "<tool_call>\n"
      "    <tool_name>Depth Estimation</tool_name>\n"
      "    <params>{\"view_index\": \"front\"}</params>\n"
      "</tool_call>",
      "<tool_call>\n"
      "    <tool_name>3D Object Detection</tool_name>\n"
      "    <params>{\"view_index\": \"front\", \"object_text\": \"barrier\"}</params>\n"
      "</tool_call>",
  };
  return blocks;
}

// ---------------------------------------------------------------------------
// Transcript builders

inline std::string meta_block(const std::string& list) { return "<meta actions>" + list + "</meta actions>"; }

inline std::string text_transcript(const std::string& actions, const std::string& tag = "think_text") {
  return "<" + tag + ">\n<description>Clear road ahead.</description>\n<reasoning>No hazards.</reasoning>\n"
         "<prediction>Maintain speed.</prediction>\n</" + tag + ">\n" + meta_block(actions);
}

inline std::string tool_transcript(const std::vector<std::string>& calls, const std::string& actions,
                                   const std::string& tag = "think_tool") {
  std::string body;
  for (const auto& c : calls) body += "\n" + c + "\n";
  return "<" + tag + ">\n<description>Occluded junction.</description>\n<reasoning>Checking the scene." + body +
         "</reasoning>\n<prediction>Slow down.</prediction>\n</" + tag + ">\n" + meta_block(actions);
}

inline MetaActionSequence seq(std::initializer_list<MetaAction> actions) { return MetaActionSequence{actions}; }

inline MetaActionSequence random_sequence(Rng& rng, std::size_t len) {
  MetaActionSequence s;
  for (std::size_t i = 0; i < len; ++i) s.actions.push_back(composite_from_index(rng.below(kCompositeActions)));
  return s;
}

// ---------------------------------------------------------------------------
// Frozen joint-match table. Row = predicted composite index, column = ground
// truth, index = speed * 3 + trajectory.

inline constexpr std::array<std::array<double, 12>, 12> kFrozenJointTable = {{
    {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0},
    {0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0},
    {0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0},
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0},
}};

// ---------------------------------------------------------------------------
// Exhaustive session traces

enum class OutputKind { Thought, GoodCall, FailingCall, MalformedCall, TwoCalls, Answer, CallAndAnswer };
inline constexpr std::array<OutputKind, 7> kOutputKinds = {
    OutputKind::Thought, OutputKind::GoodCall,      OutputKind::FailingCall,  OutputKind::MalformedCall,
    OutputKind::TwoCalls, OutputKind::Answer,       OutputKind::CallAndAnswer};

inline const std::string& failing_call_block() {
  static const std::string block =
      "<tool_call>\n    <tool_name>Retrieve View</tool_name>\n"
      "    <params>{\"frame_index\": \"-3s\", \"view_index\": \"back\"}</params>\n</tool_call>";
  return block;
}

inline std::string agent_output(OutputKind kind) {
  const std::string answer = meta_block("['Stop, Straight']");
  const std::string& good = listing_blocks()[0];
  switch (kind) {
    case OutputKind::Thought: return "<think_tool><description>Looking.</description>";
    case OutputKind::GoodCall: return "<reasoning>Check the left.\n" + good;
    case OutputKind::FailingCall: return "<reasoning>Check behind.\n" + failing_call_block();
    case OutputKind::MalformedCall: return "<tool_call><tool_name>Depth Estimation</tool_name><params>{oops</params></tool_call>";
    case OutputKind::TwoCalls: return good + "\n" + failing_call_block();
    case OutputKind::Answer: return "</reasoning></think_tool>" + answer;
    case OutputKind::CallAndAnswer: return good + "</reasoning></think_tool>" + answer;
  }
  return {};
}

// Tool calls per output kind, each flagged as executable against the trace
// memory pool.
inline std::vector<bool> calls_in(OutputKind kind) {
  switch (kind) {
    case OutputKind::GoodCall: return {true};
    case OutputKind::FailingCall: return {false};
    case OutputKind::MalformedCall: return {false};
    case OutputKind::TwoCalls: return {true, false};
    case OutputKind::CallAndAnswer: return {true};
    default: return {};
  }
}

inline bool answers(OutputKind kind) { return kind == OutputKind::Answer || kind == OutputKind::CallAndAnswer; }

struct TraceReport {
  std::size_t traces = 0;
  int max_executed = 0;
  std::string failure;  // empty when every trace satisfied the model
};

class NullAssets final : public protocol::ToolExecutor {
 public:
  protocol::ImageRef execute(const protocol::ToolCall& call, const protocol::MemoryPool& pool) override {
    return protocol::execute_mock_tool(call, pool, {});
  }
};

// Walks every sequence of outputs of length <= max_len from each initial
// budget in [0, 3], checking the session against an explicit model: budget
// accounting, executed <= initial budget <= 3, history length, and
// state monotonicity.
inline TraceReport enumerate_session_traces(std::size_t max_len = 6) {
  using protocol::Session;
  using protocol::SessionState;
  TraceReport report;
  protocol::MemoryPool pool;
  pool.put(protocol::FrameIndex{1}, protocol::View::FrontLeft, {"mem/-1s/front_left.jpg", std::nullopt});
  NullAssets executor;

  struct Model {
    int budget = 0;
    int executed = 0;
    std::size_t steps = 0;
    std::size_t images = 0;
    std::size_t errors = 0;
    SessionState state = SessionState::Active;
  };

  std::vector<OutputKind> path;
  std::function<void(const Session&, const Model&)> walk = [&](const Session& s, const Model& m) {
    if (!report.failure.empty()) return;
    ++report.traces;
    report.max_executed = std::max(report.max_executed, s.executed_calls());
    auto fail = [&](const std::string& what) {
      std::string trace;
      for (auto k : path) trace += std::to_string(static_cast<int>(k)) + " ";
      report.failure = what + " after trace [ " + trace + "]";
    };
    std::size_t images = 0, errors = 0;
    for (const auto& seg : s.history()) {
      images += seg.kind == protocol::Segment::Kind::Image;
      errors += seg.kind == protocol::Segment::Kind::ToolError;
    }
    if (s.executed_calls() > 3) return fail("more than 3 executed calls");
    if (s.budget_remaining() < 0) return fail("negative budget");
    if (s.budget_remaining() != m.budget || s.executed_calls() != m.executed) return fail("budget accounting");
    if (s.history().size() != 1 + m.steps + images + errors) return fail("history length");
    if (images != m.images || errors != m.errors) return fail("segment kinds");
    if (s.state() != m.state) return fail("state");
    if (m.state != SessionState::Active) {
      try {
        Session copy = s;
        copy.step("anything", executor);
        return fail("terminated session accepted a step");
      } catch (const Error& e) {
        if (e.code() != Errc::SessionTerminated) return fail("wrong error on terminated step");
      }
      return;
    }
    if (path.size() == max_len) return;
    for (OutputKind kind : kOutputKinds) {
      Model next = m;
      ++next.steps;
      const bool exhausted = next.budget == 0;
      for (bool ok : calls_in(kind)) {
        if (next.budget == 0) continue;
        --next.budget;
        ++next.executed;
        ++(ok ? next.images : next.errors);
      }
      if (answers(kind)) {
        next.state = SessionState::TerminatedAnswer;
      } else if (exhausted) {
        next.state = SessionState::TerminatedBudget;
      }
      Session copy = s;
      copy.step(agent_output(kind), executor);
      path.push_back(kind);
      walk(copy, next);
      path.pop_back();
    }
  };

  for (int budget = 0; budget <= Session::kDefaultBudget; ++budget) {
    Model m;
    m.budget = budget;
    walk(Session("scene context", protocol::ImageRef{"front.jpg", std::nullopt}, pool, budget), m);
  }
  return report;
}

}  // namespace hdk::fixtures
