#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/random.hpp"
#include "hdk/tool_call.hpp"
#include "hdk/transcript.hpp"

namespace hdk::pipeline {

struct OracleScores {
  double small_text_acc = 0.0;
  double big_text_acc = 0.0;
  double big_tool_acc = 0.0;
};

struct PipelineConfig {
  double text_threshold = 0.9;
  double tool_gain_threshold = 0.1;
  double judge_threshold = 0.8;
  int max_regenerations = 3;
  std::size_t max_tool_calls = 3;

  void validate() const {
    auto unit = [](double x) { return x > 0 && x < 1; };
    if (!unit(text_threshold) || !unit(tool_gain_threshold) || !unit(judge_threshold) || max_regenerations < 0) {
      throw Error(Errc::InvalidConfig, "pipeline thresholds must lie in (0,1) and max_regenerations >= 0");
    }
  }
};

enum class Partition { Text, Tool, Explore };

constexpr std::string_view to_string(Partition p) noexcept {
  switch (p) {
    case Partition::Text: return "d_text";
    case Partition::Tool: return "d_tool";
    case Partition::Explore: return "d_explore";
  }
  return "";
}

/// Routes a sample to the tool-unnecessary, tool-necessary or exploratory set.
inline Partition assess_necessity(const OracleScores& s, const PipelineConfig& config = {}) {
  for (double x : {s.small_text_acc, s.big_text_acc, s.big_tool_acc}) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error(Errc::SchemaError, "oracle accuracies must lie in [0,1]");
  }
  if (s.small_text_acc > config.text_threshold) return Partition::Text;
  if (s.big_tool_acc - s.big_text_acc >= config.tool_gain_threshold) return Partition::Tool;
  return Partition::Explore;
}

struct Annotation {
  std::string scenario_id;
  Mode mode = Mode::Text;
  std::string transcript;
  std::optional<double> judge_score;
  int regenerations = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

using JudgeOracle = std::function<double(const Annotation&)>;
using RegenerateOracle = std::function<std::string(const Annotation&)>;

struct JudgeOutcome {
  std::optional<Annotation> accepted;  // empty when rejected
  std::vector<double> scores;          // one entry per judge call

  std::size_t judge_calls() const noexcept { return scores.size(); }
};

/// Score, and regenerate below threshold, at most max_regenerations times.
/// A regenerated transcript replaces the previous candidate.
inline JudgeOutcome filter_by_judge(Annotation annotation, const JudgeOracle& judge, const RegenerateOracle& regenerate,
                                    const PipelineConfig& config = {}) {
  JudgeOutcome out;
  auto trail = [&] {
    std::string s = " (scores so far:";
    for (double x : out.scores) s += " " + std::to_string(x);
    return s + ", regenerations " + std::to_string(annotation.regenerations) + ")";
  };
  while (true) {
    double score;
    try {
      score = judge(annotation);
    } catch (const std::exception& e) {
      throw Error(Errc::OracleFailure, std::string("judge failed: ") + e.what() + trail());
    }
    if (!(score >= 0.0 && score <= 1.0)) {
      throw Error(Errc::OracleFailure, "judge score " + std::to_string(score) + " outside [0,1]" + trail());
    }
    out.scores.push_back(score);
    annotation.judge_score = score;
    if (score >= config.judge_threshold) {
      out.accepted = std::move(annotation);
      return out;
    }
    if (annotation.regenerations >= config.max_regenerations) return out;
    try {
      annotation.transcript = regenerate(annotation);
    } catch (const std::exception& e) {
      throw Error(Errc::OracleFailure, std::string("regeneration failed: ") + e.what() + trail());
    }
    ++annotation.regenerations;
    annotation.judge_score.reset();
  }
}

enum class RejectReason { Unparseable, TooManyCalls, EmptyToolMode };

constexpr std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::Unparseable: return "Unparseable";
    case RejectReason::TooManyCalls: return "TooManyCalls";
    case RejectReason::EmptyToolMode: return "EmptyToolMode";
  }
  return "";
}

struct CleanOutcome {
  std::optional<Annotation> cleaned;
  std::optional<RejectReason> reason;
  std::string detail;
};

namespace detail {

struct Edit {
  protocol::Span span;
  std::string replacement;
};

inline std::string apply_edits(std::string text, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.span.begin > b.span.begin; });
  for (const auto& e : edits) text.replace(e.span.begin, e.span.end - e.span.begin, e.replacement);
  return text;
}

// Violations that the cleaning rules repair rather than reject.
inline bool repairable(protocol::ViolationKind k) {
  using protocol::ViolationKind;
  return k == ViolationKind::MissingMetaActions || k == ViolationKind::UnparseableMetaActions ||
         k == ViolationKind::TooManyToolCalls;
}

}  // namespace detail

/// Rule-based cleaning: canonical tags, answer rewritten to the label,
/// consecutive duplicate tool calls dropped, then call-count checks.
inline CleanOutcome clean_annotation(const Annotation& annotation, const MetaActionSequence& gt,
                                     const PipelineConfig& config = {}) {
  auto reject = [](RejectReason r, std::string d) { return CleanOutcome{std::nullopt, r, std::move(d)}; };

  protocol::Transcript tr;
  try {
    tr = protocol::parse_transcript(annotation.transcript, {.max_tool_calls = SIZE_MAX});
  } catch (const Error& e) {
    return reject(RejectReason::Unparseable, e.what());
  }
  for (const auto& v : tr.violations) {
    if (!detail::repairable(v.kind)) {
      return reject(RejectReason::Unparseable, std::string(to_string(v.kind)) + ": " + v.detail);
    }
  }
  if (!tr.meta_content && !tr.meta_tag_spans.empty()) {
    return reject(RejectReason::Unparseable, "meta-actions block is not terminated");
  }
  if (tr.mode != annotation.mode) {
    return reject(RejectReason::Unparseable, "transcript mode does not match the annotation mode");
  }

  std::vector<detail::Edit> edits;
  for (const auto& span : tr.mode_tag_spans) {
    const std::string_view label(tr.source.data() + span.begin, span.end - span.begin);
    const Mode m = (label == "think_tool" || label == "think_with_tools") ? Mode::Tool : Mode::Text;
    edits.push_back({span, std::string(protocol::detail::canonical_mode_tag(m))});
  }
  for (const auto& span : tr.meta_tag_spans) edits.push_back({span, std::string(protocol::detail::kMetaActionsTag)});

  const std::string gt_text = format_meta_action_sequence(gt);
  if (tr.meta_content) {
    if (tr.prediction != gt) edits.push_back({*tr.meta_content, gt_text});
  } else {
    const std::size_t end = tr.source.size();
    edits.push_back({{end, end}, "\n<" + std::string(protocol::detail::kMetaActionsTag) + ">" + gt_text + "</" +
                                     std::string(protocol::detail::kMetaActionsTag) + ">"});
  }

  std::size_t kept = 0;
  const protocol::ToolCall* previous = nullptr;
  for (const auto& located : tr.tool_calls) {
    if (previous && located.call && *located.call == *previous) {
      edits.push_back({located.span, ""});
      continue;
    }
    previous = located.call ? &*located.call : nullptr;
    ++kept;
  }
  if (kept > config.max_tool_calls) {
    return reject(RejectReason::TooManyCalls,
                  std::to_string(kept) + " calls exceed the limit of " + std::to_string(config.max_tool_calls));
  }
  if (tr.mode == Mode::Tool && kept == 0) return reject(RejectReason::EmptyToolMode, "tool-mode annotation has no calls");

  Annotation out = annotation;
  out.transcript = detail::apply_edits(tr.source, std::move(edits));
  return {std::move(out), std::nullopt, {}};
}

struct BalancedDataset {
  std::vector<Annotation> records;
  std::map<std::string, std::size_t> tool_usage;  // tool slug -> call count
  std::vector<std::string> warnings;
};

/// Draws n_per_side records from each pool with a seeded uniform sample and
/// shuffles the union. Reports per-tool call counts and warns when one tool
/// takes more than half of all calls.
inline BalancedDataset balance_dataset(const std::vector<Annotation>& d_text, const std::vector<Annotation>& d_tool,
                                       std::size_t n_per_side, std::uint64_t seed) {
  if (d_text.size() < n_per_side) throw Error(Errc::InsufficientData, "d_text has " + std::to_string(d_text.size()));
  if (d_tool.size() < n_per_side) throw Error(Errc::InsufficientData, "d_tool has " + std::to_string(d_tool.size()));
  Rng rng(seed);
  auto draw = [&](const std::vector<Annotation>& pool, std::vector<Annotation>& out) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    for (std::size_t i = 0; i < n_per_side; ++i) out.push_back(pool[idx[i]]);
  };
  BalancedDataset out;
  draw(d_text, out.records);
  draw(d_tool, out.records);
  rng.shuffle(out.records);

  std::size_t total_calls = 0;
  for (const auto& a : out.records) {
    try {
      for (const auto& c : protocol::parse_transcript(a.transcript).tool_calls) {
        if (!c.call) continue;
        ++out.tool_usage[std::string(protocol::slug(c.call->tool()))];
        ++total_calls;
      }
    } catch (const Error&) {
      // Unparseable records carry no calls to count.
    }
  }
  for (const auto& [tool, n] : out.tool_usage) {
    if (2 * n > total_calls) {
      out.warnings.push_back("tool '" + tool + "' accounts for " + std::to_string(n) + " of " +
                             std::to_string(total_calls) + " calls");
    }
  }
  return out;
}

}  // namespace hdk::pipeline
