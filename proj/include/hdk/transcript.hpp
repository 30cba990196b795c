#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/tool_call.hpp"

namespace hdk::protocol {

enum class Section { Description, Reasoning, Prediction };
inline constexpr std::array<Section, 3> kAllSections = {Section::Description, Section::Reasoning,
                                                        Section::Prediction};

constexpr std::string_view to_string(Section s) noexcept {
  switch (s) {
    case Section::Description: return "description";
    case Section::Reasoning: return "reasoning";
    case Section::Prediction: return "prediction";
  }
  return "";
}

enum class ViolationKind {
  MissingModeTag,
  DuplicateModeTag,
  ModeTagMismatch,
  MissingSection,
  DuplicateSection,
  SectionOutOfOrder,
  BadNesting,
  IncorrectModeUsage,
  MalformedToolCall,
  MissingMetaActions,
  DuplicateMetaActions,
  UnparseableMetaActions,
  TooManyToolCalls,
  ToolBudgetExceeded,
};

constexpr std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::MissingModeTag: return "MissingModeTag";
    case ViolationKind::DuplicateModeTag: return "DuplicateModeTag";
    case ViolationKind::ModeTagMismatch: return "ModeTagMismatch";
    case ViolationKind::MissingSection: return "MissingSection";
    case ViolationKind::DuplicateSection: return "DuplicateSection";
    case ViolationKind::SectionOutOfOrder: return "SectionOutOfOrder";
    case ViolationKind::BadNesting: return "BadNesting";
    case ViolationKind::IncorrectModeUsage: return "IncorrectModeUsage";
    case ViolationKind::MalformedToolCall: return "MalformedToolCall";
    case ViolationKind::MissingMetaActions: return "MissingMetaActions";
    case ViolationKind::DuplicateMetaActions: return "DuplicateMetaActions";
    case ViolationKind::UnparseableMetaActions: return "UnparseableMetaActions";
    case ViolationKind::TooManyToolCalls: return "TooManyToolCalls";
    case ViolationKind::ToolBudgetExceeded: return "ToolBudgetExceeded";
  }
  return "";
}

struct FormatViolation {
  ViolationKind kind;
  std::string detail;
};

// Half-open byte range into Transcript::source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct LocatedToolCall {
  std::optional<ToolCall> call;  // empty when the block failed to parse
  std::optional<Section> section;
  std::string raw;
  std::string error;
  Span span;
};

struct Transcript {
  Mode mode = Mode::Text;
  bool mode_tag_present = false;
  std::array<std::optional<std::string>, 3> sections;
  std::vector<LocatedToolCall> tool_calls;
  std::optional<MetaActionSequence> prediction;
  std::vector<FormatViolation> violations;

  std::string source;
  std::vector<Span> mode_tag_spans;     // name part of every mode open/close tag
  std::vector<Span> meta_tag_spans;     // name part of every meta-actions open/close tag
  std::optional<Span> meta_content;     // content of the first meta-actions block

  const std::optional<std::string>& section(Section s) const { return sections[static_cast<std::size_t>(s)]; }
  bool valid() const noexcept { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const auto& v) { return v.kind == k; });
  }
  std::size_t n_tool_calls() const noexcept { return tool_calls.size(); }
};

struct ParseOptions {
  std::size_t max_tool_calls = 3;
};

namespace detail {

enum class TagKind { Mode, Section, ToolCall, MetaActions };

struct TagName {
  std::string_view name;
  TagKind kind;
  Mode mode = Mode::Text;                 // TagKind::Mode
  Section section = Section::Description;  // TagKind::Section
};

// Canonical spellings first; the prompt-template spellings are aliases.
inline constexpr std::array<TagName, 10> kTags = {{
    {"think_text", TagKind::Mode, Mode::Text},
    {"think_tool", TagKind::Mode, Mode::Tool},
    {"think_no_tools", TagKind::Mode, Mode::Text},
    {"think_with_tools", TagKind::Mode, Mode::Tool},
    {"description", TagKind::Section, Mode::Text, Section::Description},
    {"reasoning", TagKind::Section, Mode::Text, Section::Reasoning},
    {"prediction", TagKind::Section, Mode::Text, Section::Prediction},
    {"tool_call", TagKind::ToolCall},
    {"meta actions", TagKind::MetaActions},
    {"meta_actions", TagKind::MetaActions},
}};

inline constexpr std::string_view kMetaActionsTag = "meta actions";

constexpr std::string_view canonical_mode_tag(Mode m) noexcept { return m == Mode::Text ? "think_text" : "think_tool"; }

struct Tag {
  const TagName* name;
  bool closing;
  Span whole;  // from '<' to '>' inclusive
  Span label;  // tag name only
};

// Recognizes a known tag starting at `pos` (which must point at '<').
inline std::optional<Tag> match_tag(std::string_view text, std::size_t pos) {
  std::size_t p = pos + 1;
  bool closing = false;
  if (p < text.size() && text[p] == '/') {
    closing = true;
    ++p;
  }
  for (const auto& t : kTags) {
    if (text.compare(p, t.name.size(), t.name) == 0 && p + t.name.size() < text.size() &&
        text[p + t.name.size()] == '>') {
      return Tag{&t, closing, {pos, p + t.name.size() + 1}, {p, p + t.name.size()}};
    }
  }
  return std::nullopt;
}

inline std::optional<Tag> find_closing(std::string_view text, std::size_t from, TagKind kind) {
  for (auto pos = text.find('<', from); pos != std::string_view::npos; pos = text.find('<', pos + 1)) {
    auto tag = match_tag(text, pos);
    if (tag && tag->closing && tag->name->kind == kind) return tag;
  }
  return std::nullopt;
}

}  // namespace detail

/// Lenient transcript parser. Structural defects become FormatViolations;
/// only text with neither a mode tag nor a meta-actions block is rejected.
inline Transcript parse_transcript(std::string_view text, const ParseOptions& options = {}) {
  using detail::TagKind;
  Transcript tr;
  tr.source = std::string(text);
  auto violate = [&](ViolationKind k, std::string d) { tr.violations.push_back({k, std::move(d)}); };

  std::optional<Mode> mode_open;
  bool mode_seen = false;
  bool mode_closed = false;
  std::optional<std::pair<Section, std::size_t>> open_section;  // section + content start
  int last_section = -1;
  bool meta_seen = false;
  std::vector<std::size_t> pending_mode_usage;

  std::size_t pos = text.find('<');
  while (pos != std::string_view::npos) {
    auto tag = detail::match_tag(text, pos);
    if (!tag) {
      pos = text.find('<', pos + 1);
      continue;
    }
    const auto& name = *tag->name;
    std::size_t next = tag->whole.end;

    switch (name.kind) {
      case TagKind::Mode:
        tr.mode_tag_spans.push_back(tag->label);
        if (!tag->closing) {
          if (mode_seen) {
            violate(ViolationKind::DuplicateModeTag, std::string(name.name));
          } else {
            tr.mode = name.mode;
            tr.mode_tag_present = true;
          }
          if (open_section) violate(ViolationKind::BadNesting, "mode tag inside a section");
          mode_seen = true;
          mode_open = name.mode;
        } else {
          if (!mode_open) {
            violate(ViolationKind::BadNesting, "closing mode tag without an open mode block");
          } else if (mode_open != name.mode) {
            violate(ViolationKind::ModeTagMismatch, "mode block closed with </" + std::string(name.name) + ">");
          }
          if (open_section) {
            violate(ViolationKind::BadNesting,
                    "section <" + std::string(to_string(open_section->first)) + "> not closed");
            open_section.reset();
          }
          mode_open.reset();
          mode_closed = true;
        }
        break;

      case TagKind::Section: {
        const auto idx = static_cast<int>(name.section);
        if (!tag->closing) {
          if (!mode_open) violate(ViolationKind::BadNesting, "section outside the mode block");
          if (open_section) {
            violate(ViolationKind::BadNesting, "section <" + std::string(name.name) + "> opened inside <" +
                                                   std::string(to_string(open_section->first)) + ">");
          }
          if (tr.sections[idx]) {
            violate(ViolationKind::DuplicateSection, std::string(name.name));
          } else if (idx < last_section) {
            violate(ViolationKind::SectionOutOfOrder, std::string(name.name));
          }
          last_section = std::max(last_section, idx);
          open_section = {name.section, tag->whole.end};
        } else {
          if (!open_section || open_section->first != name.section) {
            violate(ViolationKind::BadNesting, "unexpected </" + std::string(name.name) + ">");
          } else {
            if (!tr.sections[idx]) {
              const auto content = text.substr(open_section->second, tag->whole.begin - open_section->second);
              tr.sections[idx] = std::string(hdk::detail::trim(content));
            }
            open_section.reset();
          }
        }
        break;
      }

      case TagKind::ToolCall: {
        if (tag->closing) {
          violate(ViolationKind::BadNesting, "stray </tool_call>");
          break;
        }
        auto close = detail::find_closing(text, tag->whole.end, TagKind::ToolCall);
        if (!close) {
          violate(ViolationKind::MalformedToolCall, "unterminated <tool_call>");
          break;
        }
        LocatedToolCall located;
        located.span = {tag->whole.begin, close->whole.end};
        located.raw = std::string(text.substr(located.span.begin, located.span.end - located.span.begin));
        if (open_section) located.section = open_section->first;
        try {
          located.call = parse_tool_call(located.raw);
        } catch (const Error& e) {
          located.error = e.what();
          violate(ViolationKind::MalformedToolCall, e.what());
        }
        if (!open_section) violate(ViolationKind::BadNesting, "tool call outside a reasoning section");
        pending_mode_usage.push_back(tr.tool_calls.size());
        tr.tool_calls.push_back(std::move(located));
        next = close->whole.end;
        break;
      }

      case TagKind::MetaActions: {
        tr.meta_tag_spans.push_back(tag->label);
        if (tag->closing) {
          violate(ViolationKind::BadNesting, "stray closing meta-actions tag");
          break;
        }
        auto close = detail::find_closing(text, tag->whole.end, TagKind::MetaActions);
        if (!close) {
          violate(ViolationKind::UnparseableMetaActions, "unterminated meta-actions block");
          if (!meta_seen) meta_seen = true;
          break;
        }
        tr.meta_tag_spans.push_back(close->label);
        if (mode_open) violate(ViolationKind::BadNesting, "meta-actions block inside the mode block");
        if (meta_seen) {
          violate(ViolationKind::DuplicateMetaActions, "more than one meta-actions block");
        } else {
          tr.meta_content = Span{tag->whole.end, close->whole.begin};
          try {
            tr.prediction =
                parse_meta_action_sequence(text.substr(tag->whole.end, close->whole.begin - tag->whole.end));
          } catch (const Error& e) {
            violate(ViolationKind::UnparseableMetaActions, e.what());
          }
        }
        meta_seen = true;
        next = close->whole.end;
        break;
      }
    }
    pos = text.find('<', next);
  }

  if (!mode_seen && !meta_seen) {
    throw Error(Errc::TotalGarbage, "no mode tag and no meta-actions block");
  }
  if (!mode_seen) {
    tr.mode = tr.tool_calls.empty() ? Mode::Text : Mode::Tool;
    violate(ViolationKind::MissingModeTag, "no think_text/think_tool tag");
  } else if (!mode_closed || mode_open) {
    violate(ViolationKind::BadNesting, "mode block is not closed");
  }
  if (open_section) violate(ViolationKind::BadNesting, "section <" + std::string(to_string(open_section->first)) + "> not closed");
  if (tr.mode == Mode::Text) {
    for (std::size_t i = 0; i < pending_mode_usage.size(); ++i) {
      violate(ViolationKind::IncorrectModeUsage, "tool call in text mode");
    }
  }
  for (Section s : kAllSections) {
    if (!tr.section(s)) violate(ViolationKind::MissingSection, std::string(to_string(s)));
  }
  if (!meta_seen) violate(ViolationKind::MissingMetaActions, "no meta-actions block");
  if (tr.tool_calls.size() > options.max_tool_calls) {
    violate(ViolationKind::TooManyToolCalls, std::to_string(tr.tool_calls.size()) + " calls exceed the limit of " +
                                                 std::to_string(options.max_tool_calls));
  }
  return tr;
}

/// Like parse_transcript, but never throws on garbage: unrecognizable output
/// becomes a transcript with no prediction and the two fatal violations, so
/// every rollout can still be scored.
inline Transcript parse_for_scoring(std::string_view text, const ParseOptions& options = {},
                                    Mode fallback_mode = Mode::Text) {
  try {
    return parse_transcript(text, options);
  } catch (const Error& e) {
    if (e.code() != Errc::TotalGarbage) throw;
  }
  Transcript tr;
  tr.source = std::string(text);
  tr.mode = fallback_mode;
  tr.violations.push_back({ViolationKind::MissingModeTag, "unrecognizable output"});
  tr.violations.push_back({ViolationKind::MissingMetaActions, "unrecognizable output"});
  return tr;
}

/// Parts needed to render a well-formed transcript with canonical tags.
struct TranscriptDraft {
  Mode mode = Mode::Text;
  std::array<std::string, 3> sections;
  std::vector<std::pair<Section, ToolCall>> tool_calls;  // appended to their section's text
  MetaActionSequence actions;
};

inline std::string render_transcript(const TranscriptDraft& draft) {
  const std::string_view mode_tag = detail::canonical_mode_tag(draft.mode);
  std::string out = "<";
  out += mode_tag;
  out += ">\n";
  for (Section s : kAllSections) {
    const auto name = to_string(s);
    out += "<";
    out += name;
    out += ">";
    out += draft.sections[static_cast<std::size_t>(s)];
    for (const auto& [where, call] : draft.tool_calls) {
      if (where != s) continue;
      out += "\n";
      out += format_tool_call(call);
      out += "\n";
    }
    out += "</";
    out += name;
    out += ">\n";
  }
  out += "</";
  out += mode_tag;
  out += ">\n<";
  out += detail::kMetaActionsTag;
  out += ">";
  out += format_meta_action_sequence(draft.actions);
  out += "</";
  out += detail::kMetaActionsTag;
  out += ">";
  return out;
}

}  // namespace hdk::protocol
