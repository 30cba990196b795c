#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdk/error.hpp"
#include "hdk/tool_call.hpp"
#include "hdk/transcript.hpp"

namespace hdk::protocol {

struct CropRect {
  std::int64_t x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

// Opaque reference to an image; pixels are never decoded here.
struct ImageRef {
  std::string uri;
  std::optional<CropRect> crop;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

/// Cache of every camera view over the last five seconds at 1 Hz.
class MemoryPool {
 public:
  void put(FrameIndex frame, View view, ImageRef ref) { images_[{frame.seconds_ago, view}] = std::move(ref); }

  std::optional<ImageRef> get(FrameIndex frame, View view) const {
    auto it = images_.find({frame.seconds_ago, view});
    if (it == images_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return images_.size(); }

  // Manifest layout: {"-1s": {"front": "path", ...}, "0s": {...}}.
  static MemoryPool from_json(const nlohmann::json& manifest) {
    if (!manifest.is_object()) throw Error(Errc::SchemaError, "memory pool manifest must be an object");
    MemoryPool pool;
    for (auto it = manifest.begin(); it != manifest.end(); ++it) {
      auto frame = FrameIndex::parse(it.key());
      if (!frame) throw Error(Errc::SchemaError, "bad frame key '" + it.key() + "'");
      if (!it.value().is_object()) throw Error(Errc::SchemaError, "frame entry must map views to paths");
      for (auto v = it.value().begin(); v != it.value().end(); ++v) {
        auto view = view_from_string(v.key());
        if (!view || !v.value().is_string()) throw Error(Errc::SchemaError, "bad view entry '" + v.key() + "'");
        pool.put(*frame, *view, ImageRef{v.value().get<std::string>(), std::nullopt});
      }
    }
    return pool;
  }

 private:
  std::map<std::pair<int, View>, ImageRef> images_;
};

// Registered response for one (tool, view). RoI fixtures record the
// dimensions of the high-resolution source image.
struct Fixture {
  ImageRef image;
  std::int64_t width = 0;
  std::int64_t height = 0;
};

class FixtureStore {
 public:
  void add(Tool tool, View view, Fixture fixture) { fixtures_[{tool, view}] = std::move(fixture); }

  const Fixture* find(Tool tool, View view) const {
    auto it = fixtures_.find({tool, view});
    return it == fixtures_.end() ? nullptr : &it->second;
  }

  /// Loads every `<tool>__<view>.json` file in `dir`; each holds
  /// {"uri": ..., "width": ..., "height": ...} (dimensions optional).
  static FixtureStore load_directory(const std::filesystem::path& dir) {
    FixtureStore store;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
      if (entry.path().extension() != ".json") continue;
      const std::string stem = entry.path().stem().string();
      const auto sep = stem.find("__");
      if (sep == std::string::npos) continue;
      std::optional<Tool> tool = tool_from_name(stem.substr(0, sep));
      std::optional<View> view = view_from_string(stem.substr(sep + 2));
      if (!tool || !view) continue;
      std::ifstream in(entry.path());
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, entry.path().string() + ": " + e.what());
      }
      Fixture f;
      f.image.uri = doc.value("uri", entry.path().string());
      f.width = doc.value("width", std::int64_t{0});
      f.height = doc.value("height", std::int64_t{0});
      store.add(*tool, *view, std::move(f));
    }
    if (ec) throw Error(Errc::IoError, "cannot read fixture directory " + dir.string());
    return store;
  }

 private:
  std::map<std::pair<Tool, View>, Fixture> fixtures_;
};

/// Executes a validated call against fixtures. Retrieve View reads the memory
/// pool; RoI Inspection returns the high-resolution fixture with a crop box.
inline ImageRef execute_mock_tool(const ToolCall& call, const MemoryPool& pool, const FixtureStore& assets) {
  switch (call.tool()) {
    case Tool::RetrieveView: {
      const auto& p = std::get<RetrieveViewParams>(call.params);
      auto ref = pool.get(p.frame, p.view);
      if (!ref) throw Error(Errc::FrameUnavailable, p.frame.str() + "/" + std::string(to_string(p.view)));
      return *ref;
    }
    case Tool::RoiInspection: {
      const auto& p = std::get<RoiInspectionParams>(call.params);
      const Fixture* f = assets.find(Tool::RoiInspection, p.view);
      if (!f) throw Error(Errc::FixtureMissing, "roi_inspection__" + std::string(to_string(p.view)));
      if (p.bbox.x_max > f->width || p.bbox.y_max > f->height) {
        throw Error(Errc::CropOutOfBounds, "bbox exceeds " + std::to_string(f->width) + "x" + std::to_string(f->height));
      }
      ImageRef ref = f->image;
      ref.crop = CropRect{p.bbox.x_min, p.bbox.y_min, p.bbox.x_max - p.bbox.x_min, p.bbox.y_max - p.bbox.y_min};
      return ref;
    }
    case Tool::DepthEstimation:
    case Tool::ObjectDetection3D: {
      const Fixture* f = assets.find(call.tool(), call.view());
      if (!f) {
        throw Error(Errc::FixtureMissing, std::string(slug(call.tool())) + "__" + std::string(to_string(call.view())));
      }
      return f->image;
    }
  }
  throw Error(Errc::UnknownTool, "unhandled tool");
}

class ToolExecutor {
 public:
  virtual ~ToolExecutor() = default;
  // Throws hdk::Error on failure.
  virtual ImageRef execute(const ToolCall& call, const MemoryPool& pool) = 0;
};

class MockToolExecutor final : public ToolExecutor {
 public:
  explicit MockToolExecutor(FixtureStore assets) : assets_(std::move(assets)) {}
  ImageRef execute(const ToolCall& call, const MemoryPool& pool) override {
    return execute_mock_tool(call, pool, assets_);
  }

 private:
  FixtureStore assets_;
};

enum class SessionState { Active, TerminatedAnswer, TerminatedBudget };

constexpr std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::Active: return "active";
    case SessionState::TerminatedAnswer: return "terminated_answer";
    case SessionState::TerminatedBudget: return "terminated_budget";
  }
  return "";
}

struct Segment {
  enum class Kind { Context, Text, Image, ToolError };
  Kind kind = Kind::Text;
  std::string text;
  std::optional<ImageRef> image;
};

/// Multi-turn interaction state. History is append-only: the initial context,
/// then each decoder output followed by the image (or error text) produced by
/// any tool call it issued.
class Session {
 public:
  static constexpr int kDefaultBudget = 3;

  explicit Session(std::string initial_context, std::optional<ImageRef> initial_image = std::nullopt,
                   MemoryPool pool = {}, int budget = kDefaultBudget)
      : budget_remaining_(budget), memory_pool_(std::move(pool)) {
    if (budget < 0) throw Error(Errc::InvalidConfig, "tool budget must be non-negative");
    history_.push_back({Segment::Kind::Context, std::move(initial_context), std::move(initial_image)});
  }

  const std::vector<Segment>& history() const noexcept { return history_; }
  int budget_remaining() const noexcept { return budget_remaining_; }
  int executed_calls() const noexcept { return executed_calls_; }
  SessionState state() const noexcept { return state_; }
  const MemoryPool& memory_pool() const noexcept { return memory_pool_; }
  const std::vector<FormatViolation>& violations() const noexcept { return violations_; }
  const std::optional<MetaActionSequence>& answer() const noexcept { return answer_; }

  void step(std::string_view output, ToolExecutor& executor) {
    if (state_ != SessionState::Active) {
      throw Error(Errc::SessionTerminated, std::string("session is ") + std::string(to_string(state_)));
    }
    const bool exhausted_at_start = budget_remaining_ == 0;
    history_.push_back({Segment::Kind::Text, std::string(output), std::nullopt});

    bool answered = false;
    for (auto pos = output.find('<'); pos != std::string_view::npos; pos = output.find('<', pos + 1)) {
      auto tag = detail::match_tag(output, pos);
      if (!tag || tag->closing) continue;
      const auto kind = tag->name->kind;
      if (kind == detail::TagKind::ToolCall) {
        auto close = detail::find_closing(output, tag->whole.end, detail::TagKind::ToolCall);
        const auto end = close ? close->whole.end : output.size();
        run_tool_call(output.substr(tag->whole.begin, end - tag->whole.begin), close.has_value(), executor);
        pos = end - 1;
      } else if (kind == detail::TagKind::MetaActions) {
        auto close = detail::find_closing(output, tag->whole.end, detail::TagKind::MetaActions);
        if (!close) continue;
        answered = true;
        try {
          answer_ = parse_meta_action_sequence(output.substr(tag->whole.end, close->whole.begin - tag->whole.end));
        } catch (const Error& e) {
          violations_.push_back({ViolationKind::UnparseableMetaActions, e.what()});
        }
        pos = close->whole.end - 1;
      }
    }

    if (answered) {
      state_ = SessionState::TerminatedAnswer;
    } else if (exhausted_at_start) {
      state_ = SessionState::TerminatedBudget;
    }
  }

 private:
  void run_tool_call(std::string_view block, bool terminated, ToolExecutor& executor) {
    if (budget_remaining_ == 0) {
      violations_.push_back({ViolationKind::ToolBudgetExceeded, "tool call issued with no budget left"});
      return;
    }
    --budget_remaining_;
    ++executed_calls_;
    try {
      if (!terminated) throw Error(Errc::MalformedParams, "unterminated <tool_call>");
      const ToolCall call = parse_tool_call(block);
      history_.push_back({Segment::Kind::Image, {}, executor.execute(call, memory_pool_)});
    } catch (const Error& e) {
      if (e.code() == Errc::MalformedParams || e.code() == Errc::UnknownTool || e.code() == Errc::MissingParam ||
          e.code() == Errc::BadEnumValue || e.code() == Errc::BadBBox) {
        violations_.push_back({ViolationKind::MalformedToolCall, e.what()});
      }
      history_.push_back({Segment::Kind::ToolError, std::string("tool error: ") + e.what(), std::nullopt});
    }
  }

  std::vector<Segment> history_;
  int budget_remaining_;
  int executed_calls_ = 0;
  MemoryPool memory_pool_;
  SessionState state_ = SessionState::Active;
  std::vector<FormatViolation> violations_;
  std::optional<MetaActionSequence> answer_;
};

/// Value-semantics wrapper around Session::step.
inline Session step_session(Session session, std::string_view agent_output, ToolExecutor& executor) {
  session.step(agent_output, executor);
  return session;
}

}  // namespace hdk::protocol
