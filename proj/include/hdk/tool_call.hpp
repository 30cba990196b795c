#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"

namespace hdk::protocol {

enum class Tool { RetrieveView, RoiInspection, DepthEstimation, ObjectDetection3D };
enum class View { Front, FrontLeft, FrontRight, Back, BackLeft, BackRight };

inline constexpr std::array<Tool, 4> kAllTools = {Tool::RetrieveView, Tool::RoiInspection, Tool::DepthEstimation,
                                                  Tool::ObjectDetection3D};
inline constexpr std::array<View, 6> kAllViews = {View::Front, View::FrontLeft, View::FrontRight,
                                                  View::Back,  View::BackLeft,  View::BackRight};

// Name used inside <tool_name>.
constexpr std::string_view display_name(Tool t) noexcept {
  switch (t) {
    case Tool::RetrieveView: return "Retrieve View";
    case Tool::RoiInspection: return "RoI Inspection";
    case Tool::DepthEstimation: return "Depth Estimation";
    case Tool::ObjectDetection3D: return "3D Object Detection";
  }
  return "";
}

// Identifier used for fixture file names and JSON output.
constexpr std::string_view slug(Tool t) noexcept {
  switch (t) {
    case Tool::RetrieveView: return "retrieve_view";
    case Tool::RoiInspection: return "roi_inspection";
    case Tool::DepthEstimation: return "depth_estimation";
    case Tool::ObjectDetection3D: return "object_detection_3d";
  }
  return "";
}

constexpr std::string_view to_string(View v) noexcept {
  switch (v) {
    case View::Front: return "front";
    case View::FrontLeft: return "front_left";
    case View::FrontRight: return "front_right";
    case View::Back: return "back";
    case View::BackLeft: return "back_left";
    case View::BackRight: return "back_right";
  }
  return "";
}

inline std::optional<View> view_from_string(std::string_view s) {
  for (View v : kAllViews) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline std::optional<Tool> tool_from_name(std::string_view s) {
  const std::string norm = detail::normalize_words(s);
  for (Tool t : kAllTools) {
    if (detail::normalize_words(display_name(t)) == norm || slug(t) == norm) return t;
  }
  return std::nullopt;
}

// Memory-pool frame: "0s" is the current frame, "-Ns" is N seconds ago (N <= 5).
struct FrameIndex {
  static constexpr int kMaxSecondsAgo = 5;
  int seconds_ago = 0;

  std::string str() const { return seconds_ago == 0 ? "0s" : "-" + std::to_string(seconds_ago) + "s"; }

  static std::optional<FrameIndex> parse(std::string_view s) {
    if (s == "0s") return FrameIndex{0};
    if (s.size() == 3 && s[0] == '-' && s[2] == 's' && s[1] >= '1' && s[1] <= '0' + kMaxSecondsAgo) {
      return FrameIndex{s[1] - '0'};
    }
    return std::nullopt;
  }

  friend auto operator<=>(const FrameIndex&, const FrameIndex&) = default;
};

struct BBox {
  std::int64_t x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct RetrieveViewParams {
  FrameIndex frame;
  View view = View::Front;
  friend bool operator==(const RetrieveViewParams&, const RetrieveViewParams&) = default;
};
struct RoiInspectionParams {
  View view = View::Front;
  BBox bbox;
  std::string description;
  friend bool operator==(const RoiInspectionParams&, const RoiInspectionParams&) = default;
};
struct DepthEstimationParams {
  View view = View::Front;
  friend bool operator==(const DepthEstimationParams&, const DepthEstimationParams&) = default;
};
struct ObjectDetection3DParams {
  View view = View::Front;
  std::string object_text;
  friend bool operator==(const ObjectDetection3DParams&, const ObjectDetection3DParams&) = default;
};

struct ToolCall {
  std::variant<RetrieveViewParams, RoiInspectionParams, DepthEstimationParams, ObjectDetection3DParams> params;

  Tool tool() const noexcept { return static_cast<Tool>(params.index()); }
  View view() const noexcept {
    return std::visit([](const auto& p) { return p.view; }, params);
  }

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

namespace detail {

inline std::optional<std::string_view> inner_tag(std::string_view text, std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  const auto b = text.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  const auto e = text.find(close, b + open.size());
  if (e == std::string_view::npos) return std::nullopt;
  return text.substr(b + open.size(), e - b - open.size());
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::MissingParam, key);
  return *it;
}

inline View require_view(const nlohmann::json& obj) {
  const auto& v = require(obj, "view_index");
  if (!v.is_string()) throw Error(Errc::BadEnumValue, "view_index");
  auto view = view_from_string(v.get<std::string>());
  if (!view) throw Error(Errc::BadEnumValue, "view_index");
  return *view;
}

inline std::string require_string(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) throw Error(Errc::MalformedParams, std::string(key) + " must be a string");
  return v.get<std::string>();
}

inline BBox require_bbox(const nlohmann::json& obj) {
  const auto& v = require(obj, "bbox");
  if (!v.is_array() || v.size() != 4) throw Error(Errc::BadBBox, "bbox must be [x_min, y_min, x_max, y_max]");
  std::array<std::int64_t, 4> c{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number_integer()) throw Error(Errc::BadBBox, "bbox coordinates must be integers");
    c[i] = v[i].get<std::int64_t>();
  }
  BBox box{c[0], c[1], c[2], c[3]};
  if (box.x_min < 0 || box.y_min < 0 || box.x_min >= box.x_max || box.y_min >= box.y_max) {
    throw Error(Errc::BadBBox, "bbox requires 0 <= x_min < x_max and 0 <= y_min < y_max");
  }
  return box;
}

// Values may only be strings or integer arrays.
inline void check_params_shape(const nlohmann::json& obj, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw Error(Errc::MalformedParams, "unexpected parameter '" + it.key() + "'");
    const auto& v = it.value();
    bool ok = v.is_string();
    if (v.is_array()) {
      ok = true;
      for (const auto& e : v) ok = ok && e.is_number_integer();
    }
    if (!ok && it.key() != std::string("bbox")) {
      throw Error(Errc::MalformedParams, "parameter '" + it.key() + "' must be a string or integer array");
    }
  }
}

}  // namespace detail

/// Parses a `<tool_call>` block (with or without the outer tags) and checks
/// the per-tool parameter schema.
inline ToolCall parse_tool_call(std::string_view block) {
  std::string_view body = hdk::detail::trim(block);
  if (auto inner = detail::inner_tag(body, "tool_call")) body = *inner;

  auto name = detail::inner_tag(body, "tool_name");
  if (!name) throw Error(Errc::MalformedParams, "tool call lacks <tool_name>");
  auto params_text = detail::inner_tag(body, "params");
  if (!params_text) throw Error(Errc::MalformedParams, "tool call lacks <params>");

  auto tool = tool_from_name(*name);
  if (!tool) throw Error(Errc::UnknownTool, std::string(hdk::detail::trim(*name)));

  nlohmann::json params;
  try {
    params = nlohmann::json::parse(*params_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedParams, std::string("params is not valid JSON: ") + e.what());
  }
  if (!params.is_object()) throw Error(Errc::MalformedParams, "params must be a JSON object");

  switch (*tool) {
    case Tool::RetrieveView: {
      detail::check_params_shape(params, {"frame_index", "view_index"});
      const auto& f = detail::require(params, "frame_index");
      std::optional<FrameIndex> frame;
      if (f.is_string()) frame = FrameIndex::parse(f.get<std::string>());
      if (!frame) throw Error(Errc::BadEnumValue, "frame_index");
      return {RetrieveViewParams{*frame, detail::require_view(params)}};
    }
    case Tool::RoiInspection: {
      detail::check_params_shape(params, {"view_index", "bbox", "description"});
      View view = detail::require_view(params);
      BBox box = detail::require_bbox(params);
      return {RoiInspectionParams{view, box, detail::require_string(params, "description")}};
    }
    case Tool::DepthEstimation:
      detail::check_params_shape(params, {"view_index"});
      return {DepthEstimationParams{detail::require_view(params)}};
    case Tool::ObjectDetection3D: {
      detail::check_params_shape(params, {"view_index", "object_text"});
      View view = detail::require_view(params);
      return {ObjectDetection3DParams{view, detail::require_string(params, "object_text")}};
    }
  }
  throw Error(Errc::UnknownTool, std::string(*name));
}

/// The JSON params object exactly as the wire templates lay it out.
inline std::string format_params(const ToolCall& call) {
  auto q = [](std::string_view s) { return nlohmann::json(std::string(s)).dump(); };
  return std::visit(
      [&](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RetrieveViewParams>) {
          return "{\"frame_index\": " + q(p.frame.str()) + ", \"view_index\": " + q(to_string(p.view)) + "}";
        } else if constexpr (std::is_same_v<P, RoiInspectionParams>) {
          return "{\"view_index\": " + q(to_string(p.view)) + ", \"bbox\": [" + std::to_string(p.bbox.x_min) + ", " +
                 std::to_string(p.bbox.y_min) + ", " + std::to_string(p.bbox.x_max) + ", " +
                 std::to_string(p.bbox.y_max) + "], \"description\": " + q(p.description) + "}";
        } else if constexpr (std::is_same_v<P, DepthEstimationParams>) {
          return "{\"view_index\": " + q(to_string(p.view)) + "}";
        } else {
          return "{\"view_index\": " + q(to_string(p.view)) + ", \"object_text\": " + q(p.object_text) + "}";
        }
      },
      call.params);
}

inline std::string format_tool_call(const ToolCall& call) {
  std::string out = "<tool_call>\n    <tool_name>";
  out += display_name(call.tool());
  out += "</tool_name>\n    <params>";
  out += format_params(call);
  out += "</params>\n</tool_call>";
  return out;
}

}  // namespace hdk::protocol
