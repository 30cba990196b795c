#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"
#include "hdk/group.hpp"
#include "hdk/labeler.hpp"
#include "hdk/reward.hpp"
#include "hdk/session.hpp"
#include "hdk/toy_trainer.hpp"
#include "hdk/transcript.hpp"

// JSON encodings of the library types and JSON Lines helpers. Every decoder
// throws Error(SchemaError) naming the offending field.
namespace hdk::io {

using nlohmann::json;

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::SchemaError, where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::SchemaError, where + ": missing field '" + key + "'");
  return *it;
}

inline std::string string_field(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_string()) throw Error(Errc::SchemaError, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double number_field(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number()) throw Error(Errc::SchemaError, where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

/// Calls `fn(record, line_number)` for every non-blank line.
inline void for_each_jsonl(std::istream& in, const std::string& name,
                           const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::SchemaError, name + ":" + std::to_string(n) + ": " + e.what());
    }
    fn(record, n);
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::SchemaError, "cannot open '" + path + "'");
  return in;
}

inline std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaError, path + ": " + e.what());
  }
}

// --- meta-actions ----------------------------------------------------------

inline json to_json(const MetaActionSequence& seq) {
  json out = json::array();
  for (const auto& a : seq.actions) out.push_back(to_string(a));
  return out;
}

/// Accepts a list of "<speed>, <traj>" strings or the bracketed text form.
inline MetaActionSequence sequence_from_json(const json& v, const std::string& where) {
  try {
    if (v.is_string()) return parse_meta_action_sequence(v.get<std::string>());
    if (!v.is_array()) throw Error(Errc::SchemaError, where + ": expected a list of actions");
    if (v.empty()) throw Error(Errc::EmptyList, "empty action list");
    MetaActionSequence seq;
    for (const auto& e : v) {
      if (!e.is_string()) throw Error(Errc::SchemaError, where + ": actions must be strings");
      seq.actions.push_back(parse_meta_action(e.get<std::string>()));
    }
    return seq;
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaError) throw;
    throw Error(Errc::SchemaError, where + ": " + e.what());
  }
}

// --- scenarios -------------------------------------------------------------

inline json to_json(const Scenario& s) {
  json out = {{"id", s.id}, {"speed_kmh", s.speed_kmh}, {"navigation", s.navigation},
              {"ground_truth", to_json(s.ground_truth)}};
  if (!s.views.empty()) out["views"] = s.views;
  if (s.complexity_tag) out["complexity_tag"] = *s.complexity_tag == Complexity::Complex ? "complex" : "simple";
  return out;
}

inline Scenario scenario_from_json(const json& j, const std::string& where) {
  Scenario s;
  s.id = string_field(j, "id", where);
  s.speed_kmh = number_field(j, "speed_kmh", where);
  if (s.speed_kmh < 0) throw Error(Errc::SchemaError, where + ": speed_kmh must be non-negative");
  s.navigation = string_field(j, "navigation", where);
  s.ground_truth = sequence_from_json(field(j, "ground_truth", where), where + ".ground_truth");
  if (s.ground_truth.size() != MetaActionSequence::kSteps) {
    throw Error(Errc::SchemaError, where + ": ground_truth must hold 4 actions");
  }
  if (auto it = j.find("views"); it != j.end()) {
    if (!it->is_object()) throw Error(Errc::SchemaError, where + ": views must map names to paths");
    for (auto v = it->begin(); v != it->end(); ++v) {
      if (!protocol::view_from_string(v.key()) || !v.value().is_string()) {
        throw Error(Errc::SchemaError, where + ": bad view '" + v.key() + "'");
      }
      s.views[v.key()] = v.value().get<std::string>();
    }
  }
  if (auto it = j.find("complexity_tag"); it != j.end() && !it->is_null()) {
    const auto tag = it->is_string() ? it->get<std::string>() : "";
    if (tag == "simple") {
      s.complexity_tag = Complexity::Simple;
    } else if (tag == "complex") {
      s.complexity_tag = Complexity::Complex;
    } else {
      throw Error(Errc::SchemaError, where + ": complexity_tag must be 'simple' or 'complex'");
    }
  }
  return s;
}

inline std::vector<Scenario> read_scenarios(const std::string& path) {
  auto in = open_input(path);
  std::vector<Scenario> out;
  for_each_jsonl(in, path, [&](const json& j, std::size_t n) {
    out.push_back(scenario_from_json(j, path + ":" + std::to_string(n)));
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (out[k].id == out[i].id) throw Error(Errc::SchemaError, path + ": duplicate scenario id '" + out[i].id + "'");
    }
  }
  return out;
}

// --- trajectories ----------------------------------------------------------

inline std::vector<labeler::TrajectoryPoint> points_from_json(const json& v, const std::string& where) {
  if (!v.is_array()) throw Error(Errc::SchemaError, where + ": points must be a list");
  std::vector<labeler::TrajectoryPoint> pts;
  for (const auto& p : v) {
    if (!p.is_array() || (p.size() != 3 && p.size() != 4)) {
      throw Error(Errc::SchemaError, where + ": each point is [t, x, y] or [t, x, y, v]");
    }
    for (const auto& c : p) {
      if (!c.is_number()) throw Error(Errc::SchemaError, where + ": point coordinates must be numbers");
    }
    labeler::TrajectoryPoint tp{p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), std::nullopt};
    if (p.size() == 4) tp.v = p[3].get<double>();
    pts.push_back(tp);
  }
  return pts;
}

// --- weights ---------------------------------------------------------------

inline json to_json(const reward::WeightTable& w) {
  return {{"gamma", w.params.gamma}, {"clip", {w.params.w_min, w.params.w_max}}, {"epsilon", w.params.epsilon},
          {"speed", w.speed}, {"traj", w.traj}};
}

template <std::size_t N>
reward::WeightRows<N> weight_rows(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw Error(Errc::SchemaError, where + ": expected a non-empty list of rows");
  reward::WeightRows<N> rows;
  for (const auto& r : v) {
    if (!r.is_array() || r.size() != N) {
      throw Error(Errc::SchemaError, where + ": each row needs " + std::to_string(N) + " weights");
    }
    std::array<double, N> row{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!r[i].is_number()) throw Error(Errc::SchemaError, where + ": weights must be numbers");
      row[i] = r[i].get<double>();
    }
    rows.push_back(row);
  }
  return rows;
}

inline reward::WeightTable weights_from_json(const json& j, const std::string& where = "weights") {
  reward::WeightTable w;
  if (auto it = j.find("gamma"); it != j.end() && it->is_number()) w.params.gamma = it->get<double>();
  if (auto it = j.find("epsilon"); it != j.end() && it->is_number()) w.params.epsilon = it->get<double>();
  if (auto it = j.find("clip"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
      throw Error(Errc::SchemaError, where + ": clip must be [w_min, w_max]");
    }
    w.params.w_min = (*it)[0].get<double>();
    w.params.w_max = (*it)[1].get<double>();
  }
  w.speed = weight_rows<4>(field(j, "speed", where), where + ".speed");
  w.traj = weight_rows<3>(field(j, "traj", where), where + ".traj");
  return w;
}

// --- transcripts and rewards -----------------------------------------------

inline json to_json(const protocol::ToolCall& call) {
  return {{"tool", protocol::slug(call.tool())}, {"params", json::parse(protocol::format_params(call))}};
}

inline json to_json(const protocol::FormatViolation& v) { return {{"kind", to_string(v.kind)}, {"detail", v.detail}}; }

inline json to_json(const protocol::Transcript& t) {
  json calls = json::array();
  for (const auto& c : t.tool_calls) {
    json e = c.call ? to_json(*c.call) : json{{"error", c.error}};
    e["section"] = c.section ? json(to_string(*c.section)) : json(nullptr);
    calls.push_back(std::move(e));
  }
  json violations = json::array();
  for (const auto& v : t.violations) violations.push_back(to_json(v));
  return {{"mode", to_string(t.mode)},
          {"mode_tag_present", t.mode_tag_present},
          {"n_tool_calls", t.n_tool_calls()},
          {"tool_calls", calls},
          {"prediction", t.prediction ? to_json(*t.prediction) : json(nullptr)},
          {"valid", t.valid()},
          {"violations", violations}};
}

inline json to_json(const ScoredTrajectory& t) {
  json violations = json::array();
  for (const auto& v : t.transcript.violations) violations.push_back(to_string(v.kind));
  return {{"mode", to_string(t.mode)}, {"n_tool_calls", t.n_tool_calls},
          {"r_acc", t.r_acc},          {"r_fmt", t.r_fmt},
          {"r_tool", t.r_tool},        {"r_total", t.r_total},
          {"violations", violations}};
}

// --- toy trainer -----------------------------------------------------------

inline json to_json(const toy::EvalSummary& e) {
  return {{"mean_r_acc", e.mean_r_acc}, {"msa", e.msa}, {"tool_fraction", e.tool_fraction},
          {"first_frame_acc", e.first_frame_acc}, {"seq_avg_acc", e.seq_avg_acc}};
}

inline json to_json(const toy::TrainingReport& r) {
  json epochs = json::array();
  json stage_names = json::array(), r_acc = json::array(), r_total = json::array(), tool = json::array(),
       eval_r_acc = json::array(), eval_msa = json::array();
  for (const auto& e : r.epochs) {
    stage_names.push_back(to_string(e.stage));
    r_acc.push_back(e.mean_r_acc);
    r_total.push_back(e.mean_r_total);
    tool.push_back(e.tool_fraction);
    eval_r_acc.push_back(e.eval.mean_r_acc);
    eval_msa.push_back(e.eval.msa);
    epochs.push_back({{"stage", to_string(e.stage)}, {"epoch", e.epoch}, {"mean_r_acc", e.mean_r_acc},
                      {"mean_r_total", e.mean_r_total}, {"tool_fraction", e.tool_fraction}, {"eval", to_json(e.eval)}});
  }
  return {{"seed", r.seed},
          {"initial", to_json(r.initial)},
          {"epochs", epochs},
          {"per_epoch",
           {{"stage", stage_names},
            {"mean_r_acc", r_acc},
            {"mean_r_total", r_total},
            {"tool_fraction", tool},
            {"eval_mean_r_acc", eval_r_acc},
            {"eval_msa", eval_msa}}},
          {"final", to_json(r.final_eval)}};
}

}  // namespace hdk::io
