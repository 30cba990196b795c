#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdk/grpo.hpp"
#include "hdk/io.hpp"
#include "hdk/reward.hpp"

// Plain-data entry points for foreign callers (language bindings, the CLI).
// Inputs and outputs are JSON values only, so results can be diffed as text.
namespace hdk::bridge {

using nlohmann::json;

inline Stage stage_from_string(const std::string& s) {
  if (s == "fcm" || s == "FCM") return Stage::FCM;
  if (s == "ams" || s == "AMS") return Stage::AMS;
  throw Error(Errc::SchemaError, "stage must be 'fcm' or 'ams', got '" + s + "'");
}

inline std::optional<Mode> mode_from_json(const json& rec, const std::string& where) {
  auto it = rec.find("mode");
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (*it == "text") return Mode::Text;
  if (*it == "tool") return Mode::Tool;
  throw Error(Errc::SchemaError, where + ": mode must be 'text' or 'tool'");
}

/// Scores rollout records grouped by `query_id`. Each record holds
/// `query_id`, `transcript`, `ground_truth` and an optional forced `mode`.
/// Returns one breakdown per record, in input order, with its group advantage.
inline json score_records(const json& records, Stage stage, const reward::WeightTable& weights,
                          const reward::RewardConfig& config = {}) {
  if (!records.is_array() || records.empty()) throw Error(Errc::SchemaError, "records must be a non-empty list");
  config.validate();

  struct Pending {
    ResponseGroup group;
    MetaActionSequence gt;
    std::vector<std::size_t> rows;
  };
  std::vector<Pending> groups;
  std::map<std::string, std::size_t> by_id;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string where = "record " + std::to_string(i);
    const std::string qid = io::string_field(rec, "query_id", where);
    const std::string text = io::string_field(rec, "transcript", where);
    const MetaActionSequence gt = io::sequence_from_json(io::field(rec, "ground_truth", where), where + ".ground_truth");
    const auto forced = mode_from_json(rec, where);

    auto [it, fresh] = by_id.try_emplace(qid, groups.size());
    if (fresh) {
      groups.push_back({});
      groups.back().group.query_id = qid;
      groups.back().group.stage = stage;
      groups.back().gt = gt;
    } else if (!(groups[it->second].gt == gt)) {
      throw Error(Errc::SchemaError, where + ": ground_truth differs within group '" + qid + "'");
    }
    auto& pending = groups[it->second];

    auto transcript = protocol::parse_for_scoring(text, {}, forced.value_or(Mode::Text));
    pending.group.trajectories.push_back(ScoredTrajectory::from_transcript(std::move(transcript), forced));
    pending.rows.push_back(i);
  }

  json out = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(nullptr);
  for (auto& p : groups) {
    p.group.validate();
    reward::score_group(p.group, p.gt, weights, config);
    grpo::assign_advantages(p.group);
    for (std::size_t k = 0; k < p.rows.size(); ++k) {
      json row = io::to_json(p.group.trajectories[k]);
      row["query_id"] = p.group.query_id;
      row["index"] = k;
      row["advantage"] = p.group.advantages[k];
      out[p.rows[k]] = std::move(row);
    }
  }
  return out;
}

/// Accuracy reward for plain action lists.
inline double accuracy_reward(const json& prediction, const json& ground_truth, const reward::WeightTable& weights,
                              const reward::RewardConfig& config = {}) {
  std::optional<MetaActionSequence> pred;
  try {
    pred = io::sequence_from_json(prediction, "prediction");
  } catch (const Error&) {
    pred.reset();
  }
  return reward::accuracy_reward(pred, io::sequence_from_json(ground_truth, "ground_truth"), weights, config);
}

inline json compute_advantages(const json& rewards) {
  if (!rewards.is_array()) throw Error(Errc::SchemaError, "rewards must be a list");
  std::vector<double> r;
  for (const auto& x : rewards) {
    if (!x.is_number()) throw Error(Errc::SchemaError, "rewards must be numbers");
    r.push_back(x.get<double>());
  }
  return grpo::compute_advantages(r);
}

}  // namespace hdk::bridge
