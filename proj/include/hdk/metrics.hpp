#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "hdk/core_types.hpp"
#include "hdk/error.hpp"

namespace hdk::metrics {

struct RelaxedMatchConfig {
  double one_level_score = 0.5;
  double two_level_score = 0.2;
  bool require_traj_match = true;
};

struct EvalRecord {
  std::string scenario_id;
  MetaActionSequence prediction;
  MetaActionSequence ground_truth;
  std::optional<Mode> mode_chosen;
  std::optional<double> acc_text;
  std::optional<double> acc_tool;
};

struct DatasetScores {
  double first_frame_acc = 0.0;  // percent
  double seq_avg_acc = 0.0;      // percent
};

// Exact composite match scores 1. A prediction one or two safety levels above
// the ground-truth speed (same trajectory) earns partial credit; anything less
// safe earns nothing.
inline double joint_match_score(const MetaAction& pred, const MetaAction& gt, const RelaxedMatchConfig& config = {}) {
  if (pred == gt) return 1.0;
  if (config.require_traj_match && pred.traj != gt.traj) return 0.0;
  const auto safer_by = static_cast<long>(index_of(pred.speed)) - static_cast<long>(index_of(gt.speed));
  if (safer_by == 1) return config.one_level_score;
  if (safer_by == 2) return config.two_level_score;
  return 0.0;
}

/// Missing predicted positions score 0; positions past the ground truth are ignored.
inline DatasetScores evaluate_dataset(std::span<const EvalRecord> records, const RelaxedMatchConfig& config = {}) {
  if (records.empty()) throw Error(Errc::EmptyDataset, "no records to evaluate");
  double first = 0.0;
  double seq = 0.0;
  for (const auto& r : records) {
    const auto& gt = r.ground_truth;
    if (gt.empty()) throw Error(Errc::SchemaError, "record '" + r.scenario_id + "' has empty ground truth");
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const double s = i < r.prediction.size() ? joint_match_score(r.prediction[i], gt[i], config) : 0.0;
      if (i == 0) first += s;
      sum += s;
    }
    seq += sum / static_cast<double>(gt.size());
  }
  const double n = static_cast<double>(records.size());
  return {first / n * 100.0, seq / n * 100.0};
}

/// Fraction of records whose chosen mode is the more accurate one. Equal
/// accuracies make either choice correct.
inline double mode_selection_accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyDataset, "no records for mode selection accuracy");
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (!r.mode_chosen || !r.acc_text || !r.acc_tool) {
      throw Error(Errc::MissingModeData, "record '" + r.scenario_id + "' lacks mode_chosen/acc_text/acc_tool");
    }
    if (*r.acc_text == *r.acc_tool) {
      ++correct;
      continue;
    }
    const Mode optimal = *r.acc_tool > *r.acc_text ? Mode::Tool : Mode::Text;
    correct += *r.mode_chosen == optimal;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace hdk::metrics
