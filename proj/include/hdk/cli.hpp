#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdk/bridge.hpp"
#include "hdk/data_pipeline.hpp"
#include "hdk/io.hpp"
#include "hdk/labeler.hpp"
#include "hdk/metrics.hpp"
#include "hdk/reward.hpp"
#include "hdk/toy_trainer.hpp"
#include "hdk/transcript.hpp"

namespace hdk::cli {

using nlohmann::json;
using nlohmann::ordered_json;

enum ExitStatus : int { kSuccess = 0, kRuntimeFailure = 1, kInputError = 2 };

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("HDK_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(Errc::SchemaError, "HDK_SEED must be an unsigned integer");
    }
  }
  return 0;
}

inline std::vector<toy::StageSchedule> parse_stages(const std::string& spec) {
  std::vector<toy::StageSchedule> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    toy::StageSchedule st;
    st.stage = bridge::stage_from_string(item.substr(0, colon));
    if (colon != std::string::npos) {
      try {
        st.epochs = std::stoi(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(Errc::SchemaError, "bad epoch count in stage '" + item + "'");
      }
      if (st.epochs < 0) throw Error(Errc::SchemaError, "negative epoch count in '" + item + "'");
    }
    out.push_back(st);
  }
  if (out.empty()) throw Error(Errc::SchemaError, "no stages given");
  return out;
}

struct LabelArgs {
  std::string input;
  labeler::LabelingConfig config;
};

inline int cmd_label(const LabelArgs& args, std::ostream& out) {
  auto in = io::open_input(args.input);
  io::for_each_jsonl(in, args.input, [&](const json& rec, std::size_t n) {
    const std::string where = args.input + ":" + std::to_string(n);
    const auto points = io::points_from_json(io::field(rec, "points", where), where);
    if (points.empty()) throw Error(Errc::SchemaError, where + ": no points");
    const double t0 = rec.contains("t0") ? io::number_field(rec, "t0", where) : points.front().t + args.config.history_s;
    Scenario s;
    s.id = io::string_field(rec, "id", where);
    s.navigation = rec.value("navigation", "");
    s.ground_truth = labeler::label_trajectory(points, t0, args.config);
    if (rec.contains("speed_kmh")) {
      s.speed_kmh = io::number_field(rec, "speed_kmh", where);
    } else {
      // Instantaneous speed at the sample closest to t0.
      const auto filled = labeler::with_speeds(points);
      auto best = std::min_element(filled.begin(), filled.end(), [t0](const auto& a, const auto& b) {
        return std::abs(a.t - t0) < std::abs(b.t - t0);
      });
      s.speed_kmh = *best->v * 3.6;
    }
    out << io::to_json(s).dump() << '\n';
  });
  return kSuccess;
}

struct ScoreArgs {
  std::string input;
  std::string stage = "ams";
  std::string weights;
};

inline int cmd_score(const ScoreArgs& args, std::ostream& out) {
  json records = json::array();
  auto in = io::open_input(args.input);
  io::for_each_jsonl(in, args.input, [&](const json& rec, std::size_t) { records.push_back(rec); });
  const auto weights = args.weights.empty() ? reward::WeightTable::uniform()
                                            : io::weights_from_json(io::read_json_file(args.weights), args.weights);
  const json rows = bridge::score_records(records, bridge::stage_from_string(args.stage), weights);
  for (const auto& row : rows) out << row.dump() << '\n';
  return kSuccess;
}

struct WeightsArgs {
  std::string gt;
  reward::WeightParams params;
};

inline int cmd_weights(const WeightsArgs& args, std::ostream& out) {
  const auto scenarios = io::read_scenarios(args.gt);
  std::vector<MetaActionSequence> seqs;
  for (const auto& s : scenarios) seqs.push_back(s.ground_truth);
  const auto table = reward::compute_action_weights(reward::count_action_frequencies(seqs), args.params);
  out << io::to_json(table).dump() << '\n';
  return kSuccess;
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  bool msa = false;
};

inline int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto scenarios = io::read_scenarios(args.gt);
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id[s.id] = &s;

  std::vector<metrics::EvalRecord> records;
  auto in = io::open_input(args.pred);
  io::for_each_jsonl(in, args.pred, [&](const json& rec, std::size_t n) {
    const std::string where = args.pred + ":" + std::to_string(n);
    metrics::EvalRecord r;
    r.scenario_id = io::string_field(rec, "id", where);
    auto it = by_id.find(r.scenario_id);
    if (it == by_id.end()) throw Error(Errc::SchemaError, where + ": no ground truth for id '" + r.scenario_id + "'");
    r.ground_truth = it->second->ground_truth;
    const auto& p = io::field(rec, "prediction", where);
    if (!p.is_string() && !p.is_array()) throw Error(Errc::SchemaError, where + ": prediction must be a list or string");
    try {
      r.prediction = io::sequence_from_json(p, where);
    } catch (const Error&) {
      r.prediction = {};  // unparseable predictions score zero everywhere
    }
    if (args.msa) {
      const std::string mode = io::string_field(rec, "mode_chosen", where);
      if (mode != "text" && mode != "tool") throw Error(Errc::SchemaError, where + ": mode_chosen must be text|tool");
      r.mode_chosen = mode == "text" ? Mode::Text : Mode::Tool;
      r.acc_text = io::number_field(rec, "acc_text", where);
      r.acc_tool = io::number_field(rec, "acc_tool", where);
    }
    records.push_back(std::move(r));
  });
  const auto scores = metrics::evaluate_dataset(records);
  ordered_json summary;
  summary["first_frame_acc"] = scores.first_frame_acc;
  summary["seq_avg_acc"] = scores.seq_avg_acc;
  if (args.msa) summary["msa"] = metrics::mode_selection_accuracy(records);
  out << summary.dump() << '\n';
  return kSuccess;
}

inline int cmd_parse(const std::string& path, std::size_t max_calls, std::ostream& out) {
  const auto transcript = protocol::parse_transcript(io::read_file(path), {.max_tool_calls = max_calls});
  out << io::to_json(transcript).dump() << '\n';
  return kSuccess;
}

struct SimulateArgs {
  std::string env;
  std::string stages = "fcm:1,ams:1";
  std::string report;
  double simple_ceiling = 1.0;
  double complex_text_ceiling = 0.4;
  double complex_tool_ceiling = 1.0;
  toy::TrainingConfig config;
};

inline int cmd_simulate(SimulateArgs args, std::ostream& out) {
  toy::SyntheticEnv env;
  env.scenarios = io::read_scenarios(args.env);
  env.simple = {args.simple_ceiling, args.simple_ceiling};
  env.complex = {args.complex_text_ceiling, args.complex_tool_ceiling};
  const auto schedule = parse_stages(args.stages);
  const auto report = toy::train_toy_policy(env, schedule, args.config);
  json doc = io::to_json(report);
  doc["stages"] = args.stages;
  doc["group_size"] = args.config.group_size;
  doc["iterations_per_epoch"] = args.config.iterations_per_epoch;
  if (args.report.empty()) {
    out << doc.dump() << '\n';
  } else {
    std::ofstream f(args.report);
    if (!f) throw Error(Errc::IoError, "cannot write '" + args.report + "'");
    f << doc.dump(2) << '\n';
    out << json{{"report", args.report}, {"final", doc["final"]}}.dump() << '\n';
  }
  return kSuccess;
}

struct PipelineArgs {
  std::string input;
  std::optional<std::size_t> n_per_side;
  pipeline::PipelineConfig config;
};

inline json annotation_json(const pipeline::Annotation& a) {
  return {{"id", a.scenario_id}, {"mode", to_string(a.mode)}, {"transcript", a.transcript},
          {"judge_score", a.judge_score ? json(*a.judge_score) : json(nullptr)}, {"regenerations", a.regenerations}};
}

// Scripted oracles: the k-th judge call returns judge_scores[k] (last value
// repeated) and the k-th regeneration returns regenerations[k].
inline int cmd_pipeline(const PipelineArgs& args, std::uint64_t seed, std::ostream& out) {
  args.config.validate();
  json partition = {{"d_text", json::array()}, {"d_tool", json::array()}, {"d_explore", json::array()}};
  json rejected = json::array();
  std::vector<pipeline::Annotation> text_side, tool_side;

  auto in = io::open_input(args.input);
  io::for_each_jsonl(in, args.input, [&](const json& rec, std::size_t n) {
    const std::string where = args.input + ":" + std::to_string(n);
    const std::string id = io::string_field(rec, "id", where);
    const auto& sc = io::field(rec, "scores", where);
    pipeline::OracleScores scores{io::number_field(sc, "small_text_acc", where), io::number_field(sc, "big_text_acc", where),
                                  io::number_field(sc, "big_tool_acc", where)};
    const auto part = pipeline::assess_necessity(scores, args.config);
    partition[std::string(to_string(part))].push_back(id);
    if (part == pipeline::Partition::Explore || !rec.contains("annotation")) return;

    const auto& ann = rec["annotation"];
    const auto gt = io::sequence_from_json(io::field(rec, "ground_truth", where), where + ".ground_truth");
    pipeline::Annotation a;
    a.scenario_id = id;
    a.mode = part == pipeline::Partition::Tool ? Mode::Tool : Mode::Text;
    a.transcript = io::string_field(ann, "transcript", where + ".annotation");
    std::vector<double> judge_scores;
    for (const auto& s : ann.value("judge_scores", json::array())) {
      if (!s.is_number()) throw Error(Errc::SchemaError, where + ": judge_scores must be numbers");
      judge_scores.push_back(s.get<double>());
    }
    if (judge_scores.empty()) throw Error(Errc::SchemaError, where + ": annotation needs judge_scores");
    std::vector<std::string> regenerations;
    for (const auto& s : ann.value("regenerations", json::array())) {
      if (!s.is_string()) throw Error(Errc::SchemaError, where + ": regenerations must be strings");
      regenerations.push_back(s.get<std::string>());
    }
    std::size_t judged = 0, regenerated = 0;
    auto judge = [&](const pipeline::Annotation&) { return judge_scores[std::min(judged++, judge_scores.size() - 1)]; };
    auto regen = [&](const pipeline::Annotation& cur) {
      return regenerated < regenerations.size() ? regenerations[regenerated++] : cur.transcript;
    };
    auto judged_out = pipeline::filter_by_judge(a, judge, regen, args.config);
    if (!judged_out.accepted) {
      rejected.push_back({{"id", id}, {"stage", "judge"}, {"reason", "BelowThreshold"},
                          {"judge_calls", judged_out.judge_calls()}});
      return;
    }
    auto cleaned = pipeline::clean_annotation(*judged_out.accepted, gt, args.config);
    if (!cleaned.cleaned) {
      rejected.push_back({{"id", id}, {"stage", "clean"}, {"reason", to_string(*cleaned.reason)},
                          {"detail", cleaned.detail}});
      return;
    }
    (a.mode == Mode::Tool ? tool_side : text_side).push_back(std::move(*cleaned.cleaned));
  });

  const std::size_t n = args.n_per_side.value_or(std::min(text_side.size(), tool_side.size()));
  const auto balanced = pipeline::balance_dataset(text_side, tool_side, n, seed);
  json dataset = json::array();
  for (const auto& a : balanced.records) dataset.push_back(annotation_json(a));
  ordered_json doc;
  doc["partition"] = partition;
  doc["rejected"] = rejected;
  doc["n_per_side"] = n;
  doc["dataset"] = dataset;
  doc["tool_usage"] = balanced.tool_usage;
  doc["warnings"] = balanced.warnings;
  out << doc.dump() << '\n';
  return kSuccess;
}

inline void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-thinking driving agent toolkit: labeling, rewards, MP-GRPO, metrics, SFT pipeline", "hdk"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_flag;

  LabelArgs label;
  auto* label_cmd = app.add_subcommand("label", "Label trajectory JSONL into scenario JSONL");
  label_cmd->add_option("--input", label.input, "Trajectory JSONL: {id, points:[[t,x,y(,v)]], t0?}")->required();
  label_cmd->add_option("--stop-speed", label.config.stop_speed_mps, "Stop threshold in m/s")->capture_default_str();
  label_cmd->add_option("--accel", label.config.accel_mps2, "Acceleration threshold in m/s^2")->capture_default_str();
  label_cmd->add_option("--turn-deg", label.config.turn_deg, "Heading-change threshold in degrees")->capture_default_str();
  label_cmd->add_option("--center-offset", label.config.center_offset_s, "Shift of every window center in s")
      ->capture_default_str();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score grouped rollouts and emit reward breakdowns");
  score_cmd->add_option("--input", score.input, "JSONL of {query_id, transcript, ground_truth, mode?}")->required();
  score_cmd->add_option("--stage", score.stage, "Training stage")->check(CLI::IsMember({"fcm", "ams"}))->capture_default_str();
  score_cmd->add_option("--weights", score.weights, "Weight table JSON (unit weights if omitted)");

  WeightsArgs weights;
  auto* weights_cmd = app.add_subcommand("weights", "Derive position-action weights from ground-truth scenarios");
  weights_cmd->add_option("--gt", weights.gt, "Scenario JSONL")->required();
  weights_cmd->add_option("--gamma", weights.params.gamma, "Inverse-frequency exponent")->capture_default_str();
  weights_cmd->add_option("--w-min", weights.params.w_min, "Lower clip bound")->capture_default_str();
  weights_cmd->add_option("--w-max", weights.params.w_max, "Upper clip bound")->capture_default_str();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "First-frame / sequence-average joint accuracy and MSA");
  eval_cmd->add_option("--pred", eval.pred, "Prediction JSONL: {id, prediction, mode_chosen?, acc_text?, acc_tool?}")
      ->required();
  eval_cmd->add_option("--gt", eval.gt, "Scenario JSONL with ground_truth")->required();
  eval_cmd->add_flag("--msa", eval.msa, "Also report mode selection accuracy");

  std::string parse_path;
  std::size_t parse_max_calls = 3;
  auto* parse_cmd = app.add_subcommand("parse", "Parse one transcript and print its structure and violations");
  parse_cmd->add_option("transcript", parse_path, "Transcript text file")->required();
  parse_cmd->add_option("--max-tool-calls", parse_max_calls, "Tool-call limit")->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate-rl", "Train the toy policy through the cascaded RL schedule");
  sim_cmd->add_option("--env", sim.env, "Scenario JSONL with complexity_tag")->required();
  sim_cmd->add_option("--stages", sim.stages, "Schedule, e.g. fcm:1,ams:1")->capture_default_str();
  sim_cmd->add_option("--group-size", sim.config.group_size, "Rollouts per group")->capture_default_str();
  sim_cmd->add_option("--max-tool-calls", sim.config.max_tool_calls, "Tool-call budget")->capture_default_str();
  sim_cmd->add_option("--iterations", sim.config.iterations_per_epoch, "Group updates per epoch")->capture_default_str();
  sim_cmd->add_option("--lr", sim.config.learning_rate, "Learning rate")->capture_default_str();
  sim_cmd->add_option("--eval-rollouts", sim.config.eval_rollouts, "Evaluation rollouts per scenario")
      ->capture_default_str();
  sim_cmd->add_option("--simple-ceiling", sim.simple_ceiling, "Accuracy ceiling of simple scenarios (both modes)")
      ->capture_default_str();
  sim_cmd->add_option("--complex-text-ceiling", sim.complex_text_ceiling, "Text-mode ceiling of complex scenarios")
      ->capture_default_str();
  sim_cmd->add_option("--complex-tool-ceiling", sim.complex_tool_ceiling, "Tool-mode ceiling of complex scenarios")
      ->capture_default_str();
  sim_cmd->add_option("--report", sim.report, "Write the training report JSON here (stdout if omitted)");

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "SFT data pipeline with scripted oracles");
  pipe_cmd->add_option("--input", pipe.input, "JSONL of {id, scores, ground_truth, annotation?}")->required();
  pipe_cmd->add_option("--n-per-side", pipe.n_per_side, "Samples per mode (default: smaller side)");
  pipe_cmd->add_option("--judge-threshold", pipe.config.judge_threshold, "Judge acceptance threshold")
      ->capture_default_str();
  pipe_cmd->add_option("--max-regenerations", pipe.config.max_regenerations, "Regeneration limit")
      ->capture_default_str();
  pipe_cmd->add_option("--tool-gain", pipe.config.tool_gain_threshold, "Tool-necessity gain threshold")
      ->capture_default_str();

  for (auto* cmd : {sim_cmd, pipe_cmd}) {
    cmd->add_option("--seed", seed_flag, "Random seed (default: $HDK_SEED or 0)");
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kSuccess;
    }
    report_error(err, "UsageError", e.what());
    return kInputError;
  }

  try {
    if (*label_cmd) return cmd_label(label, out);
    if (*score_cmd) return cmd_score(score, out);
    if (*weights_cmd) return cmd_weights(weights, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*parse_cmd) return cmd_parse(parse_path, parse_max_calls, out);
    const std::uint64_t seed = seed_flag.value_or(default_seed());
    if (*sim_cmd) {
      sim.config.seed = seed;
      return cmd_simulate(sim, out);
    }
    if (*pipe_cmd) return cmd_pipeline(pipe, seed, out);
  } catch (const Error& e) {
    report_error(err, errc_name(e.code()), e.detail());
    return is_input_error(e.code()) ? kInputError : kRuntimeFailure;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return kRuntimeFailure;
  }
  return kInputError;
}

}  // namespace hdk::cli
