#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <vector>

#include "hdk/metrics.hpp"
#include "support.hpp"

using namespace hdk;
using namespace hdk::metrics;
namespace hf = hdk::fixtures;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hdk::Error";
  return Errc::IoError;
}

constexpr MetaAction KS{Velocity::KeepSpeed, Trajectory::Straight};
constexpr MetaAction DS{Velocity::Decelerate, Trajectory::Straight};
constexpr MetaAction SS{Velocity::Stop, Trajectory::Straight};
constexpr MetaAction AS{Velocity::Accelerate, Trajectory::Straight};
constexpr MetaAction KL{Velocity::KeepSpeed, Trajectory::LeftTurn};

EvalRecord record(MetaActionSequence pred, MetaActionSequence gt) {
  EvalRecord r;
  r.scenario_id = "s";
  r.prediction = std::move(pred);
  r.ground_truth = std::move(gt);
  return r;
}

EvalRecord mode_record(Mode chosen, double text, double tool) {
  EvalRecord r = record(hf::seq({KS}), hf::seq({KS}));
  r.mode_chosen = chosen;
  r.acc_text = text;
  r.acc_tool = tool;
  return r;
}

}  // namespace

TEST(JointMatch, Examples) {
  EXPECT_EQ(joint_match_score(KS, KS), 1.0);
  EXPECT_EQ(joint_match_score(DS, KS), 0.5);
  EXPECT_EQ(joint_match_score(SS, KS), 0.2);
  EXPECT_EQ(joint_match_score(AS, KS), 0.0);
  EXPECT_EQ(joint_match_score(KL, DS), 0.0);
}

TEST(JointMatch, CompositeIndexLayout) {
  EXPECT_EQ(composite_from_index(0), AS);
  EXPECT_EQ(composite_from_index(3), KS);
  EXPECT_EQ(composite_from_index(5), KL);
  EXPECT_EQ(composite_from_index(9), SS);
}

TEST(JointMatch, FrozenTableMatchesCellForCell) {
  for (std::size_t p = 0; p < kCompositeActions; ++p) {
    for (std::size_t g = 0; g < kCompositeActions; ++g) {
      EXPECT_EQ(joint_match_score(composite_from_index(p), composite_from_index(g)), hf::kFrozenJointTable[p][g])
          << to_string(composite_from_index(p)) << " vs " << to_string(composite_from_index(g));
    }
  }
}

TEST(JointMatch, EnumerationOracleAgreesWithFrozenTable) {
  // Position of each speed on the safety order, listed independently.
  const std::vector<Velocity> order = {Velocity::Accelerate, Velocity::KeepSpeed, Velocity::Decelerate, Velocity::Stop};
  auto rank = [&](Velocity v) { return std::find(order.begin(), order.end(), v) - order.begin(); };
  for (std::size_t p = 0; p < kCompositeActions; ++p) {
    for (std::size_t g = 0; g < kCompositeActions; ++g) {
      const auto a = composite_from_index(p);
      const auto b = composite_from_index(g);
      double want = 0.0;
      if (a == b) {
        want = 1.0;
      } else if (a.traj == b.traj && rank(a.speed) - rank(b.speed) == 1) {
        want = 0.5;
      } else if (a.traj == b.traj && rank(a.speed) - rank(b.speed) == 2) {
        want = 0.2;
      }
      EXPECT_EQ(hf::kFrozenJointTable[p][g], want);
    }
  }
}

TEST(JointMatch, LessSafeSpeedsNeverScore) {
  for (std::size_t p = 0; p < kCompositeActions; ++p) {
    for (std::size_t g = 0; g < kCompositeActions; ++g) {
      const auto a = composite_from_index(p);
      const auto b = composite_from_index(g);
      if (index_of(a.speed) < index_of(b.speed)) {
        EXPECT_EQ(joint_match_score(a, b), 0.0);
      }
    }
  }
}

TEST(JointMatch, TrajectoryRequirementCanBeRelaxed) {
  RelaxedMatchConfig config;
  config.require_traj_match = false;
  EXPECT_EQ(joint_match_score({Velocity::Decelerate, Trajectory::LeftTurn}, KS, config), 0.5);
  EXPECT_EQ(joint_match_score({Velocity::Decelerate, Trajectory::LeftTurn}, KS), 0.0);
}

TEST(EvaluateDataset, AllExact) {
  const std::vector<EvalRecord> rs = {record(hf::seq({KS, DS, SS, SS}), hf::seq({KS, DS, SS, SS})),
                                      record(hf::seq({AS, KS, KS, KL}), hf::seq({AS, KS, KS, KL}))};
  const auto s = evaluate_dataset(rs);
  EXPECT_EQ(s.first_frame_acc, 100.0);
  EXPECT_EQ(s.seq_avg_acc, 100.0);
}

TEST(EvaluateDataset, HandExample) {
  // Positions score 1, 0.5, 0, 0.
  const std::vector<EvalRecord> rs = {record(hf::seq({KS, DS, AS, KL}), hf::seq({KS, KS, KS, KS}))};
  const auto s = evaluate_dataset(rs);
  EXPECT_EQ(s.first_frame_acc, 100.0);
  EXPECT_EQ(s.seq_avg_acc, 37.5);
}

TEST(EvaluateDataset, ShortAndLongPredictions) {
  const std::vector<EvalRecord> short_pred = {record(hf::seq({KS, KS}), hf::seq({KS, KS, KS, KS}))};
  EXPECT_EQ(evaluate_dataset(short_pred).first_frame_acc, 100.0);
  EXPECT_EQ(evaluate_dataset(short_pred).seq_avg_acc, 50.0);
  const std::vector<EvalRecord> long_pred = {record(hf::seq({KS, KS, KS, KS, AS, AS}), hf::seq({KS, KS, KS, KS}))};
  EXPECT_EQ(evaluate_dataset(long_pred).seq_avg_acc, 100.0);
  const std::vector<EvalRecord> empty_pred = {record({}, hf::seq({KS, KS, KS, KS}))};
  EXPECT_EQ(evaluate_dataset(empty_pred).first_frame_acc, 0.0);
}

TEST(EvaluateDataset, AveragesPerRecord) {
  const std::vector<EvalRecord> rs = {record(hf::seq({KS, KS, KS, KS}), hf::seq({KS, KS, KS, KS})),
                                      record(hf::seq({SS, SS, SS, SS}), hf::seq({KS, KS, KS, KS}))};
  const auto s = evaluate_dataset(rs);
  EXPECT_DOUBLE_EQ(s.first_frame_acc, 60.0);
  EXPECT_DOUBLE_EQ(s.seq_avg_acc, 60.0);
}

TEST(EvaluateDataset, EnumeratedPositionOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto gt = hf::random_sequence(rng, 4);
    const auto pred = hf::random_sequence(rng, rng.below(7));
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i < pred.size()) sum += hf::kFrozenJointTable[composite_index(pred[i])][composite_index(gt[i])];
    }
    const std::vector<EvalRecord> rs = {record(pred, gt)};
    ASSERT_NEAR(evaluate_dataset(rs).seq_avg_acc, sum / 4.0 * 100.0, 1e-12);
  }
}

TEST(EvaluateDataset, Errors) {
  EXPECT_EQ(code_of([] { evaluate_dataset({}); }), Errc::EmptyDataset);
  const std::vector<EvalRecord> rs = {record(hf::seq({KS}), {})};
  EXPECT_EQ(code_of([&] { evaluate_dataset(rs); }), Errc::SchemaError);
}

TEST(ModeSelection, Examples) {
  const std::vector<EvalRecord> all = {mode_record(Mode::Tool, 0.2, 0.9), mode_record(Mode::Text, 0.8, 0.5)};
  EXPECT_EQ(mode_selection_accuracy(all), 1.0);
  const std::vector<EvalRecord> half = {mode_record(Mode::Tool, 0.2, 0.9), mode_record(Mode::Tool, 0.8, 0.5),
                                        mode_record(Mode::Text, 0.2, 0.9), mode_record(Mode::Text, 0.8, 0.5)};
  EXPECT_EQ(mode_selection_accuracy(half), 0.5);
}

TEST(ModeSelection, TiesCountForEitherChoice) {
  for (Mode m : {Mode::Text, Mode::Tool}) {
    const std::vector<EvalRecord> rs = {mode_record(m, 0.6, 0.6)};
    EXPECT_EQ(mode_selection_accuracy(rs), 1.0);
  }
}

TEST(ModeSelection, MissingDataAndEmpty) {
  EXPECT_EQ(code_of([] { mode_selection_accuracy({}); }), Errc::EmptyDataset);
  std::vector<EvalRecord> rs = {mode_record(Mode::Tool, 0.1, 0.2)};
  rs[0].acc_tool.reset();
  EXPECT_EQ(code_of([&] { mode_selection_accuracy(rs); }), Errc::MissingModeData);
}

TEST(ModeSelection, PermutationInvariant) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalRecord> rs;
    const std::size_t n = 2 + rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      rs.push_back(mode_record(rng.uniform() < 0.5 ? Mode::Text : Mode::Tool, rng.below(3) * 0.5, rng.below(3) * 0.5));
    }
    const double base = mode_selection_accuracy(rs);
    for (int k = 0; k < 5; ++k) {
      for (std::size_t i = rs.size() - 1; i > 0; --i) std::swap(rs[i], rs[rng.below(i + 1)]);
      ASSERT_EQ(mode_selection_accuracy(rs), base);
    }
  }
}
