#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "slamhive/analysis.hpp"
#include "slamhive/demo.hpp"
#include "slamhive/util.hpp"

using namespace slamhive;
using namespace slamhive::analysis;
using executor::RunState;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Errc error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::BadRequest;
}

const char* kFullDocument = R"(
group_name: "name"
group_description: "description"
evaluation_form:
  algorithm_dataset_type: 0
  1_trajectory_comparison:
    choose: 1
  3_accuracy_metrics_comparison:
    choose: 0
configuration_choose:
  configuration_id: [1,2,3,4,5]
  comb_configuration_id: [5]
  limitation_rules:
    algorithm_id: [12]
    dataset_id: [15]
    parameters_value: ["nFeatures < 1200"]
    evaluation_value:
      ate_rmse_nolimitation: 1
      ate_rmse_minimum:
      ate_rmse_maximun:
      rpe_rmse_nolimitation: 0
      rpe_rmse_maximun: 0.5
  combination_rule:
    first_one: [2]
    first_rule: ["I"]
    second_one: [0,1]
    second_rule: ["U"]
)";

std::string with_rule(const std::string& rule) {
  return R"(
group_name: g
evaluation_form:
  3_accuracy_metrics_comparison: 1
configuration_choose:
  configuration_id: [1]
  comb_configuration_id: [2]
  limitation_rules:
    algorithm_id: [1]
  combination_rule:
)" + rule;
}

}  // namespace

TEST(AnalysisSpec, ParsesFullDocument) {
  const auto spec = parse_analysis_spec(kFullDocument);
  EXPECT_EQ(spec.group_name, "name");
  EXPECT_EQ(spec.group_description, "description");
  ASSERT_EQ(spec.modes.size(), 1u);
  EXPECT_TRUE(spec.modes.count(Mode::trajectory_comparison));
  EXPECT_EQ(*spec.selection.config_ids, (std::vector<Id>{1, 2, 3, 4, 5}));
  EXPECT_EQ(*spec.selection.comb_ids, (std::vector<Id>{5}));
  const auto& rules = *spec.selection.limitation;
  EXPECT_EQ(rules.algorithm_ids, (std::set<Id>{12}));
  EXPECT_EQ(rules.dataset_ids, (std::set<Id>{15}));
  ASSERT_EQ(rules.predicates.size(), 1u);
  EXPECT_EQ(rules.predicates[0], (store::Predicate{"nFeatures", store::CompareOp::lt, "1200"}));
  ASSERT_EQ(rules.evaluation.size(), 2u);
  EXPECT_EQ(rules.evaluation[0].metric, "ate_rmse");
  EXPECT_TRUE(rules.evaluation[0].no_limitation);
  EXPECT_FALSE(rules.evaluation[0].min);
  EXPECT_FALSE(rules.evaluation[0].max);
  EXPECT_EQ(rules.evaluation[1].metric, "rpe_rmse");
  EXPECT_FALSE(rules.evaluation[1].no_limitation);
  EXPECT_EQ(rules.evaluation[1].max, 0.5);
  ASSERT_EQ(spec.selection.rule.size(), 2u);
  EXPECT_EQ(spec.selection.rule[0].sources, (std::vector<int>{2}));
  EXPECT_EQ(spec.selection.rule[0].ops, (std::vector<SetOp>{SetOp::intersect}));
  EXPECT_EQ(spec.selection.rule[1].sources, (std::vector<int>{0, 1}));
  EXPECT_EQ(spec.selection.rule[1].ops, (std::vector<SetOp>{SetOp::unite}));
}

TEST(AnalysisSpec, ModeNames) {
  for (Mode m : all_modes()) EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_EQ(parse_mode("3d_scatter"), Mode::scatter_3d);
  EXPECT_EQ(error_code([] { parse_mode("8_heatmap"); }), Errc::UnknownMode);
  std::string doc = kFullDocument;
  doc.replace(doc.find("1_trajectory_comparison"), 23, "9_everything");
  EXPECT_EQ(error_code([&] { parse_analysis_spec(doc); }), Errc::UnknownMode);
}

TEST(AnalysisSpec, Rejections) {
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    first_one: [7]\n")); }), Errc::BadCombinationRule);
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    first_one: [0, 1]\n")); }), Errc::BadCombinationRule);
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    first_one: [0, 1]\n    first_rule: [X]\n")); }),
            Errc::BadCombinationRule);
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    second_one: [0]\n")); }), Errc::BadCombinationRule);
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    first_one: [0]\n    first_rule: [U]\n")); }),
            Errc::BadCombinationRule);
  EXPECT_EQ(error_code([] { parse_analysis_spec(with_rule("    first_one: [0]\n    last_one: [1]\n")); }),
            Errc::BadCombinationRule);
  EXPECT_NO_THROW(parse_analysis_spec(with_rule("    first_one: [0, 1, 2]\n    first_rule: [U, \"-\"]\n")));

  EXPECT_EQ(error_code([] {
              parse_analysis_spec("group_name: ''\nevaluation_form: {3_accuracy_metrics_comparison: 1}\n"
                                  "configuration_choose: {configuration_id: [1]}\n");
            }),
            Errc::MalformedSpec);
  EXPECT_EQ(error_code([] {
              parse_analysis_spec("group_name: g\nevaluation_form: {3_accuracy_metrics_comparison: 0}\n"
                                  "configuration_choose: {configuration_id: [1]}\n");
            }),
            Errc::MalformedSpec);
  EXPECT_EQ(error_code([] {
              parse_analysis_spec("group_name: g\nevaluation_form: {3_accuracy_metrics_comparison: 1}\n"
                                  "configuration_choose: {limitation_rules: {parameters_value: ['a >> 3']}}\n");
            }),
            Errc::MalformedPredicate);
  EXPECT_EQ(error_code([] { parse_analysis_spec("group_name: [unclosed"); }), Errc::MalformedSpec);
}

TEST(AnalysisSpec, ScatterAxes) {
  const auto spec = parse_analysis_spec(
      "group_name: g\nevaluation_form:\n  7_3d_scatter: {choose: 1, x: frame_rate, y: cpu_max, z: ate_rmse}\n"
      "  6_2d_scatter: {axes: [cpu_mean, ate_rmse], max_ate: 1.0}\n"
      "configuration_choose: {configuration_id: [1]}\n");
  EXPECT_EQ(spec.modes.at(Mode::scatter_3d).axes, (std::vector<std::string>{"frame_rate", "cpu_max", "ate_rmse"}));
  EXPECT_EQ(spec.modes.at(Mode::scatter_2d).max_ate, 1.0);
}

TEST(SelectionRule, Examples) {
  const std::map<int, std::set<Id>> sources = {{0, {1, 2}}, {1, {2, 3}}, {2, {3}}};
  EXPECT_EQ(evaluate_rule({{{0, 1}, {SetOp::unite}}}, sources), (std::set<Id>{1, 2, 3}));
  EXPECT_EQ(evaluate_rule({{{0, 1}, {SetOp::intersect}}}, sources), (std::set<Id>{2}));
  EXPECT_EQ(evaluate_rule({{{0, 1}, {SetOp::unite, SetOp::subtract}}, {{2}, {}}}, sources), (std::set<Id>{1, 2}));
  // the listing's rule: limitation I (explicit U comb)
  EXPECT_EQ(evaluate_rule({{{2}, {SetOp::intersect}}, {{0, 1}, {SetOp::unite}}}, sources), (std::set<Id>{3}));
}

TEST(SelectionRule, DefaultRule) {
  SelectionSpec s;
  s.config_ids = std::vector<Id>{};
  s.limitation = LimitationRules{};
  const auto steps = default_rule(s);
  const std::map<int, std::set<Id>> sources = {{0, {1, 2, 5}}, {2, {2, 5, 9}}};
  EXPECT_EQ(evaluate_rule(steps, sources), (std::set<Id>{2, 5}));
  s.comb_ids = std::vector<Id>{};
  const std::map<int, std::set<Id>> three = {{0, {1}}, {1, {2, 7}}, {2, {1, 2}}};
  EXPECT_EQ(evaluate_rule(default_rule(s), three), (std::set<Id>{1, 2}));
}

// Oracle: sets as 32-bit masks, the rule flattened into one infix expression
// with explicit grouping per step.
TEST(SelectionRule, MatchesBitmaskOracle) {
  std::mt19937_64 rng(7);
  const SetOp ops[] = {SetOp::unite, SetOp::intersect, SetOp::subtract};
  auto combine = [](std::uint32_t a, SetOp op, std::uint32_t b) -> std::uint32_t {
    if (op == SetOp::unite) return a | b;
    if (op == SetOp::intersect) return a & b;
    return a & ~b;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    std::uint32_t masks[3];
    std::map<int, std::set<Id>> sources;
    for (int s = 0; s < 3; ++s) {
      masks[s] = static_cast<std::uint32_t>(rng());
      for (int bit = 0; bit < 32; ++bit)
        if (masks[s] >> bit & 1u) sources[s].insert(bit);
    }
    const int step_count = 1 + static_cast<int>(rng() % 4);
    std::vector<RuleStep> steps;
    for (int k = 0; k < step_count; ++k) {
      RuleStep step;
      const int n = 1 + static_cast<int>(rng() % 3);
      for (int i = 0; i < n; ++i) step.sources.push_back(static_cast<int>(rng() % 3));
      const int n_ops = k + 1 == step_count ? n - 1 : n;
      for (int i = 0; i < n_ops; ++i) step.ops.push_back(ops[rng() % 3]);
      steps.push_back(step);
    }
    validate_rule(steps, {0, 1, 2});

    std::uint32_t acc = 0;
    SetOp pending = SetOp::unite;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      std::uint32_t group = masks[steps[k].sources[0]];
      for (std::size_t i = 1; i < steps[k].sources.size(); ++i)
        group = combine(group, steps[k].ops[i - 1], masks[steps[k].sources[i]]);
      acc = k == 0 ? group : combine(acc, pending, group);
      if (k + 1 < steps.size()) pending = steps[k].ops.back();
    }
    std::set<Id> expected;
    for (int bit = 0; bit < 32; ++bit)
      if (acc >> bit & 1u) expected.insert(bit);
    ASSERT_EQ(evaluate_rule(steps, sources), expected) << trial;
  }
}

namespace {

// Snapshot builder: configurations on the mock template, runs and evaluations
// with chosen values.
struct SnapshotBuilder {
  store::Snapshot snap;
  Id next_run = 1;

  SnapshotBuilder() {
    snap.catalog.algorithms[1] = demo::mock_algorithm(1);
    snap.catalog.algorithms[2] = demo::mock_algorithm(2, "Other");
    snap.catalog.datasets[1] = demo::synthetic_dataset(1, "A", {"s0", "s1"});
    snap.catalog.datasets[2] = demo::synthetic_dataset(2, "B", {"s0"});
  }

  Id config(Id id, Id algorithm, Id dataset, const std::string& seq, config::ParamMap params = {},
            std::optional<Id> comb = std::nullopt) {
    config::MappingConfiguration c;
    c.id = id;
    c.algorithm_id = algorithm;
    c.dataset_id = dataset;
    c.sequence = seq;
    c.algorithm_params = std::move(params);
    c.comb_parent = comb;
    snap.configurations[id] = c;
    return id;
  }

  Id run(Id config_id, std::optional<double> ate_rmse, double traj_length = 1.0, double cpu_max = 1.0,
         RunState status = RunState::finished) {
    const Id id = next_run++;
    store::RunRecord r;
    r.id = id;
    r.config_id = config_id;
    r.status = status;
    r.ingested = true;
    r.cpu_mean = cpu_max / 2;
    r.cpu_max = cpu_max;
    r.ram_max = 100 + static_cast<double>(id);
    if (status == RunState::finished) r.traj_length = traj_length;
    snap.runs[id] = r;
    if (ate_rmse) {
      store::EvaluationRecord e;
      e.run_id = id;
      e.ate.rmse = e.ate.mean = e.ate.median = e.ate.max = *ate_rmse;
      e.ate.n = 10;
      e.rpe.rmse = *ate_rmse / 10;
      e.rpe.n = 5;
      snap.evaluations[id] = e;
    }
    return id;
  }
};

AnalysisSpec spec_for(std::vector<Id> config_ids, std::initializer_list<Mode> modes) {
  AnalysisSpec spec;
  spec.group_name = "test";
  spec.selection.config_ids = std::move(config_ids);
  for (Mode m : modes) spec.modes[m] = ModeOptions{};
  return spec;
}

}  // namespace

TEST(RepeatabilityStats, SmallCases) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0");
  b.config(2, 1, 1, "s0");
  for (double v : {0.5, 0.5, 0.5}) b.run(1, v);
  for (double v : {1.0, 2.0, 3.0}) b.run(2, v);
  const auto stats = repeatability_stats(b.snap, {1, 2, 3, 4, 5, 6}, {"ate_rmse"});
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0].config_id, 1);
  EXPECT_DOUBLE_EQ(stats[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(stats[0].std, 0.0);
  EXPECT_EQ(stats[0].n, 3u);
  EXPECT_DOUBLE_EQ(stats[1].mean, 2.0);
  EXPECT_NEAR(stats[1].std, std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(RepeatabilityStats, MatchesDirectRecomputation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> value(0.01, 2.0);
  SnapshotBuilder b;
  std::map<Id, std::vector<double>> truth;
  std::vector<Id> runs;
  for (Id c = 1; c <= 40; ++c) {
    b.config(c, 1, 1, "s0");
    for (int k = 0; k < 5; ++k) {
      const double v = value(rng);
      truth[c].push_back(v);
      runs.push_back(b.run(c, v));
    }
  }
  const auto stats = repeatability_stats(b.snap, runs, {"ate_rmse"});
  ASSERT_EQ(stats.size(), 40u);
  for (const auto& s : stats) {
    const auto& xs = truth.at(s.config_id);
    long double sum = 0;
    for (double x : xs) sum += x;
    const long double mean = sum / xs.size();
    long double sq = 0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    EXPECT_NEAR(s.mean, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(s.std, static_cast<double>(std::sqrt(sq / xs.size())), 1e-12);
    EXPECT_EQ(s.n, 5u);
  }
}

TEST(RunAnalysis, ModeThreeUsesAllRepeatsOthersTheFirst) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0");
  const std::vector<double> values = {0.071, 0.02, 0.15, 0.09, 0.03};
  for (double v : values) b.run(1, v);
  const auto report = run_analysis(spec_for({1}, {Mode::accuracy_comparison, Mode::accuracy_diagrams}), b.snap);
  EXPECT_EQ(report.selection, (std::vector<Id>{1, 2, 3, 4, 5}));
  const auto& cmp = report.outputs.at("3_accuracy_metrics_comparison").tables.at("comparison");
  EXPECT_EQ(cmp.columns, (std::vector<std::string>{"config_id", "metric", "mean", "std", "n"}));
  const auto row = std::find_if(cmp.rows.begin(), cmp.rows.end(), [](const auto& r) { return r[1] == "ate_rmse"; });
  ASSERT_NE(row, cmp.rows.end());
  EXPECT_NEAR((*row)[2].get<double>(), 0.0722, 1e-12);
  EXPECT_EQ((*row)[4], 5);
  const auto& diagrams = report.outputs.at("2_accuracy_metric_diagrams").tables.at("metrics");
  ASSERT_EQ(diagrams.rows.size(), 1u);
  EXPECT_EQ(diagrams.rows[0][1], 1);
}

TEST(RunAnalysis, TrajectoryComparisonNeedsOneDataset) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0");
  b.config(2, 2, 2, "s0");
  b.config(3, 2, 1, "s0");
  b.run(1, 0.1);
  b.run(2, 0.1);
  b.run(3, 0.1);
  EXPECT_EQ(error_code([&] { run_analysis(spec_for({1, 2}, {Mode::trajectory_comparison}), b.snap); }),
            Errc::MixedDatasetTrajectoryComparison);
  const auto ok = run_analysis(spec_for({1, 3}, {Mode::trajectory_comparison}), b.snap);
  EXPECT_EQ(ok.outputs.at("1_trajectory_comparison").tables.at("runs").rows.size(), 2u);
}

TEST(RunAnalysis, FailedRunsPlacedAboveWorstSuccess) {
  SnapshotBuilder b;
  for (Id c = 1; c <= 5; ++c) b.config(c, 1, 1, "s0");
  b.run(1, 0.2, 1.0, 1.0);
  b.run(2, 0.5, 0.9, 2.0);
  b.run(3, 0.3, 0.5, 3.0);                               // evaluated but short coverage
  b.run(4, std::nullopt, 0.0, 4.0, RunState::failed);    // crashed
  b.run(5, 2.0, 1.0, 5.0);                               // beyond the ATE bound below
  auto spec = spec_for({1, 2, 3, 4, 5}, {Mode::scatter_3d, Mode::scatter_2d});
  spec.modes[Mode::scatter_3d].axes = {"cpu_max", "nFeatures", "ate_rmse"};
  spec.modes[Mode::scatter_2d].max_ate = 1.0;
  const auto report = run_analysis(spec, b.snap);

  const auto& pts = report.outputs.at("7_3d_scatter").tables.at("points");
  EXPECT_EQ(pts.columns, (std::vector<std::string>{"x", "y", "z", "run_id", "status"}));
  ASSERT_EQ(pts.rows.size(), 5u);
  const double worst = 2.0;  // run 5 succeeds without a bound
  for (const auto& row : pts.rows) {
    const Id run = row[3].get<Id>();
    EXPECT_EQ(row[1].get<double>(), 1000.0);
    if (run == 3 || run == 4) {
      EXPECT_EQ(row[4], "failed");
      EXPECT_DOUBLE_EQ(row[2].get<double>(), 1.2 * worst);
    } else {
      EXPECT_EQ(row[4], "success");
      EXPECT_DOUBLE_EQ(row[2].get<double>(), b.snap.evaluations.at(run).ate.rmse);
    }
  }
  const auto& flat = report.outputs.at("6_2d_scatter").tables.at("points");
  for (const auto& row : flat.rows) {
    const Id run = row[2].get<Id>();
    if (run == 3 || run == 4 || run == 5) {
      EXPECT_EQ(row[3], "failed");
      EXPECT_DOUBLE_EQ(row[1].get<double>(), 1.2 * 0.5);
    }
  }
}

TEST(RunAnalysis, FailedRunsOmittedWithoutSuccesses) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0");
  b.run(1, std::nullopt, 0.0, 1.0, RunState::failed);
  const auto report = run_analysis(spec_for({1}, {Mode::scatter_2d}), b.snap);
  const auto& out = report.outputs.at("6_2d_scatter");
  EXPECT_TRUE(out.tables.at("points").rows.empty());
  ASSERT_EQ(out.notices.size(), 1u);
  EXPECT_NE(out.notices[0].find("omitted"), std::string::npos);
}

TEST(RunAnalysis, HistogramAndUsage) {
  SnapshotBuilder b;
  for (Id c = 1; c <= 4; ++c) b.config(c, 1, 1, "s0");
  b.run(1, 0.0);
  b.run(2, 0.25);
  b.run(3, 0.5);
  b.run(4, 1.0);
  auto spec = spec_for({1, 2, 3, 4}, {Mode::accuracy_histograms, Mode::resource_usage});
  spec.modes[Mode::accuracy_histograms].bins = 4;
  const auto report = run_analysis(spec, b.snap);
  const auto& hist = report.outputs.at("4_accuracy_histograms").tables.at("histogram");
  ASSERT_EQ(hist.rows.size(), 4u);
  std::vector<int> counts;
  for (const auto& row : hist.rows) counts.push_back(row[3].get<int>());
  EXPECT_EQ(counts, (std::vector<int>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(hist.rows[3][2].get<double>(), 1.0);
  const auto& usage = report.outputs.at("5_cpu_ram_usage_comparison").tables.at("usage");
  EXPECT_EQ(usage.rows.size(), 4u);
  EXPECT_EQ(usage.rows[0][5], 101.0);
}

TEST(RunAnalysis, EmptySelectionGivesHeaderOnlyExports) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0");
  auto spec = spec_for({1}, {Mode::accuracy_comparison, Mode::scatter_3d, Mode::repeatability});
  const auto report = run_analysis(spec, b.snap);
  EXPECT_TRUE(report.selection.empty());
  ASSERT_FALSE(report.notices.empty());
  EXPECT_EQ(report.notices[0].rfind("EmptySelection", 0), 0u);
  const auto dir = fs::temp_directory_path() / ("slamhive-analysis-" + std::to_string(::getpid()));
  const auto files = export_raw(report, dir);
  EXPECT_EQ(util::read_file(dir / "3_accuracy_metrics_comparison__comparison.csv"), "config_id,metric,mean,std,n\n");
  EXPECT_EQ(util::read_file(dir / "7_3d_scatter__points.csv"), "x,y,z,run_id,status\n");
  EXPECT_EQ(util::read_file(dir / "repeatability__repeatability.csv"), "config_id,metric,mean,std,n\n");
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  const auto back = json::parse(util::read_file(dir / "report.json")).get<AnalysisReport>();
  EXPECT_EQ(json(back), json(report));
  fs::remove_all(dir);
}

TEST(ResolveSelection, SourcesAgainstSnapshot) {
  SnapshotBuilder b;
  b.config(1, 1, 1, "s0", {{"nFeatures", "1000"}});
  b.config(2, 1, 1, "s0", {{"nFeatures", "1500"}}, 7);
  b.config(3, 2, 1, "s0", {{"nFeatures", "800"}}, 7);
  b.config(4, 2, 2, "s0", {{"nFeatures", "800"}});
  b.run(1, 0.1);                                     // 1
  b.run(2, 0.4);                                     // 2
  b.run(3, 0.9);                                     // 3
  b.run(4, std::nullopt, 0, 1, RunState::failed);    // 4
  b.run(1, 0.2);                                     // 5
  SelectionSpec s;
  s.config_ids = std::vector<Id>{1};
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 5}));
  s.comb_ids = std::vector<Id>{7};
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 2, 3, 5}));

  LimitationRules rules;
  rules.predicates.push_back(store::parse_predicate("nFeatures < 1200"));
  s.limitation = rules;
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 3, 5}));
  s.config_ids.reset();
  s.comb_ids.reset();
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 3, 4, 5}));  // failed runs included

  rules.evaluation.push_back({"ate_rmse", std::nullopt, 0.5, false});
  s.limitation = rules;
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 5}));
  rules.evaluation.back().no_limitation = true;
  s.limitation = rules;
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{1, 3, 4, 5}));

  s.rule = {{{2}, {SetOp::subtract}}, {{0}, {}}};
  EXPECT_EQ(error_code([&] { resolve_selection(s, b.snap); }), Errc::BadCombinationRule);
  s.config_ids = std::vector<Id>{99};
  EXPECT_EQ(error_code([&] { resolve_selection(s, b.snap); }), Errc::NotFound);
  s.config_ids = std::vector<Id>{1};
  EXPECT_EQ(resolve_selection(s, b.snap), (std::set<Id>{3, 4}));
}

TEST(Reports, TokensAndListing) {
  store::Store db(":memory:");
  db.add_algorithm(demo::mock_algorithm(1));
  db.add_dataset(demo::synthetic_dataset(1, "A", {"s0"}));
  config::MappingConfiguration c;
  c.algorithm_id = 1;
  c.dataset_id = 1;
  c.sequence = "s0";
  const Id config = db.add_configuration(c);
  const auto spec = spec_for({config}, {Mode::accuracy_comparison});
  const auto listed = create_report(db, spec, nullptr, true);
  const auto hidden = create_report(db, spec, nullptr, false);
  EXPECT_EQ(listed.token.size(), 32u);
  EXPECT_NE(listed.token, hidden.token);
  const auto visible = db.reports(true);
  ASSERT_EQ(visible.size(), 1u);
  EXPECT_EQ(visible[0].token, listed.token);
  EXPECT_EQ(db.report(hidden.token).body, json(hidden));
  EXPECT_EQ(db.report(listed.token).body.get<AnalysisReport>().token, listed.token);
}

TEST(RunAnalysis, TrajectoryTablesFromFiles) {
  const auto root = fs::temp_directory_path() / ("slamhive-analysis-traj-" + std::to_string(::getpid()));
  fs::remove_all(root);
  StorageLayout layout(root);
  layout.create_directories();
  dataprep::SyntheticOptions synth;
  synth.duration = 2.0;
  const auto dataset = demo::synthetic_dataset(1, "A", {"s0"}, synth);
  demo::install_synthetic_dataset(layout, dataset, synth);
  const auto gt = trajeval::read_trajectory(layout.sequence_dir("A", "s0") / "groundtruth.txt");

  SnapshotBuilder b;
  b.snap.catalog.datasets[1] = dataset;
  b.config(1, 1, 1, "s0");
  b.config(2, 2, 1, "s0");
  b.run(1, 0.0);
  b.run(2, 0.0);
  // run 1 is a rigidly moved copy of the ground truth, run 2 has no file
  std::vector<trajeval::Pose> moved;
  const Eigen::AngleAxisd turn(0.3, Eigen::Vector3d::UnitZ());
  for (auto p : gt.poses()) {
    p.position = turn * p.position + Eigen::Vector3d(1, 2, 3);
    moved.push_back(p);
  }
  fs::create_directories(layout.results_dir(1));
  trajeval::write_trajectory(layout.results_dir(1) / "traj.txt", trajeval::Trajectory(moved));

  const auto report = run_analysis(spec_for({1, 2}, {Mode::trajectory_comparison}), b.snap, &layout);
  const auto& out = report.outputs.at("1_trajectory_comparison");
  EXPECT_EQ(out.tables.at("ground_truth").rows.size(), gt.size());
  const auto& traj = out.tables.at("trajectories");
  ASSERT_EQ(traj.rows.size(), gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    EXPECT_NEAR(traj.rows[i][2].get<double>(), gt[i].position.x(), 1e-9);
    EXPECT_NEAR(traj.rows[i][4].get<double>(), gt[i].position.z(), 1e-9);
  }
  ASSERT_EQ(out.notices.size(), 1u);
  EXPECT_NE(out.notices[0].find("run 2"), std::string::npos);
  fs::remove_all(root);
}
