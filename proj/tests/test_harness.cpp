#include <filesystem>
#include <random>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <gtest/gtest.h>

#include "atta/harness/report.hpp"

using namespace atta;
namespace fs = std::filesystem;

namespace {

// Short recordings and 64-point windows keep a full pipeline run under a few
// seconds while exercising every stage.
ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.scenario = scenario_one(0.1, 0.1);
  c.scenario.window_length = 64;
  c.scenario.window_stride = 32;
  c.faults = {"gear_wear", "teeth_crack"};
  c.seeds = {3};
  c.offline.epochs = 3;
  c.offline.anchors_per_class = 4;
  c.online.eta_f = 1e-4;
  c.online.eta_y = 1e-3;
  c.online.steps = 2;
  c.online.refresh_period = 2;
  c.block_size = 16;
  c.out_dir = (fs::temp_directory_path() / "atta_harness_test").string();
  return c;
}

std::string metrics_text(const std::vector<RunMetrics>& runs) {
  std::ostringstream s;
  write_metrics_csv(runs, s);
  return s.str();
}

}  // namespace

TEST(CumulativeAccuracy, HandCase) {
  const auto a = cumulative_accuracy({1, 0, 1, 1});
  ASSERT_EQ(a.size(), 4u);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  EXPECT_NEAR(a[2], 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(a[3], 0.75);
}

TEST(CumulativeAccuracy, AllCorrectAndAllWrong) {
  for (double v : cumulative_accuracy(std::vector<int>(50, 1))) EXPECT_EQ(v, 1.0);
  for (double v : cumulative_accuracy(std::vector<int>(50, 0))) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(cumulative_accuracy({}), DataError);
}

TEST(CumulativeAccuracy, MatchesPrefixMeansAndMovesByAtMostOneOverT) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<int> c(n);
    for (auto& v : c) v = std::bernoulli_distribution(p)(rng) ? 1 : 0;
    const auto a = cumulative_accuracy(c);
    for (std::size_t t = 0; t < n; ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i <= t; ++i) sum += c[i];
      EXPECT_NEAR(a[t], sum / static_cast<double>(t + 1), 1e-15);
      EXPECT_GE(a[t], 0.0);
      EXPECT_LE(a[t], 1.0);
      if (t + 1 < n) EXPECT_LE(std::abs(a[t + 1] - a[t]), 1.0 / static_cast<double>(t + 2) + 1e-15);
    }
  }
}

TEST(ScoreRun, SegmentAccuracyAndLengthChecks) {
  const auto m = score_run("I", "gear_wear", "Baseline", 0, {0, 1, 1, 2}, {0, 1, 0, 2},
                           {"a", "a", "b", "b"});
  EXPECT_EQ(m.correct, (std::vector<int>{1, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(m.final_accuracy(), 0.75);
  const auto seg = m.segment_accuracy();
  EXPECT_DOUBLE_EQ(seg.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(seg.at("b"), 0.5);
  EXPECT_THROW(score_run("I", "f", "A", 0, {0, 1}, {0}, {"a", "a"}), DimensionError);
}

TEST(ExperimentConfigJson, RoundTrip) {
  ExperimentConfig c = tiny_experiment();
  c.online.bn_policy = BnPolicy::kBatch;
  c.online.refresh_unit = RefreshUnit::kSteps;
  const ExperimentConfig back = experiment_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(experiment_from_json({{"scenario", "II"}}).scenario.name, "II");
  EXPECT_THROW(experiment_from_json({{"scenario", "III"}}), ConfigError);
  EXPECT_THROW(experiment_from_json({{"faults", {"healthy"}}}), ConfigError);
  EXPECT_THROW(experiment_from_json({{"seeds", nlohmann::json::array()}}), ConfigError);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { runs_ = new std::vector<RunMetrics>(run_experiment(tiny_experiment())); }
  static void TearDownTestSuite() {
    delete runs_;
    runs_ = nullptr;
  }
  static std::vector<RunMetrics>* runs_;
};
std::vector<RunMetrics>* Pipeline::runs_ = nullptr;

TEST_F(Pipeline, OneRunPerAdapterAndFault) {
  ASSERT_EQ(runs_->size(), 2u * adapter_names().size());
  for (const auto& m : *runs_) {
    EXPECT_EQ(m.predictions.size(), m.truth.size());
    EXPECT_EQ(m.cumulative.size(), m.truth.size());
    EXPECT_GT(m.truth.size(), 0u);
  }
}

TEST_F(Pipeline, MetricsCsvRoundTrip) {
  const std::string text = metrics_text(*runs_);
  std::istringstream in(text);
  const auto back = read_metrics_csv(in);
  ASSERT_EQ(back.size(), runs_->size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].predictions, (*runs_)[i].predictions);
    EXPECT_EQ(back[i].truth, (*runs_)[i].truth);
    EXPECT_EQ(back[i].segment, (*runs_)[i].segment);
    EXPECT_EQ(back[i].cumulative, (*runs_)[i].cumulative);
  }
  EXPECT_EQ(metrics_text(back), text);
}

TEST_F(Pipeline, MetricsCsvRejectsDamage) {
  std::istringstream bad_header("scenario,fault\n");
  EXPECT_THROW(read_metrics_csv(bad_header), SchemaError);
  std::istringstream bad_number(std::string(kMetricsHeader) + "\nI,gear_wear,Naive,0,1,x,0,1,1,steady-1\n");
  EXPECT_THROW(read_metrics_csv(bad_number), ParseError);
  std::istringstream skipped(std::string(kMetricsHeader) + "\nI,gear_wear,Naive,0,2,0,0,1,1,steady-1\n");
  EXPECT_THROW(read_metrics_csv(skipped), ParseError);
}

TEST_F(Pipeline, SummaryHasOneRowPerAdapterAndFault) {
  std::ostringstream s;
  write_summary_csv(*runs_, s);
  std::istringstream in(s.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "scenario,fault,adapter,final_cumulative_accuracy,seed_3,acc_steady-1,acc_transitional,"
            "acc_steady-2");
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 2u * adapter_names().size());
  EXPECT_EQ(rows[0].rfind("I,gear_wear,Proposed,", 0), 0u);
  EXPECT_EQ(rows[1].rfind("I,gear_wear,Baseline,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("I,gear_wear,Naive,", 0), 0u);
}

TEST_F(Pipeline, SvgIsWellFormedWithOneCurvePerAdapter) {
  std::ostringstream s;
  write_svg(*runs_, "I", "teeth_crack", s);
  std::istringstream in(s.str());
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree));
  int curves = 0;
  int segments = 0;
  std::vector<std::string> adapters;
  for (const auto& [name, node] : tree.get_child("svg")) {
    if (name == "polyline" && node.get<std::string>("<xmlattr>.class", "") == "curve") {
      ++curves;
      adapters.push_back(node.get<std::string>("<xmlattr>.data-adapter"));
    }
    if (name == "rect" && node.get<std::string>("<xmlattr>.class", "") == "segment") ++segments;
  }
  EXPECT_EQ(curves, 3);
  EXPECT_EQ(adapters, adapter_names());
  EXPECT_EQ(segments, 1);
  EXPECT_THROW(write_svg(*runs_, "I", "gear_pitting", s), DataError);
}

TEST_F(Pipeline, EmitReportWritesEveryFileAndReportRegenerates) {
  const fs::path dir = fs::temp_directory_path() / "atta_harness_emit";
  fs::remove_all(dir);
  const auto written = emit_report(*runs_, dir.string());
  EXPECT_EQ(written.size(), 4u);
  for (const auto& p : written) EXPECT_TRUE(fs::exists(p)) << p;
  const auto back = load_metrics((dir / "metrics.csv").string());
  EXPECT_EQ(metrics_text(back), metrics_text(*runs_));
  fs::remove_all(dir);
}

TEST(PipelineProperties, ZeroRateProposedMatchesBaseline) {
  ExperimentConfig c = tiny_experiment();
  c.faults = {"gear_pitting"};
  c.online.eta_f = 0.0;
  c.online.eta_y = 0.0;
  const auto runs = run_experiment(c);
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0].adapter, "Proposed");
  EXPECT_EQ(runs[1].adapter, "Baseline");
  EXPECT_EQ(runs[2].adapter, "Naive");
  EXPECT_EQ(runs[0].predictions, runs[1].predictions);
  EXPECT_EQ(runs[2].predictions, runs[1].predictions);
}

TEST(PipelineProperties, SameConfigSameBytes) {
  ExperimentConfig c = tiny_experiment();
  c.faults = {"teeth_crack"};
  EXPECT_EQ(metrics_text(run_experiment(c)), metrics_text(run_experiment(c)));
}

TEST(PipelineProperties, TrainThenStreamMatchesOneShot) {
  ExperimentConfig c = tiny_experiment();
  c.faults = {"gear_wear"};
  const auto direct = run_experiment(c);

  const ScenarioData data = materialize_for(c, 3);
  const SeedModel trained = train_seed(c, data, 3);
  const SeedModel loaded = load_seed(decode_checkpoint(encode_checkpoint(to_checkpoint(trained.artifact))), data);
  EXPECT_EQ(loaded.seed, 3u);
  EXPECT_EQ(loaded.bank->indices(), trained.bank->indices());
  EXPECT_EQ(metrics_text(run_fault(c, data, loaded, "gear_wear")), metrics_text(direct));
}

TEST(PipelineErrors, FailuresNameTheirStage) {
  auto stage_of = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const StageError& e) {
      return e.stage();
    }
    return "none";
  };
  ExperimentConfig bad_cfg = tiny_experiment();
  bad_cfg.block_size = 0;
  EXPECT_EQ(stage_of([&] { run_experiment(bad_cfg); }), "config");

  ExperimentConfig missing_csv = tiny_experiment();
  missing_csv.scenario.csv_sources["healthy@offline:0"] = "/nonexistent/healthy.csv";
  EXPECT_EQ(stage_of([&] { run_experiment(missing_csv); }), "datagen");

  ExperimentConfig bad_offline = tiny_experiment();
  bad_offline.offline.lr = 1e300;
  EXPECT_EQ(stage_of([&] { run_experiment(bad_offline); }), "offline");

  const ExperimentConfig c = tiny_experiment();
  const ScenarioData data = materialize_for(c, 3);
  Checkpoint ckpt = to_checkpoint(train_seed(c, data, 3).artifact);
  ckpt.header["config"]["offline"]["epochs"] = 99;
  EXPECT_EQ(stage_of([&] { load_seed(ckpt, data); }), "checkpoint");
  EXPECT_EQ(stage_of([&] { emit_report({}, c.out_dir); }), "report");
}
