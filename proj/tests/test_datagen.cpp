#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "atta/datagen/csv.hpp"
#include "atta/datagen/scenario.hpp"
#include "atta/datagen/stream.hpp"
#include "atta/datagen/synth.hpp"
#include "atta/datagen/window.hpp"

namespace atta {
namespace {

// Direct DFT magnitude at an arbitrary frequency (Hann window). Independent
// of the generator's own phase bookkeeping.
double dft_magnitude(const RowVector& x, double freq_hz, double fs) {
  double re = 0.0;
  double im = 0.0;
  const auto n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
    const double ph = 2.0 * std::numbers::pi * freq_hz * i / fs;
    re += w * x(i) * std::cos(ph);
    im -= w * x(i) * std::sin(ph);
  }
  return std::hypot(re, im);
}

double peak_frequency(const RowVector& x, double lo, double hi, double step, double fs) {
  double best_f = lo;
  double best = -1.0;
  for (double f = lo; f <= hi; f += step) {
    const double m = dft_magnitude(x, f, fs);
    if (m > best) {
      best = m;
      best_f = f;
    }
  }
  return best_f;
}

RawRecording tiny_recording(std::size_t length, int label = 1) {
  RawRecording r;
  r.channels = Matrix::Zero(6, static_cast<Eigen::Index>(length));
  for (Eigen::Index c = 0; c < 6; ++c)
    for (Eigen::Index i = 0; i < r.channels.cols(); ++i) r.channels(c, i) = 1000.0 * c + i;
  r.fault_label = label;
  r.condition_trace.assign(length, 2);
  return r;
}

TEST(Synth, SteadyHealthyMeshPeak) {
  auto rec = synth_generate(ConditionProfile::steady(1000, 20, 1.0), 0, 1);
  ASSERT_EQ(rec.length(), 12800u);
  // gearbox-side channel, whole band above the shaft harmonics
  const RowVector ch = rec.channels.row(3);
  const double coarse = peak_frequency(ch, 60.0, 6000.0, 5.0, kSampleRateHz);
  const double fine = peak_frequency(ch, coarse - 5.0, coarse + 5.0, 0.25, kSampleRateHz);
  EXPECT_NEAR(fine, 36.0 * 1000.0 / 60.0, 1.0);
}

TEST(Synth, RampMidpointMeshFrequency) {
  ConditionProfile p{Ramp{2000, 1500}, Ramp::constant(20), 2.0, kSampleRateHz};
  auto rec = synth_generate(p, 0, 2);
  const auto mid = static_cast<Eigen::Index>(rec.length() / 2);
  const RowVector seg = rec.channels.row(4).segment(mid - 512, 1024);
  const double f = peak_frequency(seg, 700.0, 1400.0, 1.0, kSampleRateHz);
  EXPECT_NEAR(f, 36.0 * 1750.0 / 60.0, 12.0);
  EXPECT_EQ(rec.condition_trace[0], kTransitionalCondition);
}

TEST(Synth, PureFunctionOfInputs) {
  auto p = ConditionProfile::steady(1500, 15, 0.2);
  auto a = synth_generate(p, 4, 9);
  auto b = synth_generate(p, 4, 9);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_NE(a.channels, synth_generate(p, 4, 10).channels);
  EXPECT_NE(a.channels, synth_generate(p, 1, 9).channels);
}

TEST(Synth, FaultSignaturesDifferFromHealthy) {
  auto p = ConditionProfile::steady(1000, 20, 0.5);
  SynthConfig quiet;
  quiet.snr_db = 200.0;
  auto healthy = synth_generate(p, 0, 3, quiet);
  for (int f = 1; f < 6; ++f) {
    auto faulty = synth_generate(p, f, 3, quiet);
    EXPECT_GT((faulty.channels - healthy.channels).norm(), 0.05 * healthy.channels.norm())
        << kFaultNames[static_cast<std::size_t>(f)];
  }
  // pitting shows the lower sideband at mesh − f_r
  auto pitting = synth_generate(p, 4, 3, quiet);
  const RowVector hp = healthy.channels.row(3);
  const RowVector pp = pitting.channels.row(3);
  const double side = 600.0 - 1000.0 / 60.0;
  EXPECT_GT(dft_magnitude(pp, side, kSampleRateHz), 10.0 * dft_magnitude(hp, side, kSampleRateHz));
}

TEST(Synth, RejectsUnknownFaultAndBadProfile) {
  EXPECT_THROW(synth_generate(ConditionProfile::steady(1000, 20, 0.1), 17, 0), ConfigError);
  EXPECT_THROW(synth_generate(ConditionProfile::steady(-5, 20, 0.1), 0, 0), ConfigError);
}

TEST(Window, CountFormula) {
  EXPECT_EQ(window_segment(tiny_recording(1024)).size(), 1u);
  EXPECT_EQ(window_segment(tiny_recording(1040)).size(), 2u);
  EXPECT_EQ(window_segment(tiny_recording(2048)).size(), 65u);
  EXPECT_EQ(window_count(2048), (2048u - 1024u) / 16u + 1u);
  EXPECT_THROW(window_segment(tiny_recording(1023)), DataError);
}

TEST(Window, ChannelMajorLayoutAndOverlap) {
  auto rec = tiny_recording(1200);
  rec.condition_trace[16] = 7;
  auto w = window_segment(rec);
  ASSERT_EQ(w[0].x.cols(), 6144);
  for (Eigen::Index c = 0; c < 6; ++c) {
    EXPECT_EQ(w[0].x(0, c * 1024), 1000.0 * c);
    EXPECT_EQ(w[0].x(0, c * 1024 + 1023), 1000.0 * c + 1023);
  }
  // adjacent windows share 1008 points per channel
  for (Eigen::Index c = 0; c < 6; ++c) {
    EXPECT_EQ(w[1].x.block(0, c * 1024, 1, 1008), w[0].x.block(0, c * 1024 + 16, 1, 1008));
  }
  EXPECT_EQ(*w[0].label, 1);
  EXPECT_EQ(*w[0].condition, 2);
  EXPECT_EQ(*w[1].condition, 7);
  // never reads past the end
  const auto& last = w.back();
  EXPECT_EQ(last.x(0, 1023), rec.channels(0, 1199 - ((1200 - 1024) % 16)));
}

TEST(Window, SampleSetMatchesSampleList) {
  auto rec = tiny_recording(1100);
  auto list = window_segment(rec);
  auto set = window_set(rec);
  ASSERT_EQ(set.size(), list.size());
  for (std::size_t i = 0; i < list.size(); ++i) EXPECT_EQ(set.x.row(i), list[i].x.row(0));
}

SampleSet ordered_group(std::size_t n, int label) {
  SampleSet s;
  s.x.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    s.x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    s.x(static_cast<Eigen::Index>(i), 1) = label;
    s.labels.push_back(label);
    s.conditions.push_back(0);
  }
  return s;
}

TEST(Split, TenPercentWithFloorOfOne) {
  auto split = split_offline_online({ordered_group(100, 0), ordered_group(9, 1)});
  ASSERT_EQ(split.online.size(), 2u);
  EXPECT_EQ(split.online[0].size(), 90u);
  EXPECT_EQ(split.online[1].size(), 8u);
  EXPECT_EQ(split.offline.size(), 11u);
  // leading samples offline, remainder online, no overlap
  EXPECT_EQ(split.offline.x(9, 0), 9.0);
  EXPECT_EQ(split.online[0].x(0, 0), 10.0);
  EXPECT_EQ(split.offline.x(10, 0), 0.0);
  EXPECT_EQ(split.online[1].x(0, 0), 1.0);
  std::set<std::pair<double, double>> off;
  for (Eigen::Index r = 0; r < split.offline.x.rows(); ++r)
    off.insert({split.offline.x(r, 0), split.offline.x(r, 1)});
  for (const auto& g : split.online)
    for (Eigen::Index r = 0; r < g.x.rows(); ++r) EXPECT_FALSE(off.count({g.x(r, 0), g.x(r, 1)}));
}

std::vector<SegmentPools> pools_of(std::vector<std::size_t> lengths, int classes = 3) {
  std::vector<SegmentPools> out;
  double tag = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    SegmentPools p;
    p.tag = "seg" + std::to_string(s);
    for (int k = 0; k < classes; ++k) {
      SampleSet g = ordered_group(lengths[s], k);
      g.x.col(0).array() += tag;
      p.by_class.push_back(g);
    }
    tag += 10000;
    out.push_back(p);
  }
  return out;
}

TEST(Stream, FaultScheduleBoundaries) {
  Stream s = build_stream(pools_of({400}), 2, 64);
  ASSERT_EQ(s.total, 400u);
  std::vector<int> truth;
  for (const auto& b : s.blocks) {
    const auto& l = HiddenTruth::labels(b);
    truth.insert(truth.end(), l.begin(), l.end());
  }
  for (std::size_t i = 0; i < 400; ++i) {
    const bool faulty = (i >= 100 && i <= 199) || (i >= 300 && i <= 399);
    EXPECT_EQ(truth[i], faulty ? 2 : 0) << i;
  }
}

TEST(Stream, BlocksPartitionTheSequence) {
  Stream s = build_stream(pools_of({150, 100, 150}), 1, 64);
  ASSERT_EQ(s.total, 400u);
  ASSERT_EQ(s.blocks.size(), 7u);
  for (std::size_t b = 0; b < 6; ++b) EXPECT_EQ(s.blocks[b].size(), 64u);
  EXPECT_EQ(s.blocks[6].size(), 16u);
  for (std::size_t b = 0; b < 7; ++b) EXPECT_EQ(s.blocks[b].index(), b + 1);

  // order preserved, nothing duplicated: x(·,0) encodes (segment, position)
  std::vector<double> seen;
  for (const auto& b : s.blocks)
    for (Eigen::Index r = 0; r < b.samples().rows(); ++r) seen.push_back(b.samples()(r, 0));
  ASSERT_EQ(seen.size(), 400u);
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LT(seen[i - 1], seen[i]);

  ASSERT_EQ(s.segments.size(), 3u);
  EXPECT_EQ(s.segments[1].begin, 150u);
  EXPECT_EQ(s.segments[1].end, 250u);
  EXPECT_EQ(s.segment_of_sample()[249], 1);
}

TEST(Stream, Errors) {
  EXPECT_THROW(build_stream({}, 1, 64), DataError);
  EXPECT_THROW(build_stream(pools_of({0}), 1, 64), DataError);
  EXPECT_THROW(build_stream(pools_of({10}), 5, 64), DataError);
  EXPECT_THROW(build_stream(pools_of({10}), 1, 0), ConfigError);
}

TEST(Scenario, TableOrdering) {
  ScenarioSpec one = scenario_one();
  ASSERT_EQ(one.online_segments.size(), 3u);
  EXPECT_EQ(one.offline_conditions[*one.online_segments[0].steady_source].torque_nm.start, 20.0);
  EXPECT_EQ(one.online_segments[1].profile->torque_nm, (Ramp{20, 15}));
  EXPECT_EQ(one.online_segments[1].profile->kind(), ConditionKind::kTransitional);
  EXPECT_EQ(one.offline_conditions[*one.online_segments[2].steady_source].torque_nm.start, 15.0);

  ScenarioSpec two = scenario_two();
  EXPECT_EQ(two.offline_conditions[*two.online_segments[0].steady_source].speed_rpm.start, 2000.0);
  EXPECT_EQ(two.online_segments[1].profile->speed_rpm, (Ramp{2000, 1500}));
  EXPECT_EQ(two.offline_conditions[*two.online_segments[2].steady_source].speed_rpm.start, 1500.0);
}

TEST(Scenario, JsonRoundTrip) {
  ScenarioSpec s = scenario_two(0.3, 0.2);
  s.csv_sources["healthy@offline:0"] = "/tmp/x.csv";
  ScenarioSpec back = scenario_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  nlohmann::json bad = to_json(s);
  bad["classes"] = {"gear_wear", "healthy"};
  EXPECT_THROW(scenario_from_json(bad), ConfigError);
}

TEST(Scenario, MaterializeSplitsPerClassAndCondition) {
  ScenarioSpec s = scenario_one(0.1, 0.1);  // 1280 samples → 17 windows per recording
  ScenarioData d = materialize(s, 5);
  const std::size_t per_group = window_count(1280);
  ASSERT_EQ(per_group, 17u);
  EXPECT_EQ(d.offline.size(), 4u * 3u * offline_count(per_group));
  for (int c : d.offline.conditions) {
    EXPECT_GE(c, 0);
    EXPECT_LT(c, 3);
  }
  ASSERT_EQ(d.online.size(), 3u);
  EXPECT_EQ(d.online[0].by_class[0].size(), per_group - offline_count(per_group));
  EXPECT_EQ(d.online[1].by_class[2].size(), per_group);
  EXPECT_EQ(d.online[1].by_class[2].conditions[0], kTransitionalCondition);
  EXPECT_EQ(d.online[1].by_class[2].labels[0], 2);
  // deterministic
  EXPECT_EQ(materialize(s, 5).offline.x, d.offline.x);
}

class CsvTest : public ::testing::Test {
 protected:
  std::string path(const std::string& name) { return ::testing::TempDir() + "/" + name; }
  void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }
};

TEST_F(CsvTest, LoadsSixColumns) {
  write(path("six.csv"), "ch1,ch2,ch3,ch4,ch5,ch6\n1,2,3,4,5,6\n7,8,9,10,11,12\n0.5,1e-3,-2,3,4,5\n");
  auto rec = load_csv(path("six.csv"), 2);
  EXPECT_EQ(rec.length(), 3u);
  EXPECT_EQ(rec.channels(5, 1), 12.0);
  EXPECT_EQ(rec.channels(1, 2), 1e-3);
  EXPECT_EQ(rec.fault_label, 2);
  EXPECT_TRUE(rec.rpm.empty());
}

TEST_F(CsvTest, SchemaAndParseErrors) {
  write(path("five.csv"), "ch1,ch2,ch3,ch4,ch5\n1,2,3,4,5\n");
  EXPECT_THROW(load_csv(path("five.csv")), SchemaError);
  write(path("bad.csv"), "ch1,ch2,ch3,ch4,ch5,ch6\n1,2,3,4,5,6\n1,2,x,4,5,6\n");
  try {
    load_csv(path("bad.csv"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write(path("short.csv"), "ch1,ch2,ch3,ch4,ch5,ch6\n1,2,3,4,5\n");
  EXPECT_THROW(load_csv(path("short.csv")), ParseError);
  EXPECT_THROW(load_csv(path("missing.csv")), DataError);
}

TEST_F(CsvTest, SynthRoundTrip) {
  auto rec = synth_generate(ConditionProfile{Ramp{1200, 1100}, Ramp::constant(12), 0.1,
                                             kSampleRateHz},
                            2, 4);
  write_csv(rec, path("synth.csv"));
  auto back = load_csv(path("synth.csv"), rec.fault_label);
  EXPECT_EQ(back.channels, rec.channels);
  EXPECT_EQ(back.rpm, rec.rpm);
  EXPECT_EQ(back.torque, rec.torque);
}

}  // namespace
}  // namespace atta
