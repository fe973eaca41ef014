#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "wicketlens/fixtures.hpp"
#include "wicketlens/segmenter.hpp"

namespace wl = wicketlens;

namespace {

wl::VideoMeta meta(double fps, long count, double start = 0.0) {
  wl::VideoMeta m;
  m.fps = fps;
  m.frame_count = count;
  m.width = 8;
  m.height = 8;
  m.start_time = start;
  return m;
}

wl::WicketEvent event_at(double t, int after = 1, int innings = 0) {
  wl::WicketEvent e;
  e.t = t;
  e.wickets_before = after - 1;
  e.wickets_after = after;
  e.runs_at_event = 50;
  e.innings_index = innings;
  return e;
}

wl::MatchScript script(std::vector<wl::ScoreChange> changes, double fps = 10.0, double duration = 10.0) {
  wl::MatchScript s;
  s.fps = fps;
  s.duration_s = duration;
  s.score_changes = std::move(changes);
  return s;
}

wl::SegmentationConfig config_for(const wl::MatchScript& s) {
  wl::SegmentationConfig cfg;
  cfg.roi = s.style.roi;
  cfg.score_format = s.style.order;
  return cfg;
}

}  // namespace

TEST(SampleTimeline, WorkedExamples) {
  const auto idx = wl::sample_timeline(meta(30, 300), 0.1);
  ASSERT_EQ(idx.size(), 100u);
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx[k], static_cast<long>(3 * k));
  const auto every = wl::sample_timeline(meta(25, 40), 1.0 / 25);
  ASSERT_EQ(every.size(), 40u);
  for (long k = 0; k < 40; ++k) EXPECT_EQ(every[k], k);
  EXPECT_TRUE(wl::sample_timeline(meta(30, 0), 0.1).empty());
  EXPECT_THROW((void)wl::sample_timeline(meta(30, 10), 0.0), wl::Error);
  EXPECT_THROW((void)wl::sample_timeline(meta(30, 10), -1.0), wl::Error);
}

TEST(SampleTimeline, DeduplicatesWhenIntervalIsBelowFramePeriod) {
  const auto idx = wl::sample_timeline(meta(10, 20), 0.03);
  EXPECT_EQ(idx.size(), 20u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
}

TEST(SampleTimeline, ArithmeticOracleOnOddRates) {
  for (double fps : {23.976, 29.97, 50.0, 59.94})
    for (double interval : {0.1, 0.25, 0.5}) {
      const long count = 1000;
      const auto idx = wl::sample_timeline(meta(fps, count), interval);
      std::vector<long> expect;
      for (long k = 0;; ++k) {
        const long i = static_cast<long>(std::floor(k * interval * fps + 0.5));
        if (i >= count) break;
        if (expect.empty() || i > expect.back()) expect.push_back(i);
      }
      EXPECT_EQ(idx, expect) << fps << " " << interval;
    }
}

TEST(EventToClip, WorkedExamples) {
  const auto m = meta(30, 1800);
  auto c = wl::event_to_clip(event_at(30.0), {}, m);
  EXPECT_DOUBLE_EQ(c.start_s, 22.0);
  EXPECT_DOUBLE_EQ(c.end_s, 32.5);
  EXPECT_EQ(c.frame_start, 660);
  EXPECT_EQ(c.frame_end, 975);
  c = wl::event_to_clip(event_at(3.0), {}, m);
  EXPECT_DOUBLE_EQ(c.start_s, 0.0);
  EXPECT_DOUBLE_EQ(c.end_s, 5.5);
  c = wl::event_to_clip(event_at(12.0), {0.0, 0.0}, m);
  EXPECT_DOUBLE_EQ(c.start_s, 12.0);
  EXPECT_DOUBLE_EQ(c.end_s, 12.0 + 1.0 / 30);
  EXPECT_LE(c.frame_start, c.frame_end);
}

TEST(EventToClip, ClampsToDurationAndLabels) {
  const auto m = meta(10, 100);
  const auto c = wl::event_to_clip(event_at(9.5, 3, 1), {}, m);
  EXPECT_DOUBLE_EQ(c.end_s, 10.0);
  EXPECT_EQ(c.frame_end, 99);
  EXPECT_EQ(c.label, "wicket_2_3");
  EXPECT_THROW((void)wl::event_to_clip(event_at(1), {-1.0, 2.0}, m), wl::Error);
}

TEST(EventToClip, HonoursStartTime) {
  const auto m = meta(10, 100, 100.0);
  const auto c = wl::event_to_clip(event_at(103.0), {}, m);
  EXPECT_DOUBLE_EQ(c.start_s, 100.0);
  EXPECT_DOUBLE_EQ(c.end_s, 105.5);
  EXPECT_EQ(c.frame_start, 0);
  EXPECT_EQ(c.frame_end, 55);
}

TEST(EventToClip, InvariantsOnRandomEvents) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double fps = 5 + 55 * u(rng);
    const long count = 1 + static_cast<long>(rng() % 5000);
    const auto m = meta(fps, count);
    const double t = m.duration() * u(rng);
    const auto c = wl::event_to_clip(event_at(t), {10 * u(rng), 10 * u(rng)}, m);
    ASSERT_LT(c.start_s, c.end_s);
    ASSERT_GE(c.start_s, 0.0);
    ASSERT_LE(c.frame_start, c.frame_end);
    ASSERT_GE(c.frame_start, 0);
    ASSERT_LT(c.frame_end, std::max(1L, count));
  }
}

TEST(Manifest, EmptyAndSingleShapes) {
  EXPECT_EQ(wl::clip_manifest_json({}), "[]\n");
  const auto clip = wl::event_to_clip(event_at(30.0, 4), {}, meta(30, 1800));
  EXPECT_EQ(wl::clip_manifest_json({clip}),
            "[\n"
            "  {\n"
            "    \"label\": \"wicket_1_4\",\n"
            "    \"innings\": 1,\n"
            "    \"wicket_number\": 4,\n"
            "    \"start_s\": 22.0,\n"
            "    \"end_s\": 32.5,\n"
            "    \"frame_start\": 660,\n"
            "    \"frame_end\": 975,\n"
            "    \"runs_at_event\": 50\n"
            "  }\n"
            "]\n");
}

TEST(Manifest, RandomRoundTrip) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 600.0);
  wl::testing::TempDir dir;
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = meta(25 + static_cast<double>(rng() % 35), 18000);
    std::vector<wl::ClipSpec> clips;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      auto e = event_at(u(rng), 1 + static_cast<int>(rng() % 10), static_cast<int>(rng() % 3));
      e.runs_at_event = static_cast<int>(rng() % 400);
      clips.push_back(wl::event_to_clip(e, {8.0 * u(rng) / 600.0, 2.5}, m));
    }
    const auto path = dir / "m.json";
    wl::emit_clip_manifest(clips, path);
    EXPECT_EQ(wl::read_clip_manifest(path), clips);
  }
}

TEST(Manifest, RejectsMalformed) {
  EXPECT_THROW((void)wl::parse_clip_manifest("{}"), wl::Error);
  EXPECT_THROW((void)wl::parse_clip_manifest("[{\"label\": 3}]"), wl::Error);
  EXPECT_THROW((void)wl::parse_clip_manifest("[not json"), wl::Error);
}

TEST(VideoMetaFile, RoundTripAndValidation) {
  wl::testing::TempDir dir;
  const auto m = meta(29.97, 1234, 1.5);
  wl::write_video_meta(dir / "meta.json", m);
  const auto back = wl::read_video_meta(dir / "meta.json");
  EXPECT_EQ(back.fps, m.fps);
  EXPECT_EQ(back.frame_count, m.frame_count);
  EXPECT_EQ(back.start_time, m.start_time);
  wl::write_text_file(dir / "bad.json", "{\"fps\": 0, \"frame_count\": 3}");
  EXPECT_THROW((void)wl::read_video_meta(dir / "bad.json"), wl::Error);
}

TEST(RunSegmentation, OneWicketAtFrame150) {
  auto s = script({{0.0, 45, 1}, {5.0, 47, 2}}, 30.0, 10.0);
  const auto result = wl::run_segmentation(wl::script_frame_source(s), config_for(s));
  ASSERT_EQ(result.events.size(), 1u);
  EXPECT_LE(std::abs(result.events[0].t - 5.0), 0.1);
  EXPECT_EQ(result.events[0].wickets_after, 2);
  EXPECT_EQ(result.events[0].runs_at_event, 47);
  ASSERT_EQ(result.clips.size(), 1u);
  EXPECT_EQ(result.clips[0].label, "wicket_1_2");
  EXPECT_EQ(result.score_log.size(), 100u);
  EXPECT_TRUE(result.warnings.empty());
}

TEST(RunSegmentation, ConstantScoreHasNoEvents) {
  auto s = script({{0.0, 12, 3}}, 10.0, 3.0);
  const auto result = wl::run_segmentation(wl::script_frame_source(s), config_for(s));
  EXPECT_TRUE(result.events.empty());
  EXPECT_TRUE(result.clips.empty());
  for (const auto& e : result.score_log) EXPECT_EQ(e.text, "12-3");
}

TEST(RunSegmentation, TwoWicketsTenSecondsApart) {
  auto s = script({{0.0, 30, 0}, {2.0, 31, 1}, {12.0, 40, 2}}, 10.0, 14.0);
  s.style.separator = '/';
  s.style.order = wl::ScoreFormat::WicketsFirst;
  const auto result = wl::run_segmentation(wl::script_frame_source(s), config_for(s));
  ASSERT_EQ(result.clips.size(), 2u);
  EXPECT_EQ(result.clips[0].label, "wicket_1_1");
  EXPECT_EQ(result.clips[1].label, "wicket_1_2");
  EXPECT_LT(result.clips[0].event.t, result.clips[1].event.t);
  EXPECT_NEAR(result.events[0].t, 2.0, 0.1 + 1e-9);
  EXPECT_NEAR(result.events[1].t, 12.0, 0.1 + 1e-9);
}

TEST(RunSegmentation, DeterministicAcrossJobCounts) {
  auto s = script({{0.0, 5, 0}, {1.0, 9, 1}, {2.0, 9, 2}}, 10.0, 3.0);
  s.noise_density = 0.01;
  auto cfg = config_for(s);
  cfg.jobs = 1;
  const auto a = wl::run_segmentation(wl::script_frame_source(s), cfg);
  cfg.jobs = 4;
  const auto b = wl::run_segmentation(wl::script_frame_source(s), cfg);
  EXPECT_EQ(wl::clip_manifest_json(a.clips), wl::clip_manifest_json(b.clips));
  EXPECT_EQ(wl::score_log_json(a.score_log), wl::score_log_json(b.score_log));
  EXPECT_EQ(a.events.size(), 2u);
}

TEST(RunSegmentation, UnreadableFramesWarnThenFail) {
  auto s = script({{0.0, 5, 0}}, 10.0, 2.0);
  auto src = wl::script_frame_source(s);
  auto inner = src.load;
  src.load = [inner](long i) -> wl::RasterImage {
    if (i % 4 == 3) throw wl::Error(wl::ErrorKind::Io, "gone");
    return inner(i);
  };
  const auto ok = wl::run_segmentation(src, config_for(s));
  EXPECT_EQ(ok.warnings.size(), 5u);
  std::size_t unreadable = 0;
  for (const auto& e : ok.score_log) unreadable += e.status == "unreadable";
  EXPECT_EQ(unreadable, 5u);

  src.load = [inner](long i) -> wl::RasterImage {
    if (i % 4 != 0) throw wl::Error(wl::ErrorKind::Io, "gone");
    return inner(i);
  };
  try {
    (void)wl::run_segmentation(src, config_for(s));
    FAIL();
  } catch (const wl::Error& e) {
    EXPECT_EQ(e.kind(), wl::ErrorKind::InvalidInput);
  }
}

TEST(RunSegmentation, FailingExternalEngineIsOcrError) {
  auto s = script({{0.0, 5, 0}}, 10.0, 0.5);
  auto cfg = config_for(s);
  cfg.ocr.kind = wl::OcrEngineKind::External;
  cfg.ocr.command = "exit 1";
  try {
    (void)wl::run_segmentation(wl::script_frame_source(s), cfg);
    FAIL();
  } catch (const wl::Error& e) {
    EXPECT_EQ(e.kind(), wl::ErrorKind::OcrEngine);
  }
}

TEST(RunSegmentation, ExternalEngineDrivesTracker) {
  wl::testing::TempDir dir;
  // A stub engine that reads the score from a counter file: 10-0 for the
  // first four calls, then 10-1.
  const auto counter = dir / "n";
  wl::write_text_file(counter, "0");
  const auto engine = dir / "ocr.sh";
  wl::write_text_file(engine, "#!/bin/sh\nn=$(cat \"$2\")\necho $((n+1)) > \"$2\"\n"
                              "if [ \"$n\" -lt 4 ]; then echo 10-0; else echo 10-1; fi\n");
  auto s = script({{0.0, 0, 0}}, 10.0, 1.0);
  auto cfg = config_for(s);
  cfg.jobs = 1;
  cfg.ocr.kind = wl::OcrEngineKind::External;
  cfg.ocr.command = "/bin/sh " + wl::shell_quote(engine.string()) + " {input} " + wl::shell_quote(counter.string());
  const auto r = wl::run_segmentation(wl::script_frame_source(s), cfg);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_DOUBLE_EQ(r.events[0].t, 0.4);
}

TEST(RunSegmentation, RoiOutsideFrameIsFatal) {
  auto s = script({{0.0, 5, 0}}, 10.0, 0.5);
  auto cfg = config_for(s);
  cfg.roi = wl::Roi{600, 0, 200, 10};
  EXPECT_THROW((void)wl::run_segmentation(wl::script_frame_source(s), cfg), wl::Error);
}

TEST(DirectorySource, ReadsGeneratedFrames) {
  wl::testing::TempDir dir;
  auto s = script({{0.0, 5, 0}, {1.0, 6, 1}}, 10.0, 2.0);
  wl::gen_match_sequence(s, dir.path());
  const auto src = wl::directory_frame_source(dir.path());
  EXPECT_EQ(src.meta.frame_count, 20);
  EXPECT_EQ(src.load(3), wl::render_script_frame(s, 3));
  EXPECT_THROW((void)src.load(20), wl::Error);
  const auto r = wl::run_segmentation(src, config_for(s));
  EXPECT_EQ(r.events.size(), 1u);
}

TEST(ScoreLog, RecordsEveryDecision) {
  auto s = script({{0.0, 5, 0}, {1.0, 6, 1}}, 10.0, 2.0);
  const auto r = wl::run_segmentation(wl::script_frame_source(s), config_for(s));
  const auto log = nlohmann::json::parse(wl::score_log_json(r.score_log));
  ASSERT_EQ(log.size(), 20u);
  EXPECT_EQ(log[0]["decision"], "pending");
  EXPECT_EQ(log[1]["decision"], "initial");
  EXPECT_EQ(log[2]["decision"], "confirmed");
  EXPECT_EQ(log[11]["decision"], "accepted");
  EXPECT_EQ(log[11]["runs"], 6);
  EXPECT_EQ(log[11]["text"], "6-1");
}

TEST(Trimmer, InvokesPerClipAndWarnsOnFailure) {
  wl::testing::TempDir dir;
  std::vector<wl::ClipSpec> clips = {wl::event_to_clip(event_at(5.0, 1), {}, meta(10, 100)),
                                     wl::event_to_clip(event_at(8.0, 2), {}, meta(10, 100))};
  wl::TrimmerConfig trim;
  trim.command = "echo {input} {start} {end} > {output}";
  trim.input = "match.mp4";
  trim.output_dir = dir / "clips";
  EXPECT_TRUE(wl::run_trimmer(clips, trim).empty());
  EXPECT_EQ(wl::read_text_file(dir / "clips/wicket_1_1.mp4"), "match.mp4 0.0 7.5\n");

  trim.command = "exit 3";
  const auto warnings = wl::run_trimmer(clips, trim);
  ASSERT_EQ(warnings.size(), 2u);
  EXPECT_NE(warnings[0].find("status 3"), std::string::npos);
}
