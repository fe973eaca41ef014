#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "wicketlens/detections.hpp"
#include "wicketlens/error.hpp"
#include "wicketlens/ocr.hpp"
#include "wicketlens/pnm.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/scoreparse.hpp"
#include "wicketlens/segmenter.hpp"
#include "wicketlens/trajectory.hpp"

namespace wicketlens {

struct ScoreboardStyle {
  char separator = '-';
  ScoreFormat order = ScoreFormat::RunsFirst;  // RunsFirst or WicketsFirst
  int glyph_scale = 18;
  Roi roi{10, 14, 680, 162};
};

struct FrameSize {
  int width = 700;
  int height = 190;
};

// BGR fill outside the scoreboard; dark enough to vanish under the gamma stage.
inline constexpr std::uint8_t kFieldColor[3] = {40, 110, 40};

/// Black scoreboard box at style.roi with white text, left-aligned one glyph
/// pixel in from the box edge and vertically centred.
inline RasterImage render_scoreboard_frame(int runs, int wickets, const ScoreboardStyle& style, FrameSize size = {}) {
  if (runs < 0 || runs > kMaxRuns || wickets < 0 || wickets > kMaxWickets)
    throw Error(ErrorKind::Validation, "score out of range");
  if (style.order == ScoreFormat::Auto) throw Error(ErrorKind::Validation, "render style needs a fixed order");
  if (style.separator != '-' && style.separator != '/') throw Error(ErrorKind::Validation, "separator must be - or /");
  RasterImage img(size.width, size.height, 3);
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = kFieldColor[c];
  if (!style.roi.fits(img)) throw Error(ErrorKind::Layout, "scoreboard roi outside frame");
  for (int y = style.roi.y; y < style.roi.y + style.roi.h; ++y)
    for (int x = style.roi.x; x < style.roi.x + style.roi.w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0;

  const auto text = format_score(runs, wickets, style.separator, style.order);
  const int s = style.glyph_scale;
  const int text_h = kGlyphRows * s;
  if (text_width(text, s) + 2 * s > style.roi.w || text_h + 2 * s > style.roi.h)
    throw Error(ErrorKind::Layout, "scoreboard roi too small for '" + text + "' at scale " + std::to_string(s));
  draw_text(img, text, style.roi.x + s, style.roi.y + (style.roi.h - text_h) / 2, s, 255);
  return img;
}

struct ScoreChange {
  double t = 0.0;
  int runs = 0;
  int wickets = 0;
};

struct MatchScript {
  double fps = 10.0;
  double duration_s = 10.0;
  std::vector<ScoreChange> score_changes;
  ScoreboardStyle style;
  FrameSize frame;
  double noise_density = 0.0;  // fraction of pixels flipped per frame, <= 0.05
  std::uint64_t seed = 1;

  [[nodiscard]] long frame_count() const { return std::lround(duration_s * fps); }
};

struct GroundTruth {
  std::uint64_t seed = 0;
  double noise_density = 0.0;
  VideoMeta meta;
  std::vector<WicketEvent> events;
};

/// Validates the script and derives the wicket events it implies. A decrease
/// between changes must read as an innings reset.
inline std::vector<WicketEvent> scripted_events(const MatchScript& script) {
  if (!(script.fps > 0.0) || !(script.duration_s > 0.0))
    throw Error(ErrorKind::Validation, "script fps and duration must be positive");
  if (script.noise_density < 0.0 || script.noise_density > 0.05)
    throw Error(ErrorKind::Validation, "noise density must be in [0, 0.05]");
  std::vector<WicketEvent> events;
  int innings = 0;
  for (std::size_t i = 0; i < script.score_changes.size(); ++i) {
    const auto& c = script.score_changes[i];
    if (c.runs < 0 || c.runs > kMaxRuns || c.wickets < 0 || c.wickets > kMaxWickets)
      throw Error(ErrorKind::Validation, "scripted score out of range");
    if (i == 0) continue;
    const auto& p = script.score_changes[i - 1];
    if (c.t < p.t) throw Error(ErrorKind::Validation, "score changes must be ordered in time");
    ScoreReading prev;
    prev.runs = p.runs;
    prev.wickets = p.wickets;
    ScoreReading next;
    next.runs = c.runs;
    next.wickets = c.wickets;
    if (c.runs < p.runs || c.wickets < p.wickets) {
      if (!detect_innings_reset(prev, next))
        throw Error(ErrorKind::Validation, "score decreases without an innings reset");
      ++innings;
      continue;
    }
    if (c.wickets - p.wickets > 2) throw Error(ErrorKind::Validation, "more than two wickets in one score change");
    const long frame = static_cast<long>(std::ceil(c.t * script.fps - 1e-9));
    for (int w = p.wickets; w < c.wickets; ++w) events.push_back({c.t, frame, w, w + 1, c.runs, innings});
  }
  return events;
}

/// Flips (255 - v, all channels) each pixel with probability `density`, using
/// raw 64-bit draws so the pattern is identical on every standard library.
inline void add_flip_noise(RasterImage& img, double density, std::uint64_t seed) {
  if (density <= 0.0) return;
  std::mt19937_64 gen(seed);
  const auto limit = static_cast<std::uint64_t>(density * 9007199254740992.0);  // density * 2^53
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if ((gen() >> 11) < limit)
        for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = static_cast<std::uint8_t>(255 - img.at(x, y, c));
}

inline std::uint64_t frame_seed(std::uint64_t seed, long frame) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(frame + 1));
}

/// Score on screen at frame `index`; nullopt before the first change.
inline std::optional<ScoreChange> score_at_frame(const MatchScript& script, long index) {
  std::optional<ScoreChange> cur;
  for (const auto& c : script.score_changes)
    if (c.t * script.fps <= static_cast<double>(index) + 1e-9) cur = c;
  return cur;
}

inline RasterImage render_script_frame(const MatchScript& script, long index) {
  RasterImage img;
  if (auto score = score_at_frame(script, index)) {
    img = render_scoreboard_frame(score->runs, score->wickets, script.style, script.frame);
  } else {
    img = RasterImage(script.frame.width, script.frame.height, 3);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = kFieldColor[c];
  }
  add_flip_noise(img, script.noise_density, frame_seed(script.seed, index));
  return img;
}

inline std::string ground_truth_json(const GroundTruth& gt) {
  nlohmann::ordered_json j;
  j["seed"] = gt.seed;
  j["noise_density"] = gt.noise_density;
  j["fps"] = gt.meta.fps;
  j["frame_count"] = gt.meta.frame_count;
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : gt.events) {
    nlohmann::ordered_json o;
    o["t"] = e.t;
    o["frame_index"] = e.frame_index;
    o["innings"] = e.innings_index + 1;
    o["wickets_before"] = e.wickets_before;
    o["wickets_after"] = e.wickets_after;
    o["runs"] = e.runs_at_event;
    events.push_back(std::move(o));
  }
  j["events"] = std::move(events);
  return j.dump(2) + "\n";
}

/// Frames rendered on demand, for driving the segmenter without touching disk.
inline FrameSource script_frame_source(const MatchScript& script) {
  scripted_events(script);
  FrameSource src;
  src.meta = {script.fps, script.frame_count(), script.frame.width, script.frame.height, 0.0};
  src.load = [script](long index) { return render_script_frame(script, index); };
  return src;
}

/// Writes frame_%06d.ppm for every frame plus meta.json, and returns the
/// scripted ground truth.
inline GroundTruth gen_match_sequence(const MatchScript& script, const std::filesystem::path& out_dir,
                                      unsigned jobs = 1) {
  GroundTruth gt;
  gt.events = scripted_events(script);
  gt.seed = script.seed;
  gt.noise_density = script.noise_density;
  gt.meta = {script.fps, script.frame_count(), script.frame.width, script.frame.height, 0.0};
  std::filesystem::create_directories(out_dir);
  detail::parallel_for(static_cast<std::size_t>(gt.meta.frame_count), jobs, [&](std::size_t i) {
    const long index = static_cast<long>(i);
    write_image(out_dir / (frame_stem(index) + ".ppm"), render_script_frame(script, index));
  });
  write_video_meta(out_dir / "meta.json", gt.meta);
  return gt;
}

// ---------------------------------------------------------------------------
// Detection fixtures

struct DetectionFixtureSpec {
  long frame_start = 0;
  long frame_end = 0;
  BBoxNorm pitch{0.5, 0.5, 0.4, 0.8};
  std::function<PitchCoords(double)> path;  // s in [0,1] across the frame range
  double ball_size = 0.01;
  double pitch_confidence = 0.95;
  double ball_confidence = 0.9;
};

/// Polynomial path in s: u = sum u_coeffs[i] * s^i, likewise v.
inline std::function<PitchCoords(double)> polynomial_path(std::vector<double> u_coeffs, std::vector<double> v_coeffs) {
  return [u = std::move(u_coeffs), v = std::move(v_coeffs)](double s) {
    auto eval = [s](const std::vector<double>& c) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
      return acc;
    };
    return PitchCoords{eval(u), eval(v)};
  };
}

/// Writes pitch/ and ball/ YOLO files for the frame range; returns the
/// scripted (u, v) per frame. Existing files for other frames are kept.
inline std::vector<TrajectoryPoint> gen_detection_fixture(const DetectionFixtureSpec& spec,
                                                          const std::filesystem::path& out_dir,
                                                          const VideoMeta& meta) {
  if (spec.frame_end < spec.frame_start || spec.frame_start < 0)
    throw Error(ErrorKind::Validation, "detection fixture frame range is empty");
  if (!spec.pitch.valid()) throw Error(ErrorKind::Validation, "pitch box outside normalized range");
  if (!spec.path) throw Error(ErrorKind::Validation, "detection fixture has no path");
  const double x0 = spec.pitch.x_min();
  const double y0 = spec.pitch.y_min();
  const double pw = spec.pitch.x_max() - x0;
  const double ph = spec.pitch.y_max() - y0;

  std::vector<TrajectoryPoint> truth;
  std::vector<std::pair<long, BBoxNorm>> balls;
  const long span = spec.frame_end - spec.frame_start;
  for (long f = spec.frame_start; f <= spec.frame_end; ++f) {
    const double s = span == 0 ? 0.0 : static_cast<double>(f - spec.frame_start) / static_cast<double>(span);
    const auto uv = spec.path(s);
    if (!(uv.u >= 0.0 && uv.u <= 1.0 && uv.v >= 0.0 && uv.v <= 1.0))
      throw Error(ErrorKind::Validation, "path leaves the unit square at frame " + std::to_string(f));
    const BBoxNorm ball{x0 + uv.u * pw, y0 + uv.v * ph, spec.ball_size, spec.ball_size};
    const auto recovered = normalize_to_pitch(ball, spec.pitch);
    truth.push_back({meta.time_of(f), f, recovered.u, recovered.v, spec.ball_confidence});
    balls.emplace_back(f, ball);
  }

  std::filesystem::create_directories(out_dir / "pitch");
  std::filesystem::create_directories(out_dir / "ball");
  for (const auto& [f, ball] : balls) {
    const auto stem = frame_stem(f) + ".txt";
    write_text_file(out_dir / "pitch" / stem, format_yolo({Detection{0, spec.pitch, spec.pitch_confidence}}));
    write_text_file(out_dir / "ball" / stem, format_yolo({Detection{0, ball, spec.ball_confidence}}));
  }
  return truth;
}

// ---------------------------------------------------------------------------
// JSON script form used by the CLI

struct FixtureScript {
  MatchScript match;
  struct Track {
    long frame_start;
    long frame_end;
    BBoxNorm pitch;
    std::vector<double> u;
    std::vector<double> v;
  };
  std::vector<Track> tracks;
};

inline FixtureScript parse_fixture_script(const std::string& text, const std::string& name = "<script>") {
  FixtureScript fs;
  try {
    const auto j = nlohmann::json::parse(text);
    auto& m = fs.match;
    m.fps = j.value("fps", m.fps);
    m.duration_s = j.value("duration_s", m.duration_s);
    m.noise_density = j.value("noise_density", m.noise_density);
    m.seed = j.value("seed", m.seed);
    m.style.glyph_scale = j.value("glyph_scale", m.style.glyph_scale);
    const auto sep = j.value("separator", std::string(1, m.style.separator));
    if (sep.size() != 1) throw Error(ErrorKind::Validation, name + ": separator must be one character");
    m.style.separator = sep[0];
    m.style.order = parse_score_format(j.value("order", std::string("runs_first")));
    if (j.contains("frame")) {
      m.frame.width = j["frame"].at("width").get<int>();
      m.frame.height = j["frame"].at("height").get<int>();
    }
    if (j.contains("roi")) {
      const auto& r = j["roi"];
      m.style.roi = {r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(), r.at("h").get<int>()};
    }
    for (const auto& c : j.at("score_changes"))
      m.score_changes.push_back({c.at("t").get<double>(), c.at("runs").get<int>(), c.at("wickets").get<int>()});
    if (j.contains("detections")) {
      for (const auto& d : j["detections"]) {
        const auto& p = d.at("pitch");
        fs.tracks.push_back({d.at("frame_start").get<long>(), d.at("frame_end").get<long>(),
                             BBoxNorm{p.at("cx").get<double>(), p.at("cy").get<double>(), p.at("w").get<double>(),
                                      p.at("h").get<double>()},
                             d.at("u").get<std::vector<double>>(), d.at("v").get<std::vector<double>>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, name + ": " + e.what());
  }
  scripted_events(fs.match);
  return fs;
}

}  // namespace wicketlens
