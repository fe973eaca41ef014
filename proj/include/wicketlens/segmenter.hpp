#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wicketlens/error.hpp"
#include "wicketlens/ocr.hpp"
#include "wicketlens/pnm.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/scoreparse.hpp"
#include "wicketlens/subprocess.hpp"

namespace wicketlens {

struct VideoMeta {
  double fps = 30.0;
  long frame_count = 0;
  int width = 0;
  int height = 0;
  double start_time = 0.0;

  [[nodiscard]] double duration() const noexcept { return static_cast<double>(frame_count) / fps; }
  [[nodiscard]] double time_of(long frame) const noexcept { return static_cast<double>(frame) / fps + start_time; }

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorKind::Validation, "fps must be positive");
    if (frame_count < 0) throw Error(ErrorKind::Validation, "frame_count must be >= 0");
  }
};

struct ClipSpec {
  double start_s = 0.0;
  double end_s = 0.0;
  long frame_start = 0;
  long frame_end = 0;
  WicketEvent event;
  std::string label;

  // Compares the fields a manifest carries; the event's time and frame are not serialized.
  friend bool operator==(const ClipSpec& a, const ClipSpec& b) {
    return a.start_s == b.start_s && a.end_s == b.end_s && a.frame_start == b.frame_start &&
           a.frame_end == b.frame_end && a.label == b.label && a.event.innings_index == b.event.innings_index &&
           a.event.wickets_after == b.event.wickets_after && a.event.runs_at_event == b.event.runs_at_event;
  }
};

/// Frame indices round(k * interval * fps), k = 0, 1, ... below frame_count, deduplicated.
inline std::vector<long> sample_timeline(const VideoMeta& meta, double interval_s) {
  if (!(interval_s > 0.0) || !std::isfinite(interval_s))
    throw Error(ErrorKind::InvalidParameter, "sampling interval must be positive");
  meta.validate();
  std::vector<long> out;
  for (long k = 0;; ++k) {
    const long idx = std::lround(static_cast<double>(k) * interval_s * meta.fps);
    if (idx >= meta.frame_count) break;
    if (out.empty() || idx > out.back()) out.push_back(idx);
  }
  return out;
}

inline std::string clip_label(const WicketEvent& e) {
  return "wicket_" + std::to_string(e.innings_index + 1) + "_" + std::to_string(e.wickets_after);
}

struct ClipRolls {
  double pre_roll_s = 8.0;
  double post_roll_s = 2.5;
};

inline ClipSpec event_to_clip(const WicketEvent& event, const ClipRolls& rolls, const VideoMeta& meta) {
  if (!(rolls.pre_roll_s >= 0.0) || !(rolls.post_roll_s >= 0.0))
    throw Error(ErrorKind::InvalidParameter, "clip rolls must be >= 0");
  meta.validate();
  const double lo = meta.start_time;
  const double hi = meta.start_time + meta.duration();
  ClipSpec clip;
  clip.event = event;
  clip.label = clip_label(event);
  clip.start_s = std::max(lo, event.t - rolls.pre_roll_s);
  clip.end_s = std::min(hi, event.t + rolls.post_roll_s);
  if (clip.end_s <= clip.start_s) clip.end_s = clip.start_s + 1.0 / meta.fps;
  clip.frame_start = std::max(0L, static_cast<long>(std::floor((clip.start_s - lo) * meta.fps + 1e-9)));
  const long last = std::max(clip.frame_start, meta.frame_count - 1);
  clip.frame_end = std::clamp(static_cast<long>(std::ceil((clip.end_s - lo) * meta.fps - 1e-9)), clip.frame_start, last);
  return clip;
}

// ---------------------------------------------------------------------------
// Frame sources

struct FrameSource {
  VideoMeta meta;
  std::function<RasterImage(long)> load;
};

inline std::string frame_stem(long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06ld", index);
  return buf;
}

inline VideoMeta read_video_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  VideoMeta meta;
  try {
    meta.fps = j.at("fps").get<double>();
    meta.frame_count = j.at("frame_count").get<long>();
    meta.width = j.value("width", 0);
    meta.height = j.value("height", 0);
    meta.start_time = j.value("start_time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, path.string() + ": " + e.what());
  }
  meta.validate();
  return meta;
}

inline void write_video_meta(const std::filesystem::path& path, const VideoMeta& meta) {
  nlohmann::ordered_json j;
  j["fps"] = meta.fps;
  j["frame_count"] = meta.frame_count;
  j["width"] = meta.width;
  j["height"] = meta.height;
  j["start_time"] = meta.start_time;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Image-sequence directory: meta.json plus frame_%06d.{ppm,pgm,png}.
inline FrameSource directory_frame_source(const std::filesystem::path& dir) {
  FrameSource src;
  src.meta = read_video_meta(dir / "meta.json");
  src.load = [dir](long index) {
    const auto stem = frame_stem(index);
    for (const char* ext : {".ppm", ".pgm", ".png"}) {
      const auto p = dir / (stem + ext);
      if (std::filesystem::exists(p)) return read_image(p);
    }
    throw Error(ErrorKind::Io, "missing frame " + stem);
  };
  return src;
}

// ---------------------------------------------------------------------------
// Segmentation

struct SegmentationConfig {
  std::optional<Roi> roi;  // whole frame when absent
  PreprocessParams preprocess;
  unsigned stages = kAllStages;
  double sample_interval_s = 0.1;
  ScoreFormat score_format = ScoreFormat::Auto;
  TrackerOptions tracker;
  ClipRolls rolls;
  OcrEngineConfig ocr;
  unsigned jobs = 1;
};

struct ScoreLogEntry {
  long frame_index = 0;
  double t = 0.0;
  std::string status;  // "ok", "unreadable" or "ocr_error"
  std::string text;
  std::optional<ScoreReading> parsed;
  std::optional<TrackerDecision> decision;
};

struct SegmentationResult {
  std::vector<WicketEvent> events;
  std::vector<ClipSpec> clips;
  std::vector<ScoreLogEntry> score_log;
  std::vector<std::string> warnings;
};

namespace detail {

struct FrameOutcome {
  std::string status;
  std::string text;
  std::string error;
};

inline FrameOutcome read_frame_text(const FrameSource& source, long index, const SegmentationConfig& cfg) {
  RasterImage frame;
  try {
    frame = source.load(index);
  } catch (const Error& e) {
    return {"unreadable", {}, e.what()};
  }
  try {
    const RasterImage region = cfg.roi ? crop(frame, *cfg.roi) : frame;
    const RasterImage clean = preprocess(region, cfg.preprocess, cfg.stages);
    return {"ok", recognize(clean, cfg.ocr).text, {}};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::OcrEngine) return {"ocr_error", {}, e.what()};
    throw;
  }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Samples the timeline, recognizes each sampled frame (in parallel), then
/// parses and tracks readings strictly in timestamp order.
inline SegmentationResult run_segmentation(const FrameSource& source, const SegmentationConfig& cfg) {
  source.meta.validate();
  cfg.preprocess.validate();
  const auto indices = sample_timeline(source.meta, cfg.sample_interval_s);

  std::vector<detail::FrameOutcome> outcomes(indices.size());
  detail::parallel_for(indices.size(), cfg.jobs,
                       [&](std::size_t i) { outcomes[i] = detail::read_frame_text(source, indices[i], cfg); });

  SegmentationResult result;
  std::size_t unreadable = 0;
  std::size_t ocr_failures = 0;
  ScoreTracker tracker(cfg.tracker);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& out = outcomes[i];
    ScoreLogEntry entry;
    entry.frame_index = indices[i];
    entry.t = source.meta.time_of(indices[i]);
    entry.status = out.status;
    entry.text = out.text;
    if (out.status != "ok") {
      ++unreadable;
      if (out.status == "ocr_error") ++ocr_failures;
      result.warnings.push_back("frame " + std::to_string(indices[i]) + " skipped: " + out.error);
      result.score_log.push_back(std::move(entry));
      continue;
    }
    if (auto reading = parse_score(out.text, cfg.score_format, tracker.state().accepted)) {
      reading->t = entry.t;
      reading->frame_index = indices[i];
      entry.parsed = *reading;
      auto step = tracker.update(*reading);
      entry.decision = step.decision;
      result.events.insert(result.events.end(), step.events.begin(), step.events.end());
    }
    result.score_log.push_back(std::move(entry));
  }

  if (!indices.empty() && 2 * unreadable > indices.size()) {
    const auto msg = std::to_string(unreadable) + " of " + std::to_string(indices.size()) + " sampled frames unreadable";
    throw Error(2 * ocr_failures > unreadable ? ErrorKind::OcrEngine : ErrorKind::InvalidInput, msg);
  }
  for (const auto& e : result.events) result.clips.push_back(event_to_clip(e, cfg.rolls, source.meta));
  return result;
}

// ---------------------------------------------------------------------------
// Manifest and score log

inline std::string clip_manifest_json(const std::vector<ClipSpec>& clips) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : clips) {
    nlohmann::ordered_json o;
    o["label"] = c.label;
    o["innings"] = c.event.innings_index + 1;
    o["wicket_number"] = c.event.wickets_after;
    o["start_s"] = c.start_s;
    o["end_s"] = c.end_s;
    o["frame_start"] = c.frame_start;
    o["frame_end"] = c.frame_end;
    o["runs_at_event"] = c.event.runs_at_event;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void emit_clip_manifest(const std::vector<ClipSpec>& clips, const std::filesystem::path& path) {
  write_text_file(path, clip_manifest_json(clips));
}

inline std::vector<ClipSpec> parse_clip_manifest(const std::string& text, const std::string& name = "<manifest>") {
  std::vector<ClipSpec> clips;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw Error(ErrorKind::Validation, name + ": manifest must be a JSON array");
    for (const auto& o : j) {
      ClipSpec c;
      c.label = o.at("label").get<std::string>();
      c.event.innings_index = o.at("innings").get<int>() - 1;
      c.event.wickets_after = o.at("wicket_number").get<int>();
      c.event.wickets_before = c.event.wickets_after - 1;
      c.start_s = o.at("start_s").get<double>();
      c.end_s = o.at("end_s").get<double>();
      c.frame_start = o.at("frame_start").get<long>();
      c.frame_end = o.at("frame_end").get<long>();
      c.event.runs_at_event = o.at("runs_at_event").get<int>();
      c.event.t = c.start_s;
      if (c.frame_end < c.frame_start || !(c.start_s < c.end_s))
        throw Error(ErrorKind::Validation, name + ": clip '" + c.label + "' has an empty interval");
      clips.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, name + ": " + e.what());
  }
  return clips;
}

inline std::vector<ClipSpec> read_clip_manifest(const std::filesystem::path& path) {
  return parse_clip_manifest(read_text_file(path), path.string());
}

inline std::string score_log_json(const std::vector<ScoreLogEntry>& log) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : log) {
    nlohmann::ordered_json o;
    o["frame_index"] = e.frame_index;
    o["t"] = e.t;
    o["status"] = e.status;
    o["text"] = e.text;
    if (e.parsed) {
      o["runs"] = e.parsed->runs;
      o["wickets"] = e.parsed->wickets;
      o["layout"] = to_string(e.parsed->format);
    } else {
      o["runs"] = nullptr;
      o["wickets"] = nullptr;
      o["layout"] = nullptr;
    }
    o["decision"] = e.decision ? nlohmann::ordered_json(to_string(*e.decision)) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Optional external trimmer

struct TrimmerConfig {
  std::string command;  // placeholders {input} {start} {end} {output}
  std::string input;
  std::filesystem::path output_dir;
  std::chrono::milliseconds timeout{600'000};
};

/// Invokes the trimmer once per clip; failures are returned as warnings.
inline std::vector<std::string> run_trimmer(const std::vector<ClipSpec>& clips, const TrimmerConfig& trim) {
  std::vector<std::string> warnings;
  if (trim.command.empty()) return warnings;
  std::filesystem::create_directories(trim.output_dir);
  const auto ext = std::filesystem::path(trim.input).extension().string();
  for (const auto& c : clips) {
    const auto out = trim.output_dir / (c.label + (ext.empty() ? ".mp4" : ext));
    std::string cmd = substitute(trim.command, "{input}", shell_quote(trim.input));
    cmd = substitute(cmd, "{start}", nlohmann::json(c.start_s).dump());
    cmd = substitute(cmd, "{end}", nlohmann::json(c.end_s).dump());
    cmd = substitute(cmd, "{output}", shell_quote(out.string()));
    try {
      const auto r = run_shell(cmd, trim.timeout);
      if (r.timed_out) warnings.push_back("trimmer timed out for " + c.label);
      else if (r.exit_code != 0)
        warnings.push_back("trimmer exited with status " + std::to_string(r.exit_code) + " for " + c.label);
    } catch (const Error& e) {
      warnings.push_back(std::string("trimmer failed for ") + c.label + ": " + e.what());
    }
  }
  return warnings;
}

}  // namespace wicketlens
