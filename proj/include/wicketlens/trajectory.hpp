#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "wicketlens/detections.hpp"
#include "wicketlens/error.hpp"
#include "wicketlens/segmenter.hpp"

namespace wicketlens {

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, where + ": '" + std::string(s) + "' is not a number");
  return x;
}

struct TrajectoryPoint {
  double t = 0.0;
  long frame_index = 0;
  double u = 0.0;  // across pitch width
  double v = 0.0;  // along pitch length, 0 at the box top
  double confidence = 1.0;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct Trajectory {
  std::string clip_label;
  std::vector<TrajectoryPoint> points;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Closed-boundary containment of the ball center in the pitch box.
inline bool ball_in_pitch(const BBoxNorm& ball, const BBoxNorm& pitch) {
  return pitch.x_min() <= ball.cx && ball.cx <= pitch.x_max() && pitch.y_min() <= ball.cy && ball.cy <= pitch.y_max();
}

struct PitchCoords {
  double u;
  double v;
};

inline PitchCoords normalize_to_pitch(const BBoxNorm& ball, const BBoxNorm& pitch) {
  const double pw = pitch.x_max() - pitch.x_min();
  const double ph = pitch.y_max() - pitch.y_min();
  if (!(pw > 0.0) || !(ph > 0.0)) throw Error(ErrorKind::InvalidInput, "degenerate pitch box");
  return {std::clamp((ball.cx - pitch.x_min()) / pw, 0.0, 1.0), std::clamp((ball.cy - pitch.y_min()) / ph, 0.0, 1.0)};
}

struct FrameDetections {
  std::vector<Detection> pitch;
  std::vector<Detection> ball;
};

using DetectionTimeline = std::map<long, FrameDetections>;

/// Loads `pitch/frame_%06d.txt` and `ball/frame_%06d.txt` under `dir`.
inline DetectionTimeline read_detection_dir(const std::filesystem::path& dir) {
  DetectionTimeline out;
  bool any = false;
  for (const char* kind : {"pitch", "ball"}) {
    const auto sub = dir / kind;
    if (!std::filesystem::is_directory(sub)) continue;
    any = true;
    for (const auto& [stem, path] : yolo_files_by_stem(sub)) {
      if (stem.rfind("frame_", 0) != 0) continue;
      long index = 0;
      const auto digits = std::string_view(stem).substr(6);
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), index);
      if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) continue;
      auto dets = parse_yolo_file(path);
      auto& slot = out[index];
      (std::string_view(kind) == "pitch" ? slot.pitch : slot.ball) = std::move(dets);
    }
  }
  if (!any) throw Error(ErrorKind::Io, dir.string() + " has neither pitch/ nor ball/ subdirectory");
  return out;
}

struct TrajectoryOptions {
  int pitch_gap_frames = 15;  // how long a pitch box persists when the detector drops it
};

/// Ball points inside the (possibly persisted) pitch box over the clip's frames.
inline std::optional<Trajectory> build_trajectory(const DetectionTimeline& dets, const ClipSpec& clip,
                                                  const VideoMeta& meta, const TrajectoryOptions& opts = {}) {
  Trajectory traj;
  traj.clip_label = clip.label;
  std::optional<BBoxNorm> pitch;
  long pitch_frame = 0;

  // Seed from frames just before the clip so the persistence window applies at its start.
  for (auto it = dets.lower_bound(clip.frame_start - opts.pitch_gap_frames);
       it != dets.end() && it->first < clip.frame_start; ++it) {
    if (auto p = best_ball_per_frame(it->second.pitch)) {
      pitch = p->bbox;
      pitch_frame = it->first;
    }
  }
  for (auto it = dets.lower_bound(clip.frame_start); it != dets.end() && it->first <= clip.frame_end; ++it) {
    const long f = it->first;
    if (auto p = best_ball_per_frame(it->second.pitch)) {
      pitch = p->bbox;
      pitch_frame = f;
    }
    if (!pitch || f - pitch_frame > opts.pitch_gap_frames) continue;
    const auto ball = best_ball_per_frame(it->second.ball);
    if (!ball || !ball_in_pitch(ball->bbox, *pitch)) continue;
    const auto uv = normalize_to_pitch(ball->bbox, *pitch);
    traj.points.push_back({meta.time_of(f), f, uv.u, uv.v, ball->score()});
  }
  if (traj.points.empty()) return std::nullopt;
  return traj;
}

inline std::vector<Trajectory> build_trajectories(const DetectionTimeline& dets, const std::vector<ClipSpec>& clips,
                                                  const VideoMeta& meta, const TrajectoryOptions& opts = {}) {
  std::vector<Trajectory> out;
  for (const auto& c : clips)
    if (auto t = build_trajectory(dets, c, meta, opts)) out.push_back(std::move(*t));
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap

struct Heatmap {
  int nu = 10;
  int nv = 20;
  std::vector<long> counts;  // row-major by v: counts[bv * nu + bu]
  long total = 0;

  [[nodiscard]] long at(int bu, int bv) const { return counts[static_cast<std::size_t>(bv) * nu + bu]; }
};

inline Heatmap make_heatmap(int nu, int nv) {
  if (nu < 1 || nv < 1) throw Error(ErrorKind::InvalidParameter, "heatmap grid must be at least 1x1");
  Heatmap hm;
  hm.nu = nu;
  hm.nv = nv;
  hm.counts.assign(static_cast<std::size_t>(nu) * nv, 0);
  return hm;
}

inline Heatmap accumulate_heatmap(const std::vector<Trajectory>& trajs, int nu = 10, int nv = 20) {
  Heatmap hm = make_heatmap(nu, nv);
  for (const auto& tr : trajs) {
    for (const auto& p : tr.points) {
      const int bu = std::clamp(static_cast<int>(std::floor(p.u * nu)), 0, nu - 1);
      const int bv = std::clamp(static_cast<int>(std::floor(p.v * nv)), 0, nv - 1);
      ++hm.counts[static_cast<std::size_t>(bv) * nu + bu];
      ++hm.total;
    }
  }
  return hm;
}

struct WeakZone {
  int bin_u;
  int bin_v;
  long count;
  double share;

  friend bool operator==(const WeakZone&, const WeakZone&) = default;
};

/// Top-k non-empty bins by count; ties by (bin_v, bin_u) ascending.
inline std::vector<WeakZone> weak_zones(const Heatmap& hm, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidParameter, "top-k must be >= 1");
  std::vector<WeakZone> zones;
  if (hm.total == 0) return zones;
  for (int bv = 0; bv < hm.nv; ++bv)
    for (int bu = 0; bu < hm.nu; ++bu)
      if (const long c = hm.at(bu, bv); c > 0)
        zones.push_back({bu, bv, c, static_cast<double>(c) / static_cast<double>(hm.total)});
  std::stable_sort(zones.begin(), zones.end(), [](const WeakZone& a, const WeakZone& b) { return a.count > b.count; });
  if (zones.size() > static_cast<std::size_t>(k)) zones.resize(static_cast<std::size_t>(k));
  return zones;
}

// ---------------------------------------------------------------------------
// Plot data

inline constexpr std::string_view kTrajectoryCsvHeader = "clip_label,frame_index,t,u,v,confidence";

inline std::string trajectories_csv(const std::vector<Trajectory>& trajs) {
  std::string out(kTrajectoryCsvHeader);
  out += '\n';
  for (const auto& tr : trajs)
    for (const auto& p : tr.points)
      out += tr.clip_label + "," + std::to_string(p.frame_index) + "," + format_double(p.t) + "," + format_double(p.u) +
             "," + format_double(p.v) + "," + format_double(p.confidence) + "\n";
  return out;
}

/// Inverse of trajectories_csv; consecutive rows with the same label form one trajectory.
inline std::vector<Trajectory> parse_trajectories_csv(const std::string& text, const std::string& name = "<csv>") {
  std::vector<Trajectory> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kTrajectoryCsvHeader) throw Error(ErrorKind::Parse, name + ": unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const auto where = name + ":" + std::to_string(line_no);
    if (f.size() != 6) throw Error(ErrorKind::Parse, where + ": expected 6 fields");
    TrajectoryPoint p;
    const auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), p.frame_index);
    if (res.ec != std::errc{} || res.ptr != f[1].data() + f[1].size())
      throw Error(ErrorKind::Parse, where + ": bad frame_index");
    p.t = parse_double(f[2], where);
    p.u = parse_double(f[3], where);
    p.v = parse_double(f[4], where);
    p.confidence = parse_double(f[5], where);
    if (p.u < 0.0 || p.u > 1.0 || p.v < 0.0 || p.v > 1.0)
      throw Error(ErrorKind::Validation, where + ": u/v outside [0,1]");
    if (out.empty() || out.back().clip_label != f[0]) out.push_back({std::string(f[0]), {}});
    out.back().points.push_back(p);
  }
  return out;
}

inline std::string heatmap_csv(const Heatmap& hm) {
  std::string out;
  for (int bv = 0; bv < hm.nv; ++bv) {
    for (int bu = 0; bu < hm.nu; ++bu) {
      if (bu) out += ',';
      out += std::to_string(hm.at(bu, bv));
    }
    out += '\n';
  }
  return out;
}

/// gnuplot `splot` data: one indexed block per trajectory, columns u v t.
inline std::string trajectory_polylines(const std::vector<Trajectory>& trajs) {
  std::string out = "# u v t\n";
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (i) out += "\n\n";
    out += "# " + trajs[i].clip_label + "\n";
    for (const auto& p : trajs[i].points)
      out += format_double(p.u) + " " + format_double(p.v) + " " + format_double(p.t) + "\n";
  }
  return out;
}

inline std::string weak_zones_json(const std::vector<WeakZone>& zones) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& z : zones) {
    nlohmann::ordered_json o;
    o["bin_u"] = z.bin_u;
    o["bin_v"] = z.bin_v;
    o["count"] = z.count;
    o["share"] = z.share;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

struct PlotFiles {
  std::filesystem::path trajectories;
  std::filesystem::path heatmap;
  std::filesystem::path polylines;
};

inline PlotFiles plot_files(const std::string& prefix) {
  return {prefix + "trajectories.csv", prefix + "heatmap.csv", prefix + "trajectories.gp"};
}

inline void export_plot_data(const std::vector<Trajectory>& trajs, const Heatmap& hm, const std::string& prefix) {
  const auto files = plot_files(prefix);
  write_text_file(files.trajectories, trajectories_csv(trajs));
  write_text_file(files.heatmap, heatmap_csv(hm));
  write_text_file(files.polylines, trajectory_polylines(trajs));
}

}  // namespace wicketlens
