#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "wicketlens/config.hpp"
#include "wicketlens/detections.hpp"
#include "wicketlens/error.hpp"
#include "wicketlens/fixtures.hpp"
#include "wicketlens/pnm.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/segmenter.hpp"
#include "wicketlens/trajectory.hpp"

namespace wicketlens {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitExternal = 3;

inline int exit_code_for(ErrorKind kind) noexcept {
  return kind == ErrorKind::OcrEngine || kind == ErrorKind::ExternalTool ? kExitExternal : kExitInput;
}

namespace cli {

namespace fs = std::filesystem;

inline unsigned default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

inline std::string env_ocr_command() {
  const char* v = std::getenv("WICKETLENS_OCR_CMD");
  return v ? std::string(v) : std::string();
}

inline Config load(const std::string& path) {
  const auto env = env_ocr_command();
  return path.empty() ? parse_config("{}", "<defaults>", env) : load_config(path, env);
}

/// Output locations shared by segment, trajectory and heatmap so that the
/// composed pipeline and `analyze` write the same files.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kScoreLogFile = "score_log.json";
inline constexpr const char* kTrajectoriesFile = "trajectories.csv";
inline constexpr const char* kPolylinesFile = "trajectories.gp";
inline constexpr const char* kHeatmapFile = "heatmap.csv";
inline constexpr const char* kWeakZonesFile = "weak_zones.json";

struct SegmentArgs {
  std::string frames;
  std::string config;
  std::string out_dir;
  std::string out;
  std::string roi;
  std::optional<double> interval;
  std::string score_format;
  std::string trim_cmd;
  std::string video;
  unsigned jobs = default_jobs();
};

struct TrajectoryArgs {
  std::string detections;
  std::string manifest;
  std::string meta;
  std::string out = ".";
  std::string config;
};

struct HeatmapArgs {
  std::string trajectories;
  std::string grid;
  int top_k = 5;
  std::string out;
  std::string config;
};

inline Roi parse_roi_flag(const std::string& s) {
  int v[4];
  char c[3];
  std::istringstream in(s);
  if (!(in >> v[0] >> c[0] >> v[1] >> c[1] >> v[2] >> c[2] >> v[3]) || c[0] != ',' || c[1] != ',' || c[2] != ',' ||
      !(in >> std::ws).eof())
    throw Error(ErrorKind::Validation, "--roi expects x,y,w,h");
  return {v[0], v[1], v[2], v[3]};
}

inline std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0;
    std::size_t b = 0;
    const int nu = std::stoi(s.substr(0, x), &a);
    const int nv = std::stoi(s.substr(x + 1), &b);
    if (a != x || b != s.size() - x - 1 || nu < 1 || nv < 1) throw std::invalid_argument(s);
    return {nu, nv};
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Validation, "--grid expects NUxNV with positive integers, got '" + s + "'");
  }
}

inline int do_segment(const SegmentArgs& a, std::ostream& err) {
  auto cfg = load(a.config);
  if (!a.roi.empty()) cfg.roi = parse_roi_flag(a.roi);
  if (a.interval) cfg.sample_interval_s = *a.interval;
  if (!a.score_format.empty()) cfg.score_format = parse_score_format(a.score_format);
  cfg.validate();
  if (a.out_dir.empty() && a.out.empty()) throw Error(ErrorKind::InvalidParameter, "segment needs --out-dir or --out");

  const auto source = directory_frame_source(a.frames);
  auto result = run_segmentation(source, cfg.segmentation(a.jobs == 0 ? 1 : a.jobs));
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  if (!a.out.empty()) emit_clip_manifest(result.clips, a.out);
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    emit_clip_manifest(result.clips, fs::path(a.out_dir) / kManifestFile);
    write_text_file(fs::path(a.out_dir) / kScoreLogFile, score_log_json(result.score_log));
  }
  if (!a.trim_cmd.empty()) {
    if (a.video.empty()) throw Error(ErrorKind::InvalidParameter, "--trim-cmd needs --video");
    TrimmerConfig trim{a.trim_cmd, a.video, fs::path(a.out_dir.empty() ? "." : a.out_dir) / "clips"};
    for (const auto& w : run_trimmer(result.clips, trim)) err << "warning: " << w << "\n";
  }
  err << result.events.size() << " wicket event(s), " << result.clips.size() << " clip(s)\n";
  return kExitOk;
}

inline VideoMeta resolve_meta(const TrajectoryArgs& a) {
  if (!a.meta.empty()) return read_video_meta(a.meta);
  const fs::path det(a.detections);
  for (const auto& candidate : {det / "meta.json", det.parent_path() / "meta.json"})
    if (fs::exists(candidate)) return read_video_meta(candidate);
  throw Error(ErrorKind::InvalidInput, "no meta.json next to " + a.detections + "; pass --meta");
}

inline int do_trajectory(const TrajectoryArgs& a, std::ostream& err) {
  const auto cfg = load(a.config);
  if (!fs::is_directory(a.detections)) throw Error(ErrorKind::Io, "detections directory not found: " + a.detections);
  const auto meta = resolve_meta(a);
  const auto clips = read_clip_manifest(a.manifest);
  const auto dets = read_detection_dir(a.detections);
  const auto trajs = build_trajectories(dets, clips, meta, cfg.trajectory());
  fs::create_directories(a.out);
  write_text_file(fs::path(a.out) / kTrajectoriesFile, trajectories_csv(trajs));
  write_text_file(fs::path(a.out) / kPolylinesFile, trajectory_polylines(trajs));
  err << trajs.size() << " trajectory(ies) from " << clips.size() << " clip(s)\n";
  return kExitOk;
}

inline int do_heatmap(const HeatmapArgs& a, std::ostream& err) {
  const auto cfg = load(a.config);
  int nu = cfg.heatmap_nu;
  int nv = cfg.heatmap_nv;
  if (!a.grid.empty()) std::tie(nu, nv) = parse_grid(a.grid);
  if (a.top_k < 1) throw Error(ErrorKind::Validation, "--top-k must be >= 1");
  const auto trajs = parse_trajectories_csv(read_text_file(a.trajectories), a.trajectories);
  const auto hm = accumulate_heatmap(trajs, nu, nv);
  const fs::path out = a.out.empty() ? fs::path(a.trajectories).parent_path() : fs::path(a.out);
  if (!out.empty()) fs::create_directories(out);
  write_text_file(out / kHeatmapFile, heatmap_csv(hm));
  write_text_file(out / kWeakZonesFile, weak_zones_json(weak_zones(hm, a.top_k)));
  err << hm.total << " point(s) binned into " << nu << "x" << nv << "\n";
  return kExitOk;
}

}  // namespace cli

/// Entry point for the wicketlens executable. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  CLI::App app{"wicketlens: scoreboard-driven wicket clip segmentation and trajectory analysis"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  cli::SegmentArgs seg;
  cli::TrajectoryArgs traj;
  cli::HeatmapArgs heat;

  auto add_segment_flags = [&](CLI::App* sub) {
    sub->add_option("--frames", seg.frames, "Frame directory (meta.json + frame_NNNNNN.ppm/pgm)")->required();
    sub->add_option("--config", seg.config, "JSON configuration file");
    sub->add_option("--jobs", seg.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--roi", seg.roi, "Scoreboard ROI x,y,w,h (overrides config)");
    sub->add_option("--interval", seg.interval, "Sampling interval in seconds (overrides config)");
    sub->add_option("--score-format", seg.score_format, "runs_first, wickets_first or auto (overrides config)");
    sub->add_option("--trim-cmd", seg.trim_cmd, "External trimmer command with {input} {start} {end} {output}");
    sub->add_option("--video", seg.video, "Source video passed to the trimmer");
  };

  auto* segment = app.add_subcommand("segment", "Detect wicket events and write the clip manifest");
  add_segment_flags(segment);
  segment->add_option("--out-dir", seg.out_dir, "Directory for manifest.json and score_log.json");
  segment->add_option("--out", seg.out, "Manifest output file");

  auto* analyze = app.add_subcommand("analyze", "Run segment, trajectory and heatmap in one go");
  add_segment_flags(analyze);
  analyze->add_option("--out-dir", seg.out_dir, "Output directory")->required();
  analyze->add_option("--detections", traj.detections, "Detection directory (default: <frames>/detections)");
  analyze->add_option("--top-k", heat.top_k, "Number of weak zones to report");

  std::string pp_in;
  std::string pp_out;
  std::string pp_stages = "gray,gamma,invert,median,dilate,erode";
  std::string pp_config;
  std::string pp_roi;
  auto* pre = app.add_subcommand("preprocess", "Apply the preprocessing chain to one image");
  pre->add_option("--in", pp_in, "Input PPM/PGM")->required();
  pre->add_option("--out", pp_out, "Output PPM/PGM")->required();
  pre->add_option("--stages", pp_stages, "Comma-separated stages: gray,gamma,invert,median,dilate,erode");
  pre->add_option("--config", pp_config, "JSON configuration file (gamma and kernel sizes)");
  pre->add_option("--roi", pp_roi, "Crop x,y,w,h before processing");

  std::string ev_preds;
  std::string ev_gts;
  std::optional<double> ev_iou;
  std::optional<double> ev_conf;
  std::string ev_out;
  std::string ev_config;
  bool ev_table = false;
  auto* eval = app.add_subcommand("evaluate", "Score YOLO predictions against ground truth");
  eval->add_option("--preds", ev_preds, "Prediction directory")->required();
  eval->add_option("--gts", ev_gts, "Ground-truth directory")->required();
  eval->add_option("--iou", ev_iou, "IoU threshold for precision/recall (default 0.5)");
  eval->add_option("--conf", ev_conf, "Confidence threshold for precision/recall (overrides config)");
  eval->add_option("--out", ev_out, "Also write the JSON report to this file");
  eval->add_option("--config", ev_config, "JSON configuration file");
  eval->add_flag("--table", ev_table, "Print a text table instead of JSON");

  auto* trajectory = app.add_subcommand("trajectory", "Build pitch-plane trajectories for each clip");
  trajectory->add_option("--detections", traj.detections, "Directory with pitch/ and ball/ YOLO files")->required();
  trajectory->add_option("--manifest", traj.manifest, "Clip manifest")->required();
  trajectory->add_option("--out", traj.out, "Output directory");
  trajectory->add_option("--meta", traj.meta, "meta.json (default: next to the detections)");
  trajectory->add_option("--config", traj.config, "JSON configuration file");

  auto* heatmap = app.add_subcommand("heatmap", "Bin trajectories and rank weak zones");
  heatmap->add_option("--trajectories", heat.trajectories, "Trajectory CSV")->required();
  heatmap->add_option("--grid", heat.grid, "Bins as NUxNV (overrides config)");
  heatmap->add_option("--top-k", heat.top_k, "Number of weak zones to report");
  heatmap->add_option("--out", heat.out, "Output directory (default: next to the CSV)");
  heatmap->add_option("--config", heat.config, "JSON configuration file");

  std::string gf_script;
  std::string gf_out;
  std::optional<std::uint64_t> gf_seed;
  unsigned gf_jobs = cli::default_jobs();
  auto* gen = app.add_subcommand("gen-fixture", "Render a synthetic match from a JSON script");
  gen->add_option("--script", gf_script, "Fixture script")->required();
  gen->add_option("--out-dir", gf_out, "Output directory")->required();
  gen->add_option("--seed", gf_seed, "Noise seed (overrides the script)");
  gen->add_option("--jobs", gf_jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (segment->parsed()) return cli::do_segment(seg, err);

    if (analyze->parsed()) {
      cli::do_segment(seg, err);
      const fs::path out_dir(seg.out_dir);
      traj.detections = traj.detections.empty() ? (fs::path(seg.frames) / "detections").string() : traj.detections;
      traj.manifest = (out_dir / cli::kManifestFile).string();
      traj.out = seg.out_dir;
      traj.config = seg.config;
      if (traj.meta.empty() && !fs::exists(fs::path(traj.detections) / "meta.json"))
        traj.meta = (fs::path(seg.frames) / "meta.json").string();
      cli::do_trajectory(traj, err);
      heat.trajectories = (out_dir / cli::kTrajectoriesFile).string();
      heat.out = seg.out_dir;
      heat.config = seg.config;
      return cli::do_heatmap(heat, err);
    }

    if (pre->parsed()) {
      const auto cfg = cli::load(pp_config);
      auto img = read_image(pp_in);
      if (!pp_roi.empty()) {
        const auto roi = cli::parse_roi_flag(pp_roi);
        if (!roi.fits(img)) throw Error(ErrorKind::InvalidRoi, "--roi does not fit the image");
        img = crop(img, roi);
      }
      write_image(pp_out, preprocess(img, cfg.preprocess, parse_stages(pp_stages)));
      return kExitOk;
    }

    if (eval->parsed()) {
      const auto cfg = cli::load(ev_config);
      EvalOptions opts;
      opts.conf_threshold = ev_conf.value_or(cfg.conf_threshold);
      if (ev_iou) opts.operating_iou = *ev_iou;
      if (!(opts.operating_iou > 0.0 && opts.operating_iou <= 1.0))
        throw Error(ErrorKind::Validation, "--iou must be in (0,1]");
      if (!(opts.conf_threshold >= 0.0 && opts.conf_threshold <= 1.0))
        throw Error(ErrorKind::Validation, "--conf must be in [0,1]");
      const auto report = evaluate(ev_preds, ev_gts, opts);
      for (const auto& s : report.skipped) err << "warning: " << s << " has no counterpart, skipped\n";
      const auto json = report_json(report);
      if (!ev_out.empty()) write_text_file(ev_out, json);
      out << (ev_table ? report_table(report) : json);
      return kExitOk;
    }

    if (trajectory->parsed()) return cli::do_trajectory(traj, err);
    if (heatmap->parsed()) return cli::do_heatmap(heat, err);

    if (gen->parsed()) {
      auto script = parse_fixture_script(read_text_file(gf_script), gf_script);
      if (gf_seed) script.match.seed = *gf_seed;
      const fs::path dir(gf_out);
      const auto gt = gen_match_sequence(script.match, dir, gf_jobs);
      write_text_file(dir / "ground_truth.json", ground_truth_json(gt));
      if (!script.tracks.empty()) {
        const auto det_dir = dir / "detections";
        for (const auto& t : script.tracks) {
          DetectionFixtureSpec spec;
          spec.frame_start = t.frame_start;
          spec.frame_end = t.frame_end;
          spec.pitch = t.pitch;
          spec.path = polynomial_path(t.u, t.v);
          gen_detection_fixture(spec, det_dir, gt.meta);
        }
        write_video_meta(det_dir / "meta.json", gt.meta);
      }
      err << gt.meta.frame_count << " frame(s), " << gt.events.size() << " scripted wicket(s)\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace wicketlens
