#pragma once

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wicketlens/error.hpp"
#include "wicketlens/ocr.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/scoreparse.hpp"
#include "wicketlens/segmenter.hpp"
#include "wicketlens/trajectory.hpp"

namespace wicketlens {

struct Config {
  std::optional<Roi> roi;
  PreprocessParams preprocess;
  double sample_interval_s = 0.1;
  ScoreFormat score_format = ScoreFormat::Auto;
  int debounce = 2;
  ClipRolls rolls;
  int heatmap_nu = 10;
  int heatmap_nv = 20;
  OcrEngineKind ocr_engine = OcrEngineKind::Builtin;
  std::string ocr_command;
  double conf_threshold = 0.25;
  int pitch_gap_frames = 15;

  void validate() const {
    preprocess.validate();
    if (roi && (roi->x < 0 || roi->y < 0 || roi->w < 1 || roi->h < 1))
      throw Error(ErrorKind::Validation, "roi must have non-negative offset and positive extent");
    if (!(sample_interval_s > 0.0)) throw Error(ErrorKind::Validation, "sample_interval_s must be positive");
    if (debounce < 1) throw Error(ErrorKind::Validation, "debounce must be >= 1");
    if (!(rolls.pre_roll_s >= 0.0) || !(rolls.post_roll_s >= 0.0))
      throw Error(ErrorKind::Validation, "pre_roll_s and post_roll_s must be >= 0");
    if (heatmap_nu < 1 || heatmap_nv < 1) throw Error(ErrorKind::Validation, "heatmap bins must be >= 1");
    if (ocr_engine == OcrEngineKind::External && ocr_command.empty())
      throw Error(ErrorKind::Validation, "ocr.engine 'external' needs ocr.command");
    if (conf_threshold < 0.0 || conf_threshold > 1.0)
      throw Error(ErrorKind::Validation, "eval.conf_threshold must be in [0,1]");
    if (pitch_gap_frames < 0) throw Error(ErrorKind::Validation, "pitch_gap_frames must be >= 0");
  }

  [[nodiscard]] SegmentationConfig segmentation(unsigned jobs = 1) const {
    SegmentationConfig s;
    s.roi = roi;
    s.preprocess = preprocess;
    s.sample_interval_s = sample_interval_s;
    s.score_format = score_format;
    s.tracker.debounce = debounce;
    s.rolls = rolls;
    s.ocr.kind = ocr_engine;
    s.ocr.command = ocr_command;
    s.jobs = jobs;
    return s;
  }

  [[nodiscard]] TrajectoryOptions trajectory() const { return {pitch_gap_frames}; }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Validation, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok |= key == a;
    if (!ok) throw Error(ErrorKind::Validation, "unknown config key '" + where + key + "'");
  }
}

}  // namespace detail

/// Parses a configuration document; unknown keys anywhere are an error.
/// A non-empty ocr_command_override replaces ocr.command before validation.
inline Config parse_config(const std::string& text, const std::string& name = "<config>",
                           const std::string& ocr_command_override = {}) {
  Config cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, name + ": " + e.what());
  }
  try {
    detail::reject_unknown(j,
                           {"roi", "gamma", "morph_kernel", "median_kernel", "sample_interval_s", "score_format",
                            "debounce", "pre_roll_s", "post_roll_s", "heatmap", "ocr", "eval", "pitch_gap_frames"},
                           "");
    if (j.contains("roi")) {
      const auto& r = j["roi"];
      detail::reject_unknown(r, {"x", "y", "w", "h"}, "roi.");
      cfg.roi = Roi{r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(), r.at("h").get<int>()};
    }
    cfg.preprocess.gamma = j.value("gamma", cfg.preprocess.gamma);
    cfg.preprocess.morph_kernel = j.value("morph_kernel", cfg.preprocess.morph_kernel);
    cfg.preprocess.median_kernel = j.value("median_kernel", cfg.preprocess.median_kernel);
    cfg.sample_interval_s = j.value("sample_interval_s", cfg.sample_interval_s);
    if (j.contains("score_format")) cfg.score_format = parse_score_format(j["score_format"].get<std::string>());
    cfg.debounce = j.value("debounce", cfg.debounce);
    cfg.rolls.pre_roll_s = j.value("pre_roll_s", cfg.rolls.pre_roll_s);
    cfg.rolls.post_roll_s = j.value("post_roll_s", cfg.rolls.post_roll_s);
    if (j.contains("heatmap")) {
      const auto& h = j["heatmap"];
      detail::reject_unknown(h, {"nu", "nv"}, "heatmap.");
      cfg.heatmap_nu = h.value("nu", cfg.heatmap_nu);
      cfg.heatmap_nv = h.value("nv", cfg.heatmap_nv);
    }
    if (j.contains("ocr")) {
      const auto& o = j["ocr"];
      detail::reject_unknown(o, {"engine", "command"}, "ocr.");
      const auto engine = o.value("engine", std::string("builtin"));
      if (engine == "builtin") cfg.ocr_engine = OcrEngineKind::Builtin;
      else if (engine == "external") cfg.ocr_engine = OcrEngineKind::External;
      else throw Error(ErrorKind::Validation, "ocr.engine must be 'builtin' or 'external'");
      cfg.ocr_command = o.value("command", std::string());
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      detail::reject_unknown(e, {"conf_threshold"}, "eval.");
      cfg.conf_threshold = e.value("conf_threshold", cfg.conf_threshold);
    }
    cfg.pitch_gap_frames = j.value("pitch_gap_frames", cfg.pitch_gap_frames);
    if (!ocr_command_override.empty()) cfg.ocr_command = ocr_command_override;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, name + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

inline Config load_config(const std::filesystem::path& path, const std::string& ocr_command_override = {}) {
  return parse_config(read_text_file(path), path.string(), ocr_command_override);
}

}  // namespace wicketlens
