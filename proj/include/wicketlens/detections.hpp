#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wicketlens/error.hpp"

namespace wicketlens {

// Normalized YOLO box: center and extent relative to image size.
struct BBoxNorm {
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  [[nodiscard]] double x_min() const noexcept { return std::max(0.0, cx - w / 2); }
  [[nodiscard]] double x_max() const noexcept { return std::min(1.0, cx + w / 2); }
  [[nodiscard]] double y_min() const noexcept { return std::max(0.0, cy - h / 2); }
  [[nodiscard]] double y_max() const noexcept { return std::min(1.0, cy + h / 2); }

  [[nodiscard]] bool valid() const noexcept {
    return cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0 && w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0;
  }

  friend bool operator==(const BBoxNorm&, const BBoxNorm&) = default;
};

struct Detection {
  int category = 0;
  BBoxNorm bbox;
  std::optional<double> confidence;  // absent for ground truth

  [[nodiscard]] double score() const noexcept { return confidence.value_or(1.0); }

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Parses YOLO text: `category cx cy w h [confidence]` per line; blank lines skipped.
inline std::vector<Detection> parse_yolo_text(const std::string& text, const std::string& name = "<yolo>") {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    const auto where = name + ":" + std::to_string(line_no);
    if (tokens.size() != 5 && tokens.size() != 6)
      throw Error(ErrorKind::Parse, where + ": expected 5 or 6 fields, got " + std::to_string(tokens.size()));
    std::vector<double> v;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(tokens[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tokens[i].size() || !std::isfinite(x))
        throw Error(ErrorKind::Parse, where + ": '" + tokens[i] + "' is not a number");
      v.push_back(x);
    }
    std::size_t used = 0;
    long cat = -1;
    try {
      cat = std::stol(tokens[0], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tokens[0].size()) throw Error(ErrorKind::Parse, where + ": category must be an integer");
    Detection d;
    d.category = static_cast<int>(cat);
    d.bbox = {v[0], v[1], v[2], v[3]};
    if (v.size() == 5) d.confidence = v[4];
    if (cat < 0) throw Error(ErrorKind::Validation, where + ": negative category");
    if (!d.bbox.valid()) throw Error(ErrorKind::Validation, where + ": box outside normalized range");
    if (d.confidence && (*d.confidence < 0.0 || *d.confidence > 1.0))
      throw Error(ErrorKind::Validation, where + ": confidence outside [0,1]");
    out.push_back(d);
  }
  return out;
}

inline std::vector<Detection> parse_yolo_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_yolo_text(ss.str(), path.string());
}

inline std::string format_yolo(const std::vector<Detection>& dets) {
  std::string out;
  for (const auto& d : dets) {
    auto num = [](double x) { return nlohmann::json(x).dump(); };
    out += std::to_string(d.category) + " " + num(d.bbox.cx) + " " + num(d.bbox.cy) + " " + num(d.bbox.w) + " " +
           num(d.bbox.h);
    if (d.confidence) out += " " + num(*d.confidence);
    out += '\n';
  }
  return out;
}

/// Intersection over union in corner coordinates clipped to the unit square.
inline double iou(const BBoxNorm& a, const BBoxNorm& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min());
  const double area_b = (b.x_max() - b.x_min()) * (b.y_max() - b.y_min());
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

struct MatchSet {
  std::vector<bool> tp;  // per prediction, in input order
  int fn = 0;
  [[nodiscard]] int tp_count() const { return static_cast<int>(std::count(tp.begin(), tp.end(), true)); }
  [[nodiscard]] int fp_count() const { return static_cast<int>(tp.size()) - tp_count(); }
};

/// Greedy matching: predictions by descending confidence (stable), each to the
/// unmatched ground truth of highest IoU >= thresh (lowest index on ties).
inline MatchSet match_detections(const std::vector<Detection>& preds, const std::vector<Detection>& gts,
                                 double iou_thresh) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score() > preds[b].score(); });
  MatchSet m;
  m.tp.assign(preds.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t p : order) {
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(preds[p].bbox, gts[g].bbox);
      if (v >= iou_thresh && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      used[best_g] = true;
      m.tp[p] = true;
    }
  }
  m.fn = static_cast<int>(std::count(used.begin(), used.end(), false));
  return m;
}

/// All-point interpolated AP over a confidence-sorted TP/FP sequence:
/// sum_i (R_i - R_{i-1}) * max_{j>=i} P_j.
inline double average_precision(const std::vector<bool>& sorted_tp, std::size_t gt_count) {
  if (gt_count == 0) return sorted_tp.empty() ? 1.0 : 0.0;
  const std::size_t n = sorted_tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += sorted_tp[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct ImageDetections {
  std::string stem;
  std::vector<Detection> preds;
  std::vector<Detection> gts;
};

struct EvalOptions {
  double operating_iou = 0.5;
  double conf_threshold = 0.25;
  std::vector<double> iou_thresholds = [] {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
    return t;
  }();
};

struct ThresholdAp {
  double iou;
  double ap;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double ap50 = 0.0;
  double map50_95 = 0.0;
  std::vector<ThresholdAp> per_threshold;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<std::string> skipped;  // stems present on only one side
};

namespace detail {

struct ScoredMatch {
  double conf;
  std::size_t image;  // index into stem-sorted image list
  std::size_t order;  // input order within the image
  bool tp;
};

inline std::vector<Detection> of_category(const std::vector<Detection>& dets, int cat) {
  std::vector<Detection> out;
  for (const auto& d : dets)
    if (d.category == cat) out.push_back(d);
  return out;
}

// Mean over categories of the per-category AP at one IoU threshold.
inline double mean_ap_at(const std::vector<ImageDetections>& images, const std::set<int>& cats, double thresh) {
  if (cats.empty()) return 1.0;
  double sum = 0.0;
  for (int cat : cats) {
    std::vector<ScoredMatch> all;
    std::size_t gt_count = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto preds = of_category(images[i].preds, cat);
      const auto gts = of_category(images[i].gts, cat);
      gt_count += gts.size();
      const auto m = match_detections(preds, gts, thresh);
      for (std::size_t p = 0; p < preds.size(); ++p) all.push_back({preds[p].score(), i, p, m.tp[p]});
    }
    std::sort(all.begin(), all.end(), [](const ScoredMatch& a, const ScoredMatch& b) {
      if (a.conf != b.conf) return a.conf > b.conf;
      if (a.image != b.image) return a.image < b.image;
      return a.order < b.order;
    });
    std::vector<bool> seq;
    seq.reserve(all.size());
    for (const auto& s : all) seq.push_back(s.tp);
    sum += average_precision(seq, gt_count);
  }
  return sum / static_cast<double>(cats.size());
}

}  // namespace detail

/// Dataset-level evaluation. Images are ordered by stem; AP is averaged over
/// every category seen in either predictions or ground truth.
inline EvalReport evaluate_dataset(std::vector<ImageDetections> images, const EvalOptions& opts = {}) {
  if (images.empty()) throw Error(ErrorKind::EmptyInput, "no images to evaluate");
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
  std::set<int> cats;
  for (const auto& img : images) {
    for (const auto& d : img.preds) cats.insert(d.category);
    for (const auto& d : img.gts) cats.insert(d.category);
  }

  EvalReport r;
  r.ap50 = detail::mean_ap_at(images, cats, 0.5);
  double sum = 0.0;
  for (double t : opts.iou_thresholds) {
    const double ap = t == 0.5 ? r.ap50 : detail::mean_ap_at(images, cats, t);
    r.per_threshold.push_back({t, ap});
    sum += ap;
  }
  r.map50_95 = opts.iou_thresholds.empty() ? 0.0 : sum / static_cast<double>(opts.iou_thresholds.size());

  for (const auto& img : images) {
    for (int cat : cats) {
      const auto preds = detail::of_category(img.preds, cat);
      const auto gts = detail::of_category(img.gts, cat);
      const auto m = match_detections(preds, gts, opts.operating_iou);
      for (std::size_t p = 0; p < preds.size(); ++p) {
        if (preds[p].score() < opts.conf_threshold) continue;
        if (m.tp[p]) ++r.tp;
        else ++r.fp;
      }
      r.fn += static_cast<int>(gts.size());
    }
  }
  r.fn -= r.tp;
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : (r.fn == 0 ? 1.0 : 0.0);
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : (r.fp == 0 ? 1.0 : 0.0);
  return r;
}

inline std::map<std::string, std::filesystem::path> yolo_files_by_stem(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + " is not a directory");
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") out[entry.path().stem().string()] = entry.path();
  return out;
}

/// Evaluates prediction files against ground-truth files paired by stem.
inline EvalReport evaluate(const std::filesystem::path& preds_dir, const std::filesystem::path& gts_dir,
                           const EvalOptions& opts = {}) {
  const auto preds = yolo_files_by_stem(preds_dir);
  const auto gts = yolo_files_by_stem(gts_dir);
  std::vector<ImageDetections> images;
  std::vector<std::string> skipped;
  for (const auto& [stem, path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) {
      skipped.push_back(stem);
      continue;
    }
    images.push_back({stem, parse_yolo_file(path), parse_yolo_file(it->second)});
  }
  for (const auto& [stem, path] : gts)
    if (!preds.count(stem)) skipped.push_back(stem);
  std::sort(skipped.begin(), skipped.end());
  if (images.empty()) throw Error(ErrorKind::EmptyInput, "no prediction/ground-truth stems in common");
  auto report = evaluate_dataset(std::move(images), opts);
  report.skipped = std::move(skipped);
  return report;
}

inline std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["ap50"] = r.ap50;
  j["map50_95"] = r.map50_95;
  auto per = nlohmann::ordered_json::array();
  for (const auto& t : r.per_threshold) {
    nlohmann::ordered_json o;
    o["iou"] = t.iou;
    o["ap"] = t.ap;
    per.push_back(std::move(o));
  }
  j["per_threshold"] = std::move(per);
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["skipped"] = r.skipped;
  return j.dump(2) + "\n";
}

inline std::string report_table(const EvalReport& r) {
  char buf[128];
  std::string out;
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%-12s %8.4f\n", name, v);
    out += buf;
  };
  line("precision", r.precision);
  line("recall", r.recall);
  line("mAP50", r.ap50);
  line("mAP50-95", r.map50_95);
  std::snprintf(buf, sizeof buf, "%-12s %8d\n%-12s %8d\n%-12s %8d\n", "tp", r.tp, "fp", r.fp, "fn", r.fn);
  out += buf;
  for (const auto& t : r.per_threshold) {
    std::snprintf(buf, sizeof buf, "AP@%-9.2f %8.4f\n", t.iou, t.ap);
    out += buf;
  }
  if (!r.skipped.empty()) out += "skipped " + std::to_string(r.skipped.size()) + " unpaired stem(s)\n";
  return out;
}

/// Highest-confidence detection; first in input order on ties.
inline std::optional<Detection> best_ball_per_frame(const std::vector<Detection>& dets) {
  std::optional<Detection> best;
  for (const auto& d : dets)
    if (!best || d.score() > best->score()) best = d;
  return best;
}

}  // namespace wicketlens
