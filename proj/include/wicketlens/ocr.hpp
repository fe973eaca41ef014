#pragma once

#include <algorithm>
#include <atomic>
#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unistd.h>
#include <utility>
#include <vector>

#include "wicketlens/error.hpp"
#include "wicketlens/pnm.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/subprocess.hpp"

namespace wicketlens {

inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;
inline constexpr int kGlyphBits = kGlyphCols * kGlyphRows;

using GlyphBitmap = std::bitset<kGlyphBits>;  // bit (row * 5 + col), set = ink

struct Glyph {
  char ch;
  GlyphBitmap bits;
};

struct CharScore {
  char glyph;
  double confidence;
};

struct OcrResult {
  std::string text;
  double mean_confidence = 0.0;
  std::vector<CharScore> per_char;  // one entry per non-space character of `text`
};

/// Fixed 5x7 bitmap font for the scoreboard alphabet '0'-'9', '-', '/'.
/// Every glyph inks column 0 and column 4 and has no blank interior column, so
/// a glyph's ink extent is always its full 5-column cell.
class GlyphFont {
 public:
  GlyphFont() {
    struct Rows {
      char ch;
      const char* rows[kGlyphRows];
    };
    static constexpr Rows kRows[] = {
        {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
        {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", "#####"}},
        {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
        {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
        {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
        {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
        {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
        {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
        {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
        {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
        {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
        {'/', {"....#", "....#", "...#.", "..#..", ".#...", "#....", "#...."}},
    };
    for (const auto& g : kRows) {
      GlyphBitmap bits;
      for (int r = 0; r < kGlyphRows; ++r)
        for (int c = 0; c < kGlyphCols; ++c) bits[r * kGlyphCols + c] = g.rows[r][c] == '#';
      glyphs_.push_back({g.ch, bits});
    }
  }

  [[nodiscard]] const std::vector<Glyph>& glyphs() const noexcept { return glyphs_; }

  [[nodiscard]] const Glyph* find(char ch) const noexcept {
    for (const auto& g : glyphs_)
      if (g.ch == ch) return &g;
    return nullptr;
  }

  [[nodiscard]] static const GlyphFont& builtin() {
    static const GlyphFont font;
    return font;
  }

 private:
  std::vector<Glyph> glyphs_;
};

// Width in pixels of `text` rendered at `scale` (glyph cells plus 1-column spacing).
inline int text_width(std::string_view text, int scale) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * (kGlyphCols + 1) * scale - scale;
}

/// Draws `text` into `img` with its top-left glyph corner at (x, y).
/// Spaces advance one cell. Writes `ink` into every channel of inked pixels.
inline void draw_text(RasterImage& img, std::string_view text, int x, int y, int scale, std::uint8_t ink,
                      const GlyphFont& font = GlyphFont::builtin()) {
  if (scale < 1) throw Error(ErrorKind::InvalidParameter, "glyph scale must be >= 1");
  if (x < 0 || y < 0 || x + text_width(text, scale) > img.width() || y + kGlyphRows * scale > img.height())
    throw Error(ErrorKind::Layout, "text '" + std::string(text) + "' does not fit at the requested position");
  int pen = x;
  for (char ch : text) {
    if (ch != ' ') {
      const Glyph* g = font.find(ch);
      if (!g) throw Error(ErrorKind::Layout, std::string("no glyph for '") + ch + "'");
      for (int r = 0; r < kGlyphRows; ++r)
        for (int c = 0; c < kGlyphCols; ++c) {
          if (!g->bits[r * kGlyphCols + c]) continue;
          for (int dy = 0; dy < scale; ++dy)
            for (int dx = 0; dx < scale; ++dx)
              for (int ch_i = 0; ch_i < img.channels(); ++ch_i)
                img.at(pen + c * scale + dx, y + r * scale + dy, ch_i) = ink;
        }
    }
    pen += (kGlyphCols + 1) * scale;
  }
}

/// Single-channel rendering of `text`, dark glyphs on a light field by default
/// (the polarity the preprocessing chain produces).
inline RasterImage render_text(std::string_view text, int scale, int margin = 2, bool dark_on_light = true,
                               const GlyphFont& font = GlyphFont::builtin()) {
  const int w = std::max(1, text_width(text, scale) + 2 * margin);
  const int h = kGlyphRows * scale + 2 * margin;
  RasterImage img(w, h, 1, dark_on_light ? 255 : 0);
  draw_text(img, text, margin, margin, scale, dark_on_light ? 0 : 255, font);
  return img;
}

struct TemplateMatchOptions {
  int binarize_threshold = 128;  // samples below are ink (dark-on-light input)
  double min_score = 0.85;       // cells scoring lower are dropped
};

namespace detail {

struct Span {
  int begin;
  int end;  // exclusive
};

// Fraction-of-ink majority downsample of an ink mask region to 5x7.
inline GlyphBitmap downsample_cell(const std::vector<std::uint8_t>& ink, int stride, Span cols, Span rows,
                                   int height) {
  GlyphBitmap bits;
  const int cw = cols.end - cols.begin;
  const int rh = rows.end - rows.begin;
  for (int r = 0; r < kGlyphRows; ++r) {
    const int y0 = rows.begin + r * rh / kGlyphRows;
    const int y1 = std::max(y0 + 1, rows.begin + (r + 1) * rh / kGlyphRows);
    for (int c = 0; c < kGlyphCols; ++c) {
      const int x0 = cols.begin + c * cw / kGlyphCols;
      const int x1 = std::max(x0 + 1, cols.begin + (c + 1) * cw / kGlyphCols);
      int count = 0;
      int area = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          ++area;
          if (y >= 0 && y < height) count += ink[static_cast<std::size_t>(y) * stride + x];
        }
      }
      bits[r * kGlyphCols + c] = 2 * count >= area;
    }
  }
  return bits;
}

}  // namespace detail

/// Template-matching recognizer for the builtin font. Ink columns are grouped
/// into cells (gaps narrower than half a glyph pixel are bridged), each cell is
/// resampled to 5x7 over the text line and scored against every glyph by the
/// fraction of agreeing bits.
inline OcrResult match_templates(const RasterImage& img, const GlyphFont& font = GlyphFont::builtin(),
                                 const TemplateMatchOptions& opts = {}) {
  detail::require_gray(img, "match_templates");
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> ink(img.pixel_count());
  std::vector<int> col_ink(w, 0);
  int top = h, bottom = -1;
  for (int y = 0; y < h; ++y) {
    bool row_has = false;
    for (int x = 0; x < w; ++x) {
      const bool on = img.at(x, y) < opts.binarize_threshold;
      ink[static_cast<std::size_t>(y) * w + x] = on;
      col_ink[x] += on;
      row_has |= on;
    }
    if (row_has) {
      top = std::min(top, y);
      bottom = y;
    }
  }
  OcrResult result;
  if (bottom < 0) return result;

  std::vector<detail::Span> runs;
  for (int x = 0; x < w;) {
    if (!col_ink[x]) {
      ++x;
      continue;
    }
    int e = x;
    while (e < w && col_ink[e]) ++e;
    runs.push_back({x, e});
    x = e;
  }

  const int line_h = bottom - top + 1;
  int widest = 0;
  for (const auto& r : runs) widest = std::max(widest, r.end - r.begin);
  double scale = std::max(static_cast<double>(line_h) / kGlyphRows, static_cast<double>(widest) / kGlyphCols);
  const int min_gap = std::max(1, static_cast<int>(std::ceil(scale / 2.0)));

  std::vector<detail::Span> cells;
  for (const auto& r : runs) {
    if (!cells.empty() && r.begin - cells.back().end < min_gap) cells.back().end = r.end;
    else cells.push_back(r);
  }
  widest = 0;
  for (const auto& c : cells) widest = std::max(widest, c.end - c.begin);
  scale = std::max(static_cast<double>(line_h) / kGlyphRows, static_cast<double>(widest) / kGlyphCols);

  // A line of short glyphs only ('-') is centred in a full-height box.
  detail::Span rows{top, bottom + 1};
  const int expected_h = static_cast<int>(std::lround(scale * kGlyphRows));
  if (line_h < expected_h) {
    const int extra = expected_h - line_h;
    rows.begin -= extra / 2;
    rows.end += extra - extra / 2;
  }

  double conf_sum = 0.0;
  int prev_end = -1;
  for (const auto& cell : cells) {
    const GlyphBitmap bits = detail::downsample_cell(ink, w, cell, rows, h);
    const Glyph* best = nullptr;
    int best_agree = -1;
    for (const auto& g : font.glyphs()) {
      const int agree = kGlyphBits - static_cast<int>((g.bits ^ bits).count());
      if (agree > best_agree) {
        best_agree = agree;
        best = &g;
      }
    }
    const double score = static_cast<double>(best_agree) / kGlyphBits;
    if (!best || score < opts.min_score) continue;
    if (prev_end >= 0 && cell.begin - prev_end >= static_cast<int>(std::lround(3 * scale))) result.text += ' ';
    result.text += best->ch;
    result.per_char.push_back({best->ch, score});
    conf_sum += score;
    prev_end = cell.end;
  }
  if (!result.per_char.empty()) result.mean_confidence = conf_sum / static_cast<double>(result.per_char.size());
  return result;
}

enum class OcrEngineKind { Builtin, External };

struct OcrEngineConfig {
  OcrEngineKind kind = OcrEngineKind::Builtin;
  std::string command;  // external only; `{input}` is replaced by a temporary PGM path
  std::chrono::milliseconds timeout{10'000};
  TemplateMatchOptions match;
};

namespace detail {

inline std::filesystem::path temp_pgm_path() {
  static std::atomic<unsigned long> counter{0};
  const auto id = counter.fetch_add(1);
  return std::filesystem::temp_directory_path() /
         ("wicketlens_ocr_" + std::to_string(::getpid()) + "_" + std::to_string(id) + ".pgm");
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Runs the external engine on `img`. Confidence is not reported by the
/// adapter contract, so every character is given 1.0.
inline OcrResult recognize_external(const RasterImage& img, const OcrEngineConfig& engine) {
  if (engine.command.empty()) throw Error(ErrorKind::OcrEngine, "external OCR engine has no command");
  const auto path = detail::temp_pgm_path();
  write_image(path, img);
  CommandResult run;
  try {
    run = run_shell(substitute(engine.command, "{input}", shell_quote(path.string())), engine.timeout);
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
  std::error_code ec;
  std::filesystem::remove(path, ec);
  if (run.timed_out) throw Error(ErrorKind::OcrEngine, "external OCR command timed out");
  if (run.exit_code != 0)
    throw Error(ErrorKind::OcrEngine, "external OCR command exited with status " + std::to_string(run.exit_code));

  OcrResult result;
  result.text = detail::trim(run.out);
  for (char ch : result.text)
    if (ch != ' ') result.per_char.push_back({ch, 1.0});
  result.mean_confidence = result.per_char.empty() ? 0.0 : 1.0;
  return result;
}

inline OcrResult recognize(const RasterImage& img, const OcrEngineConfig& engine = {}) {
  detail::require_gray(img, "recognize");
  if (engine.kind == OcrEngineKind::External) return recognize_external(img, engine);
  return match_templates(img, GlyphFont::builtin(), engine.match);
}

}  // namespace wicketlens
