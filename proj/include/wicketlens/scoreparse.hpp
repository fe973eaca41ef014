#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wicketlens/error.hpp"

namespace wicketlens {

enum class ScoreFormat { WicketsFirst, RunsFirst, Auto };

inline std::string_view to_string(ScoreFormat f) noexcept {
  switch (f) {
    case ScoreFormat::WicketsFirst: return "wickets_first";
    case ScoreFormat::RunsFirst: return "runs_first";
    case ScoreFormat::Auto: return "auto";
  }
  return "auto";
}

inline ScoreFormat parse_score_format(std::string_view s) {
  if (s == "wickets_first") return ScoreFormat::WicketsFirst;
  if (s == "runs_first") return ScoreFormat::RunsFirst;
  if (s == "auto") return ScoreFormat::Auto;
  throw Error(ErrorKind::Validation, "score_format must be wickets_first, runs_first or auto");
}

inline constexpr int kMaxWickets = 10;
inline constexpr int kMaxRuns = 1999;

struct ScoreReading {
  int runs = 0;
  int wickets = 0;
  char separator = '-';
  ScoreFormat format = ScoreFormat::RunsFirst;  // which layout the text was read as
  std::string source_text;
  double t = 0.0;
  long frame_index = 0;

  [[nodiscard]] bool same_score(const ScoreReading& o) const noexcept {
    return runs == o.runs && wickets == o.wickets;
  }
};

struct RunsWickets {
  int runs;
  int wickets;
  ScoreFormat layout;

  friend bool operator==(const RunsWickets&, const RunsWickets&) = default;
};

/// Resolves the pair (a, b) read as "<a><sep><b>" into runs and wickets.
/// An assignment is plausible when wickets <= 10 and runs <= 1999. A unique
/// plausible assignment wins; otherwise a fixed policy decides; under auto the
/// assignment that is a legal successor of `prev` (no decrease, wicket step <= 2)
/// wins. Equal operands are unambiguous.
inline std::optional<RunsWickets> disambiguate(long a, long b, ScoreFormat policy,
                                               const std::optional<ScoreReading>& prev = std::nullopt) {
  if (a < 0 || b < 0) return std::nullopt;
  auto plausible = [](long runs, long wickets) { return wickets <= kMaxWickets && runs <= kMaxRuns; };
  const bool wickets_first_ok = plausible(b, a);
  const bool runs_first_ok = plausible(a, b);
  const RunsWickets wf{static_cast<int>(std::min(b, 1L << 30)), static_cast<int>(std::min(a, 1L << 30)),
                       ScoreFormat::WicketsFirst};
  const RunsWickets rf{static_cast<int>(std::min(a, 1L << 30)), static_cast<int>(std::min(b, 1L << 30)),
                       ScoreFormat::RunsFirst};

  if (wickets_first_ok != runs_first_ok) return wickets_first_ok ? wf : rf;
  if (!wickets_first_ok) return std::nullopt;
  if (policy == ScoreFormat::WicketsFirst) return wf;
  if (policy == ScoreFormat::RunsFirst) return rf;
  if (a == b) return rf;
  if (!prev) return std::nullopt;
  auto successor = [&](const RunsWickets& c) {
    return c.runs >= prev->runs && c.wickets >= prev->wickets && c.wickets - prev->wickets <= 2;
  };
  const bool wf_next = successor(wf);
  const bool rf_next = successor(rf);
  if (wf_next == rf_next) return std::nullopt;
  return wf_next ? wf : rf;
}

/// Finds the first "<int><sep><int>" token (sep '-' or '/', optional spaces
/// around it) and resolves it with `disambiguate`. Only the first token is tried.
inline std::optional<ScoreReading> parse_score(std::string_view text, ScoreFormat policy,
                                               const std::optional<ScoreReading>& prev = std::nullopt) {
  static const std::regex kToken(R"((\d+) *([-/]) *(\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kToken)) return std::nullopt;
  auto to_long = [](const std::string& digits) -> long {
    if (digits.size() > 9) return 1L << 40;  // far outside every bound
    return std::stol(digits);
  };
  const auto resolved = disambiguate(to_long(m[1].str()), to_long(m[3].str()), policy, prev);
  if (!resolved) return std::nullopt;
  ScoreReading reading;
  reading.runs = resolved->runs;
  reading.wickets = resolved->wickets;
  reading.separator = m[2].str()[0];
  reading.format = resolved->layout;
  reading.source_text = std::string(text);
  return reading;
}

inline std::string format_score(int runs, int wickets, char separator, ScoreFormat layout) {
  const std::string sep(1, separator);
  if (layout == ScoreFormat::WicketsFirst) return std::to_string(wickets) + sep + std::to_string(runs);
  return std::to_string(runs) + sep + std::to_string(wickets);
}

struct ResetThresholds {
  int run_drop = 20;
  int wicket_drop = 2;
};

/// True when `next` looks like the start of a new innings relative to `prev`.
inline bool detect_innings_reset(const ScoreReading& prev, const ScoreReading& next,
                                 const ResetThresholds& th = {}) {
  return next.runs <= prev.runs - th.run_drop ||
         (next.wickets <= prev.wickets - th.wicket_drop && next.runs < prev.runs);
}

struct WicketEvent {
  double t = 0.0;
  long frame_index = 0;
  int wickets_before = 0;
  int wickets_after = 0;
  int runs_at_event = 0;
  int innings_index = 0;

  friend bool operator==(const WicketEvent&, const WicketEvent&) = default;
};

enum class TrackerDecision {
  Pending,     // streak still short of the debounce count
  Confirmed,   // streak complete, score equals the accepted one
  Initial,     // first accepted reading
  Accepted,    // monotone progress accepted
  NewInnings,  // innings reset accepted
  Rejected,    // confirmed but not a legal successor (OCR noise)
};

inline std::string_view to_string(TrackerDecision d) noexcept {
  switch (d) {
    case TrackerDecision::Pending: return "pending";
    case TrackerDecision::Confirmed: return "confirmed";
    case TrackerDecision::Initial: return "initial";
    case TrackerDecision::Accepted: return "accepted";
    case TrackerDecision::NewInnings: return "new_innings";
    case TrackerDecision::Rejected: return "rejected";
  }
  return "pending";
}

struct TrackerOptions {
  int debounce = 2;
  int max_wicket_step = 2;
  ResetThresholds reset;
};

struct ScoreTrackerState {
  std::optional<ScoreReading> accepted;
  std::optional<ScoreReading> candidate;  // first reading of the current streak
  int candidate_count = 0;
  int innings_index = 0;
  std::optional<double> last_t;
};

struct TrackerStep {
  TrackerDecision decision = TrackerDecision::Pending;
  std::vector<WicketEvent> events;
};

/// Debounced monotone score tracker. Feed readings in non-decreasing time
/// order; a reading must repeat `debounce` times in a row before it is
/// considered. Each accepted wicket increase of d emits d chained events
/// stamped with the first frame of the confirming streak.
class ScoreTracker {
 public:
  explicit ScoreTracker(TrackerOptions opts = {}) : opts_(opts) {
    if (opts_.debounce < 1) throw Error(ErrorKind::InvalidParameter, "debounce must be >= 1");
  }

  [[nodiscard]] const ScoreTrackerState& state() const noexcept { return state_; }
  [[nodiscard]] const TrackerOptions& options() const noexcept { return opts_; }

  TrackerStep update(const ScoreReading& reading) {
    if (state_.last_t && reading.t < *state_.last_t)
      throw Error(ErrorKind::Sequencing, "reading at t=" + std::to_string(reading.t) +
                                             " precedes t=" + std::to_string(*state_.last_t));
    state_.last_t = reading.t;

    TrackerStep step;
    if (state_.accepted && reading.same_score(*state_.accepted)) {
      state_.candidate.reset();
      state_.candidate_count = 0;
      step.decision = TrackerDecision::Confirmed;
      return step;
    }
    if (state_.candidate && reading.same_score(*state_.candidate)) {
      ++state_.candidate_count;
    } else {
      state_.candidate = reading;
      state_.candidate_count = 1;
    }
    if (state_.candidate_count < opts_.debounce) return step;

    const ScoreReading streak = *state_.candidate;
    state_.candidate.reset();
    state_.candidate_count = 0;
    step.decision = confirm(streak, step.events);
    return step;
  }

 private:
  TrackerDecision confirm(const ScoreReading& next, std::vector<WicketEvent>& events) {
    if (!state_.accepted) {
      state_.accepted = next;
      return TrackerDecision::Initial;
    }
    const ScoreReading& prev = *state_.accepted;
    if (detect_innings_reset(prev, next, opts_.reset)) {
      ++state_.innings_index;
      state_.accepted = next;
      return TrackerDecision::NewInnings;
    }
    if (next.runs < prev.runs || next.wickets < prev.wickets) return TrackerDecision::Rejected;
    const int step = next.wickets - prev.wickets;
    if (step > opts_.max_wicket_step) return TrackerDecision::Rejected;
    for (int w = prev.wickets; w < next.wickets; ++w)
      events.push_back({next.t, next.frame_index, w, w + 1, next.runs, state_.innings_index});
    state_.accepted = next;
    return TrackerDecision::Accepted;
  }

  TrackerOptions opts_;
  ScoreTrackerState state_;
};

}  // namespace wicketlens
