#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracejudge {

enum class Regime : std::uint8_t { Normal = 0, Anomalous = 1 };
enum class Pathway : std::uint8_t { Normal = 0, Event = 1 };
enum class Trend : std::uint8_t { Stable, Improving, Degrading };
enum class Stratum : std::uint8_t { LowVol, MedVol, HighVol };

inline constexpr double kActionBound = 0.1;
inline constexpr std::size_t kEpisodeLength = 5;
inline constexpr std::size_t kErrorWindow = 20;

std::string_view to_string(Pathway p);
std::string_view to_string(Trend t);
std::string_view to_string(Stratum s);
std::optional<Stratum> parse_stratum(std::string_view text);

struct MarketContext {
  double price = 0.0;
  std::int64_t volume = 0;
  double vix = 0.0;
  double sentiment = 0.0;

  friend bool operator==(const MarketContext&, const MarketContext&) = default;
};

struct DetectorState {
  double reconstruction_error = 0.0;
  double threshold = 0.0;
  Regime regime = Regime::Normal;

  friend bool operator==(const DetectorState&, const DetectorState&) = default;
};

/// Dominant pathway is event iff alpha < 0.5.
Pathway dominant_pathway(double alpha);

struct RoutingState {
  double alpha = 1.0;
  Pathway dominant = Pathway::Normal;

  static RoutingState from_alpha(double alpha) { return {alpha, dominant_pathway(alpha)}; }

  friend bool operator==(const RoutingState&, const RoutingState&) = default;
};

double clamp_action(double v);

struct ControllerAction {
  double delta_tau = 0.0;
  double delta_alpha = 0.0;

  /// Both components clamped to [-0.1, 0.1].
  static ControllerAction clamped(double dtau, double dalpha) {
    return {clamp_action(dtau), clamp_action(dalpha)};
  }

  friend bool operator==(const ControllerAction&, const ControllerAction&) = default;
};

/// Trailing statistics needed to evaluate the error indicator on a single trace.
struct ErrorStats {
  double daily_mape = 0.0;  // percent
  double prev_mean = 0.0;   // percent, mean of the previous 20 daily values
  double prev_sd = 0.0;     // percent, n-1 standard deviation of the same window

  friend bool operator==(const ErrorStats&, const ErrorStats&) = default;
};

struct RollingPerformance {
  double mape_20d = 0.0;  // percent
  double da_20d = 0.0;    // percent
  int window = 20;
  Trend trend = Trend::Stable;
  std::optional<ErrorStats> error_stats;

  friend bool operator==(const RollingPerformance&, const RollingPerformance&) = default;
};

struct BehavioralTrace {
  std::int64_t day_index = 0;
  std::optional<std::chrono::year_month_day> date;
  MarketContext market;
  DetectorState detector;
  RoutingState routing;
  ControllerAction action;
  double prediction = 0.0;
  RollingPerformance performance;

  friend bool operator==(const BehavioralTrace&, const BehavioralTrace&) = default;
};

struct Episode {
  std::string id;
  std::vector<BehavioralTrace> traces;
  Stratum stratum = Stratum::LowVol;

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Throws DataError naming the first violated invariant.
void validate(const BehavioralTrace& trace);
void validate(const Episode& episode);

/// Compact single-line JSON with the fixed field layout. Throws DataError on non-finite input.
std::string serialize_trace(const BehavioralTrace& trace);
BehavioralTrace deserialize_trace(std::string_view json);

std::string serialize_episode(const Episode& episode);
Episode deserialize_episode(std::string_view json);

std::vector<Episode> read_episodes_jsonl(const std::filesystem::path& path);
void write_episodes_jsonl(const std::filesystem::path& path, std::span<const Episode> episodes);

/// Mean-VIX stratum: < 15 LowVol, [15, 25) MedVol, >= 25 HighVol.
Stratum stratum_for_vix(double vix);
Stratum stratify(const Episode& episode);
/// Like stratify but throws DataError if any day falls in a different stratum than the mean.
Stratum stratify_strict(const Episode& episode);

/// Non-overlapping windows of `length` consecutive days; the remainder is dropped.
std::vector<Episode> group_episodes(std::span<const BehavioralTrace> traces,
                                    std::size_t length = kEpisodeLength);

using StratumCounts = std::map<Stratum, std::size_t>;

/// Seeded selection without replacement; output grouped Low, Med, High.
std::vector<Episode> sample_stratified(std::span<const Episode> episodes,
                                       const StratumCounts& counts, std::uint64_t seed);

/// 1 iff history[t] > mean + sd of history[t-20 .. t-1] (sd with n-1).
bool error_indicator(std::span<const double> mape_history, std::size_t t);
bool error_indicator(const ErrorStats& stats);
ErrorStats error_stats(std::span<const double> mape_history, std::size_t t);

/// OLS slope over the last five rolling MAPE values relative to their mean; +-5% dead band.
Trend classify_trend(std::span<const double> rolling_mape);

struct CsvSchema {
  std::string date = "date";
  std::string close = "close";
  std::string volume = "volume";
  std::string vix = "vix";
  std::string sentiment = "sentiment";
};

struct MarketRow {
  std::chrono::year_month_day date;
  MarketContext context;
};

struct MarketSeries {
  std::vector<MarketRow> rows;  // sorted by date
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

MarketSeries ingest_market_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

std::optional<std::chrono::year_month_day> parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);

}  // namespace tracejudge
