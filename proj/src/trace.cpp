#include "tracejudge/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "numfmt.hpp"
#include "tracejudge/error.hpp"

namespace tracejudge {

using nlohmann::json;

std::string_view to_string(Pathway p) { return p == Pathway::Event ? "event" : "normal"; }

std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::Stable:
      return "stable";
    case Trend::Improving:
      return "improving";
    case Trend::Degrading:
      return "degrading";
  }
  return "stable";
}

std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::LowVol:
      return "LowVol";
    case Stratum::MedVol:
      return "MedVol";
    case Stratum::HighVol:
      return "HighVol";
  }
  return "LowVol";
}

std::optional<Stratum> parse_stratum(std::string_view text) {
  for (Stratum s : {Stratum::LowVol, Stratum::MedVol, Stratum::HighVol}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

Pathway dominant_pathway(double alpha) { return alpha < 0.5 ? Pathway::Event : Pathway::Normal; }

double clamp_action(double v) { return std::clamp(v, -kActionBound, kActionBound); }

namespace {

void require(bool ok, std::string_view what, std::int64_t day) {
  if (!ok) throw DataError(fmt::format("trace day {}: {}", day, what));
}

bool finite_all(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void validate(const BehavioralTrace& t) {
  const auto d = t.day_index;
  require(d >= 0, "day_index must be non-negative", d);
  require(finite_all({t.market.price, t.market.vix, t.market.sentiment,
                      t.detector.reconstruction_error, t.detector.threshold, t.routing.alpha,
                      t.action.delta_tau, t.action.delta_alpha, t.prediction,
                      t.performance.mape_20d, t.performance.da_20d}),
          "non-finite numeric field", d);
  require(t.market.price > 0.0, "price must be positive", d);
  require(t.market.volume >= 0, "volume must be non-negative", d);
  require(t.market.vix >= 0.0, "VIX must be non-negative", d);
  require(t.market.sentiment >= -1.0 && t.market.sentiment <= 1.0, "sentiment outside [-1, 1]",
          d);
  require(t.detector.reconstruction_error >= 0.0, "reconstruction error must be non-negative", d);
  require(t.detector.threshold > 0.0, "threshold must be positive", d);
  require(t.routing.alpha >= 0.0 && t.routing.alpha <= 1.0, "alpha outside [0, 1]", d);
  require(t.routing.dominant == dominant_pathway(t.routing.alpha),
          "dominant pathway inconsistent with alpha", d);
  require(std::abs(t.action.delta_tau) <= kActionBound &&
              std::abs(t.action.delta_alpha) <= kActionBound,
          "action outside [-0.1, 0.1]", d);
  require(t.performance.mape_20d >= 0.0, "MAPE must be non-negative", d);
  require(t.performance.da_20d >= 0.0 && t.performance.da_20d <= 100.0, "DA outside [0, 100]",
          d);
  require(t.performance.window > 0, "window must be positive", d);
  if (const auto& es = t.performance.error_stats) {
    require(finite_all({es->daily_mape, es->prev_mean, es->prev_sd}), "non-finite error stats",
            d);
    require(es->prev_sd >= 0.0, "negative error-stat sd", d);
  }
}

void validate(const Episode& e) {
  if (e.traces.empty()) throw DataError(fmt::format("episode {}: no traces", e.id));
  for (std::size_t i = 0; i < e.traces.size(); ++i) {
    validate(e.traces[i]);
    if (i > 0 && e.traces[i].day_index != e.traces[i - 1].day_index + 1) {
      throw DataError(fmt::format("episode {}: day indices not consecutive at position {}", e.id,
                                  i));
    }
  }
  if (e.stratum != stratify(e)) {
    throw DataError(fmt::format("episode {}: stratum {} inconsistent with mean VIX", e.id,
                                to_string(e.stratum)));
  }
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_trace(const BehavioralTrace& t) {
  validate(t);
  using detail::fixed;
  using detail::shortest;
  using detail::significant;

  const double e = t.detector.reconstruction_error;
  const double tau = t.detector.threshold;
  const double alpha = t.routing.alpha;
  const long normal_pct = std::lround(100.0 * alpha);
  const double alpha_after = std::clamp(alpha + t.action.delta_alpha, 0.0, 1.0);

  std::string out;
  out.reserve(640);
  out += fmt::format("{{\"day_index\":{}", t.day_index);
  if (t.date) out += fmt::format(",\"date\":\"{}\"", format_date(*t.date));
  out += fmt::format(
      ",\"market_context\":{{\"price\":{},\"volume\":{},\"VIX\":{},\"sentiment_bar\":{}}}",
      shortest(t.market.price), t.market.volume, shortest(t.market.vix),
      shortest(t.market.sentiment));
  out += fmt::format(
      ",\"autoencoder\":{{\"reconstruction_error_e\":{},\"threshold_tau\":{},"
      "\"ratio_e_over_tau\":{},\"regime_label\":{}}}",
      shortest(e), shortest(tau), fixed(e / tau, 2), static_cast<int>(t.detector.regime));
  out += fmt::format(
      ",\"routing\":{{\"alpha\":{},\"normal_pathway_pct\":{},\"event_pathway_pct\":{},"
      "\"dominant_pathway\":\"{}\"}}",
      shortest(alpha), normal_pct, 100 - normal_pct, to_string(t.routing.dominant));
  out += fmt::format(
      ",\"sac_action\":{{\"delta_tau\":{},\"delta_alpha\":{},\"tau_after_update\":{},"
      "\"alpha_after_update\":{}}}",
      shortest(t.action.delta_tau), shortest(t.action.delta_alpha),
      significant(tau + t.action.delta_tau, 10), fixed(alpha_after, 2));
  out += fmt::format(",\"prediction\":{{\"y_hat_next_day\":{}}}", shortest(t.prediction));
  const auto& p = t.performance;
  out += fmt::format(",\"rolling_performance\":{{\"MAPE_20d_pct\":{},\"DA_20d_pct\":{},"
                     "\"trend\":\"{}\"",
                     shortest(p.mape_20d), shortest(p.da_20d), to_string(p.trend));
  if (p.window != 20) out += fmt::format(",\"window_days\":{}", p.window);
  if (p.error_stats) {
    out += fmt::format(",\"MAPE_today_pct\":{},\"MAPE_prev20_mean_pct\":{},\"MAPE_prev20_sd_pct\":{}",
                       shortest(p.error_stats->daily_mape), shortest(p.error_stats->prev_mean),
                       shortest(p.error_stats->prev_sd));
  }
  out += "}}";
  return out;
}

namespace {

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(fmt::format("trace JSON: missing field '{}'", key));
  return *it;
}

double number(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number()) throw DataError(fmt::format("trace JSON: field '{}' is not a number", key));
  return v.get<double>();
}

std::int64_t integer(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number_integer()) {
    throw DataError(fmt::format("trace JSON: field '{}' is not an integer", key));
  }
  return v.get<std::int64_t>();
}

std::string text(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) throw DataError(fmt::format("trace JSON: field '{}' is not a string", key));
  return v.get<std::string>();
}

BehavioralTrace trace_from_json(const json& j) {
  if (!j.is_object()) throw DataError("trace JSON: expected an object");
  BehavioralTrace t;
  t.day_index = integer(j, "day_index");
  if (j.contains("date")) {
    auto d = parse_date(text(j, "date"));
    if (!d) throw DataError("trace JSON: malformed date");
    t.date = *d;
  }
  const json& m = field(j, "market_context");
  t.market = {number(m, "price"), integer(m, "volume"), number(m, "VIX"),
              number(m, "sentiment_bar")};
  const json& a = field(j, "autoencoder");
  const auto label = integer(a, "regime_label");
  if (label != 0 && label != 1) throw DataError("trace JSON: regime_label must be 0 or 1");
  t.detector = {number(a, "reconstruction_error_e"), number(a, "threshold_tau"),
                static_cast<Regime>(label)};
  const json& r = field(j, "routing");
  t.routing.alpha = number(r, "alpha");
  const auto dom = text(r, "dominant_pathway");
  if (dom != "normal" && dom != "event") {
    throw DataError("trace JSON: dominant_pathway must be 'normal' or 'event'");
  }
  t.routing.dominant = dom == "event" ? Pathway::Event : Pathway::Normal;
  const json& s = field(j, "sac_action");
  t.action = {number(s, "delta_tau"), number(s, "delta_alpha")};
  t.prediction = number(field(j, "prediction"), "y_hat_next_day");
  const json& p = field(j, "rolling_performance");
  t.performance.mape_20d = number(p, "MAPE_20d_pct");
  t.performance.da_20d = number(p, "DA_20d_pct");
  const auto trend = text(p, "trend");
  if (trend == "stable") {
    t.performance.trend = Trend::Stable;
  } else if (trend == "improving") {
    t.performance.trend = Trend::Improving;
  } else if (trend == "degrading") {
    t.performance.trend = Trend::Degrading;
  } else {
    throw DataError(fmt::format("trace JSON: unknown trend '{}'", trend));
  }
  if (p.contains("window_days")) t.performance.window = static_cast<int>(integer(p, "window_days"));
  if (p.contains("MAPE_today_pct")) {
    t.performance.error_stats = ErrorStats{number(p, "MAPE_today_pct"),
                                           number(p, "MAPE_prev20_mean_pct"),
                                           number(p, "MAPE_prev20_sd_pct")};
  }
  validate(t);
  return t;
}

json parse_json(std::string_view text_in, const char* what) {
  try {
    return json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace

BehavioralTrace deserialize_trace(std::string_view text_in) {
  return trace_from_json(parse_json(text_in, "trace JSON"));
}

std::string serialize_episode(const Episode& e) {
  std::string out = fmt::format("{{\"episode_id\":{},\"stratum\":\"{}\",\"traces\":[",
                                json(e.id).dump(), to_string(e.stratum));
  for (std::size_t i = 0; i < e.traces.size(); ++i) {
    if (i) out += ',';
    out += serialize_trace(e.traces[i]);
  }
  out += "]}";
  return out;
}

Episode deserialize_episode(std::string_view text_in) {
  const json j = parse_json(text_in, "episode JSON");
  if (!j.is_object()) throw DataError("episode JSON: expected an object");
  Episode e;
  e.id = text(j, "episode_id");
  auto s = parse_stratum(text(j, "stratum"));
  if (!s) throw DataError(fmt::format("episode {}: unknown stratum", e.id));
  e.stratum = *s;
  const json& traces = field(j, "traces");
  if (!traces.is_array()) throw DataError(fmt::format("episode {}: traces must be an array", e.id));
  for (const auto& t : traces) e.traces.push_back(trace_from_json(t));
  validate(e);
  return e;
}

std::vector<Episode> read_episodes_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open episode file {}", path.string()));
  std::vector<Episode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(deserialize_episode(line));
    } catch (const DataError& err) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, err.what()));
    }
  }
  return out;
}

void write_episodes_jsonl(const std::filesystem::path& path, std::span<const Episode> episodes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write episode file {}", path.string()));
  for (const auto& e : episodes) out << serialize_episode(e) << '\n';
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

// ---------------------------------------------------------------------------
// Episodes

Stratum stratum_for_vix(double vix) {
  if (vix < 15.0) return Stratum::LowVol;
  if (vix < 25.0) return Stratum::MedVol;
  return Stratum::HighVol;
}

namespace {
double mean_vix(const Episode& e) {
  if (e.traces.empty()) throw DataError(fmt::format("episode {}: no traces", e.id));
  double s = 0.0;
  for (const auto& t : e.traces) s += t.market.vix;
  return s / static_cast<double>(e.traces.size());
}
}  // namespace

Stratum stratify(const Episode& e) { return stratum_for_vix(mean_vix(e)); }

Stratum stratify_strict(const Episode& e) {
  const Stratum s = stratify(e);
  for (const auto& t : e.traces) {
    if (stratum_for_vix(t.market.vix) != s) {
      throw DataError(fmt::format("episode {}: day {} (VIX {}) straddles strata", e.id,
                                  t.day_index, t.market.vix));
    }
  }
  return s;
}

std::vector<Episode> group_episodes(std::span<const BehavioralTrace> traces, std::size_t length) {
  if (length == 0) throw DataError("episode length must be positive");
  for (std::size_t i = 1; i < traces.size(); ++i) {
    if (traces[i].day_index <= traces[i - 1].day_index) {
      throw DataError(fmt::format("traces not strictly increasing at day {}",
                                  traces[i].day_index));
    }
  }
  std::vector<Episode> out;
  for (std::size_t start = 0; start + length <= traces.size(); start += length) {
    Episode e;
    e.traces.assign(traces.begin() + static_cast<std::ptrdiff_t>(start),
                    traces.begin() + static_cast<std::ptrdiff_t>(start + length));
    for (std::size_t i = 1; i < e.traces.size(); ++i) {
      if (e.traces[i].day_index != e.traces[i - 1].day_index + 1) {
        throw DataError(fmt::format("gap between days {} and {} inside an episode window",
                                    e.traces[i - 1].day_index, e.traces[i].day_index));
      }
    }
    e.id = fmt::format("ep-{}", e.traces.front().day_index);
    e.stratum = stratify(e);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Episode> sample_stratified(std::span<const Episode> episodes,
                                       const StratumCounts& counts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Episode> out;
  for (Stratum s : {Stratum::LowVol, Stratum::MedVol, Stratum::HighVol}) {
    auto it = counts.find(s);
    const std::size_t want = it == counts.end() ? 0 : it->second;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      if (episodes[i].stratum == s) pool.push_back(i);
    }
    if (pool.size() < want) {
      throw DataError(fmt::format("stratum {}: requested {}, available {} (short by {})",
                                  to_string(s), want, pool.size(), want - pool.size()));
    }
    if (want == 0) continue;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(want);
    std::sort(pool.begin(), pool.end());
    for (std::size_t i : pool) out.push_back(episodes[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error indicator and trend

ErrorStats error_stats(std::span<const double> h, std::size_t t) {
  if (t < kErrorWindow || t >= h.size()) {
    throw DataError(fmt::format("error indicator at {} needs {} prior observations and t < {}", t,
                                kErrorWindow, h.size()));
  }
  const auto window = h.subspan(t - kErrorWindow, kErrorWindow);
  const double mean =
      std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(kErrorWindow);
  double ss = 0.0;
  for (double v : window) ss += (v - mean) * (v - mean);
  return {h[t], mean, std::sqrt(ss / static_cast<double>(kErrorWindow - 1))};
}

bool error_indicator(const ErrorStats& s) { return s.daily_mape > s.prev_mean + s.prev_sd; }

bool error_indicator(std::span<const double> h, std::size_t t) {
  return error_indicator(error_stats(h, t));
}

Trend classify_trend(std::span<const double> rolling) {
  const std::size_t n = std::min<std::size_t>(rolling.size(), 5);
  if (n < 2) return Trend::Stable;
  const auto tail = rolling.subspan(rolling.size() - n);
  const double xbar = static_cast<double>(n - 1) / 2.0;
  const double ybar = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(n);
  if (ybar <= 0.0) return Trend::Stable;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxy += dx * (tail[i] - ybar);
    sxx += dx * dx;
  }
  const double relative = sxy / sxx * static_cast<double>(n - 1) / ybar;
  if (relative > 0.05) return Trend::Degrading;
  if (relative < -0.05) return Trend::Improving;
  return Trend::Stable;
}

// ---------------------------------------------------------------------------
// CSV ingest

std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return r.ec == std::errc{} && r.ptr == s.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                  std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::string format_date(std::chrono::year_month_day d) {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    out.push_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

MarketSeries ingest_market_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read market CSV {}", path.string()));
  std::string header;
  if (!std::getline(in, header)) throw DataError(fmt::format("{}: empty file", path.string()));
  const auto cols = split_csv(header);
  auto index_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == name) return i;
    }
    return std::nullopt;
  };
  auto required = [&](const std::string& name) {
    auto i = index_of(name);
    if (!i) throw DataError(fmt::format("{}: missing required column '{}'", path.string(), name));
    return *i;
  };
  const std::size_t c_date = required(schema.date);
  const std::size_t c_close = required(schema.close);
  const std::size_t c_volume = required(schema.volume);
  const std::size_t c_vix = required(schema.vix);
  const auto c_sent = index_of(schema.sentiment);

  MarketSeries series;
  std::set<std::chrono::sys_days> seen;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    auto cell = [&](std::size_t i) { return i < cells.size() ? cells[i] : std::string_view{}; };
    auto skip = [&](std::string_view why) {
      ++series.skipped;
      series.warnings.push_back(fmt::format("line {}: {}; row skipped", lineno, why));
    };
    const auto date = parse_date(cell(c_date));
    if (!date) {
      skip("missing or malformed date");
      continue;
    }
    const auto close = parse_number<double>(cell(c_close));
    const auto volume = parse_number<std::int64_t>(cell(c_volume));
    const auto vix = parse_number<double>(cell(c_vix));
    if (!close || !(*close > 0.0) || !std::isfinite(*close)) {
      skip("missing or invalid close");
      continue;
    }
    if (!volume || *volume < 0) {
      skip("missing or invalid volume");
      continue;
    }
    if (!vix || !(*vix >= 0.0) || !std::isfinite(*vix)) {
      skip("missing or invalid vix");
      continue;
    }
    double sentiment = 0.0;
    if (c_sent && !cell(*c_sent).empty()) {
      const auto s = parse_number<double>(cell(*c_sent));
      if (!s || !(*s >= -1.0 && *s <= 1.0)) {
        skip("invalid sentiment");
        continue;
      }
      sentiment = *s;
    }
    if (!seen.insert(std::chrono::sys_days{*date}).second) {
      ++series.skipped;
      series.warnings.push_back(
          fmt::format("line {}: duplicate date {}; later row rejected", lineno,
                      format_date(*date)));
      continue;
    }
    series.rows.push_back({*date, MarketContext{*close, *volume, *vix, sentiment}});
  }
  std::stable_sort(series.rows.begin(), series.rows.end(), [](const auto& a, const auto& b) {
    return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date};
  });
  return series;
}

}  // namespace tracejudge
