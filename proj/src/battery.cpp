#include "tracejudge/battery.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "tracejudge/error.hpp"
#include "tracejudge/stats/basic.hpp"
#include "tracejudge/stats/mcs.hpp"

namespace tracejudge {

using nlohmann::ordered_json;

namespace {

constexpr std::string_view kHeader = "model,asset,date,previous,actual,forecast,vix";
constexpr std::size_t kVarianceWindow = 22;
constexpr std::array<stats::LossKind, 4> kLossKinds{stats::LossKind::SE, stats::LossKind::AE,
                                                    stats::LossKind::MAPE, stats::LossKind::QLIKE};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
    f.push_back(line.substr(start, pos - start));
  }
  f.push_back(line.substr(start));
  return f;
}

double parse_number(const std::string& text, const std::filesystem::path& path, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(fmt::format("{}:{}: invalid number '{}'", path.string(), lineno, text));
}

template <class T>
std::vector<std::vector<T>> grid(std::size_t rows, std::size_t cols) {
  return std::vector<std::vector<T>>(rows, std::vector<T>(cols));
}

}  // namespace

std::size_t ForecastPanel::model_index(std::string_view id) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i] == id) return i;
  }
  throw DataError(fmt::format("unknown model '{}'", id));
}

void ForecastPanel::validate() const {
  if (models.empty() || assets.empty() || days.empty()) throw DataError("forecast panel is empty");
  const auto check_grid = [&](const std::vector<std::vector<double>>& g, std::string_view what,
                              std::string_view model) {
    if (g.size() != assets.size()) {
      throw DataError(fmt::format("forecast panel: {} has {} assets, expected {}", what, g.size(), assets.size()));
    }
    for (std::size_t a = 0; a < assets.size(); ++a) {
      if (g[a].size() != days.size()) {
        throw DataError(fmt::format("forecast panel: misaligned key ({}, {}): {} days, expected {}", model,
                                    assets[a], g[a].size(), days.size()));
      }
      for (std::size_t t = 0; t < days.size(); ++t) {
        if (!std::isfinite(g[a][t])) {
          throw DataError(fmt::format("forecast panel: non-finite {} at ({}, {}, {})", what, model, assets[a], days[t]));
        }
      }
    }
  };
  check_grid(previous, "previous", "*");
  check_grid(actual, "actual", "*");
  check_grid(vix, "vix", "*");
  if (forecast.size() != models.size()) throw DataError("forecast panel: model count mismatch");
  for (std::size_t m = 0; m < models.size(); ++m) check_grid(forecast[m], "forecast", models[m]);
  for (std::size_t a = 0; a < assets.size(); ++a) {
    for (std::size_t t = 0; t < days.size(); ++t) {
      if (!(previous[a][t] > 0.0) || !(actual[a][t] > 0.0)) {
        throw DataError(fmt::format("forecast panel: non-positive price at ({}, {})", assets[a], days[t]));
      }
    }
  }
}

ForecastPanel read_forecast_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read forecast panel {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty forecast panel", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw DataError(fmt::format("{}: header must be {}", path.string(), kHeader));

  struct Market {
    double previous, actual, vix;
  };
  ForecastPanel p;
  std::map<std::string, std::size_t> model_ix;
  std::map<std::string, std::size_t> asset_ix;
  std::map<std::pair<std::size_t, std::string>, Market> market;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, double> cells;
  std::map<std::string, int> dates;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw DataError(fmt::format("{}:{}: expected 7 fields", path.string(), lineno));
    auto [mi, new_m] = model_ix.try_emplace(f[0], p.models.size());
    if (new_m) p.models.push_back(f[0]);
    auto [ai, new_a] = asset_ix.try_emplace(f[1], p.assets.size());
    if (new_a) p.assets.push_back(f[1]);
    const Market mk{parse_number(f[3], path, lineno), parse_number(f[4], path, lineno),
                    parse_number(f[6], path, lineno)};
    auto [it, fresh] = market.try_emplace({ai->second, f[2]}, mk);
    if (!fresh && (it->second.previous != mk.previous || it->second.actual != mk.actual || it->second.vix != mk.vix)) {
      throw DataError(fmt::format("{}:{}: market fields for ({}, {}) differ between models", path.string(),
                                  lineno, f[1], f[2]));
    }
    if (!cells.emplace(std::tuple{mi->second, ai->second, f[2]}, parse_number(f[5], path, lineno)).second) {
      throw DataError(fmt::format("{}:{}: duplicate key ({}, {}, {})", path.string(), lineno, f[0], f[1], f[2]));
    }
    dates[f[2]] = 0;
  }
  for (const auto& [d, _] : dates) p.days.push_back(d);
  const std::size_t A = p.assets.size();
  const std::size_t T = p.days.size();
  p.previous = grid<double>(A, T);
  p.actual = grid<double>(A, T);
  p.vix = grid<double>(A, T);
  p.forecast.assign(p.models.size(), grid<double>(A, T));
  for (std::size_t m = 0; m < p.models.size(); ++m) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t t = 0; t < T; ++t) {
        auto it = cells.find({m, a, p.days[t]});
        if (it == cells.end()) {
          throw DataError(fmt::format("{}: misaligned panel, no forecast for ({}, {}, {})", path.string(),
                                      p.models[m], p.assets[a], p.days[t]));
        }
        p.forecast[m][a][t] = it->second;
        const auto& mk = market.at({a, p.days[t]});
        p.previous[a][t] = mk.previous;
        p.actual[a][t] = mk.actual;
        p.vix[a][t] = mk.vix;
      }
    }
  }
  p.validate();
  return p;
}

void write_forecast_csv(const std::filesystem::path& path, const ForecastPanel& p) {
  p.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write forecast panel {}", path.string()));
  out << kHeader << '\n';
  for (std::size_t m = 0; m < p.models.size(); ++m) {
    for (std::size_t a = 0; a < p.assets.size(); ++a) {
      for (std::size_t t = 0; t < p.days.size(); ++t) {
        out << fmt::format("{},{},{},{},{},{},{}\n", p.models[m], p.assets[a], p.days[t], p.previous[a][t],
                           p.actual[a][t], p.forecast[m][a][t], p.vix[a][t]);
      }
    }
  }
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

stats::LossPanel loss_panel(const ForecastPanel& p, stats::LossKind kind) {
  p.validate();
  stats::LossPanel out;
  out.models = p.models;
  out.assets = p.assets;
  out.days = p.days;
  out.losses.assign(p.models.size(), {});
  const std::size_t T = p.days.size();
  for (std::size_t a = 0; a < p.assets.size(); ++a) {
    std::vector<double> returns(T);
    for (std::size_t t = 0; t < T; ++t) returns[t] = std::log(p.actual[a][t] / p.previous[a][t]);
    const auto proxy = stats::realized_variance_proxy(returns, kVarianceWindow);
    for (std::size_t m = 0; m < p.models.size(); ++m) {
      std::vector<double> errors(T);
      for (std::size_t t = 0; t < T; ++t) {
        const double e = p.forecast[m][a][t] - p.actual[a][t];
        errors[t] = kind == stats::LossKind::MAPE ? e : e / p.previous[a][t];
      }
      out.losses[m].push_back(stats::loss_series(errors, p.actual[a], kind, proxy));
    }
  }
  return out;
}

std::vector<double> high_vix_indicator(const ForecastPanel& p) {
  p.validate();
  const std::size_t T = p.days.size();
  std::vector<double> mean_vix(T, 0.0);
  for (const auto& row : p.vix) {
    for (std::size_t t = 0; t < T; ++t) mean_vix[t] += row[t] / static_cast<double>(p.assets.size());
  }
  std::vector<double> sorted = mean_vix;
  std::sort(sorted.begin(), sorted.end());
  const double median = stats::quantile_sorted(sorted, 0.5);
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = mean_vix[t] >= median ? 1.0 : 0.0;
  return out;
}

BatteryResult stats_battery(const ForecastPanel& p, const BatteryOptions& o) {
  p.validate();
  const std::size_t first = p.model_index(o.first);
  const std::size_t second = p.model_index(o.second);
  if (first == second) throw ConfigError("stats: first and second model must differ");

  BatteryResult result;
  auto& r = result.report;
  r["first"] = o.first;
  r["second"] = o.second;
  r["models"] = p.models;
  r["assets"] = p.assets.size();
  r["days"] = p.days.size();

  const auto se = loss_panel(p, stats::LossKind::SE);
  const auto a = se.pooled(first);
  const auto b = se.pooled(second);
  const auto t = stats::paired_t(a, b);
  r["paired_t"] = stats::to_json(t);

  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const auto ci = stats::bootstrap_ci(diff, [](std::span<const double> x) { return stats::mean(x); },
                                      {o.bootstrap_resamples, o.ci_level, o.seed, o.exec});
  r["bootstrap_ci"] = {{"metric", "mean pooled SE differential"},
                       {"level", o.ci_level},
                       {"resamples", o.bootstrap_resamples},
                       {"lo", ci.lo},
                       {"hi", ci.hi}};

  bool all_degenerate = t.degenerate;
  auto& dm = r["dm"] = ordered_json::object();
  for (auto kind : kLossKinds) {
    const auto panel = kind == stats::LossKind::SE ? se : loss_panel(p, kind);
    const auto pooled = stats::dm_test_pooled(panel, first, second, o.horizon, o.bandwidth);
    all_degenerate = all_degenerate && pooled.degenerate;
    auto entry = stats::to_json(pooled);
    std::size_t negative = 0;
    std::size_t significant = 0;
    const auto per_asset = stats::dm_test_per_asset(panel, first, second, o.horizon, o.bandwidth);
    for (const auto& res : per_asset) {
      if (res.degenerate) continue;
      negative += res.statistic < 0.0;
      significant += res.statistic < 0.0 && stats::bonferroni(res.p_value, per_asset.size()) < 0.05;
    }
    entry["per_asset_negative"] = negative;
    entry["per_asset_significant_bonferroni"] = significant;
    dm[std::string(stats::to_string(kind))] = std::move(entry);
  }

  const auto cond = high_vix_indicator(p);
  r["gw"] = stats::to_json(stats::gw_test(stats::demeaned_differentials(se, first, second), cond, o.bandwidth));
  r["gw"]["conditioning"] = "cross-asset mean VIX at or above its median";

  const auto m = stats::mcs(se, {o.block_len, o.mcs_resamples, o.seed, o.exec});
  auto& mj = r["mcs"];
  mj["loss"] = "SE";
  mj["resamples"] = o.mcs_resamples;
  mj["block_len"] = o.block_len;
  auto& pv = mj["p_values"] = ordered_json::object();
  for (std::size_t i = 0; i < m.models.size(); ++i) pv[m.models[i]] = m.p_values[i];
  auto& elim = mj["elimination"] = ordered_json::array();
  for (std::size_t i : m.elimination) elim.push_back(m.models[i]);
  auto& surv = mj["survivors"] = ordered_json::object();
  for (double level : o.mcs_levels) surv[fmt::format("{:.2f}", level)] = m.survivors(level);

  result.all_degenerate = all_degenerate;
  return result;
}

void check_stats_report(const nlohmann::json& r) {
  const auto require = [](bool ok, std::string_view what) {
    if (!ok) throw DataError(fmt::format("stats report: {}", what));
  };
  const auto test_shape = [&](const nlohmann::json& j, std::string_view name) {
    require(j.is_object(), fmt::format("{} must be an object", name));
    for (const char* k : {"statistic", "p_value"}) {
      require(j.contains(k) && (j[k].is_number() || j[k].is_null()), fmt::format("{}.{} must be a number or null", name, k));
    }
    require(j.contains("degenerate") && j["degenerate"].is_boolean(), fmt::format("{}.degenerate must be boolean", name));
    require(j.contains("extras") && j["extras"].is_object(), fmt::format("{}.extras must be an object", name));
  };
  require(r.is_object(), "must be an object");
  require(r.contains("first") && r["first"].is_string(), "first must be a string");
  require(r.contains("second") && r["second"].is_string(), "second must be a string");
  require(r.contains("models") && r["models"].is_array(), "models must be an array");
  require(r.contains("assets") && r["assets"].is_number_unsigned(), "assets must be a count");
  require(r.contains("days") && r["days"].is_number_unsigned(), "days must be a count");
  require(r.contains("paired_t"), "paired_t missing");
  test_shape(r["paired_t"], "paired_t");
  require(r.contains("bootstrap_ci") && r["bootstrap_ci"].is_object(), "bootstrap_ci must be an object");
  for (const char* k : {"level", "lo", "hi"}) {
    require(r["bootstrap_ci"].contains(k) && r["bootstrap_ci"][k].is_number(), fmt::format("bootstrap_ci.{} must be a number", k));
  }
  require(r.contains("dm") && r["dm"].is_object(), "dm must be an object");
  for (auto kind : kLossKinds) {
    const std::string key(stats::to_string(kind));
    require(r["dm"].contains(key), fmt::format("dm.{} missing", key));
    test_shape(r["dm"][key], "dm." + key);
  }
  require(r.contains("gw"), "gw missing");
  test_shape(r["gw"], "gw");
  require(r.contains("mcs") && r["mcs"].is_object(), "mcs must be an object");
  const auto& mcs = r["mcs"];
  require(mcs.contains("p_values") && mcs["p_values"].is_object(), "mcs.p_values must be an object");
  require(mcs.contains("elimination") && mcs["elimination"].is_array(), "mcs.elimination must be an array");
  require(mcs.contains("survivors") && mcs["survivors"].is_object(), "mcs.survivors must be an object");
  for (const auto& [model, p] : mcs["p_values"].items()) {
    require(p.is_number() && p.get<double>() >= 0.0 && p.get<double>() <= 1.0,
            fmt::format("mcs.p_values.{} must lie in [0, 1]", model));
  }
}

}  // namespace tracejudge
