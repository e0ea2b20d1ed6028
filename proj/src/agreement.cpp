#include "tracejudge/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "tracejudge/error.hpp"
#include "tracejudge/stats/result.hpp"

namespace tracejudge {

void RatingMatrix::validate() const {
  if (values.size() != raters.size()) throw DataError("rating matrix: rater count mismatch");
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values[r].size() != units.size()) {
      throw DataError(fmt::format("rating matrix: rater {} has {} ratings, expected {}", raters[r],
                                  values[r].size(), units.size()));
    }
  }
}

RatingMatrix read_rating_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read rating matrix {}", path.string()));
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      f.push_back(line.substr(start, pos - start));
    }
    f.push_back(line.substr(start));
    for (auto& s : f) {
      while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    }
    return f;
  };
  std::string line;
  if (!std::getline(in, line)) throw DataError("rating matrix: empty file");
  auto header = split(line);
  if (header.size() < 2) throw DataError("rating matrix: need a unit column and rater columns");
  RatingMatrix m;
  m.raters.assign(header.begin() + 1, header.end());
  m.values.assign(m.raters.size(), {});
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split(line);
    if (f.size() > header.size()) throw DataError(fmt::format("rating matrix: too many cells for unit {}", f[0]));
    m.units.push_back(f[0]);
    for (std::size_t r = 0; r < m.raters.size(); ++r) {
      const std::string cell = r + 1 < f.size() ? f[r + 1] : "";
      if (cell.empty()) {
        m.values[r].push_back(std::nullopt);
      } else {
        try {
          m.values[r].push_back(std::stoi(cell));
        } catch (const std::exception&) {
          throw DataError(fmt::format("rating matrix: bad rating '{}' for unit {}", cell, f[0]));
        }
      }
    }
  }
  m.validate();
  return m;
}

void write_rating_csv(const std::filesystem::path& path, const RatingMatrix& m) {
  m.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write rating matrix {}", path.string()));
  out << "unit";
  for (const auto& r : m.raters) out << ',' << r;
  out << '\n';
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    out << m.units[u];
    for (std::size_t r = 0; r < m.raters.size(); ++r) {
      out << ',';
      if (m.values[r][u]) out << *m.values[r][u];
    }
    out << '\n';
  }
}

double composite(const DimMap<int>& s) {
  double total = 0.0;
  for (Dimension d : kDimensions) total += s[d];
  return total / 6.0;
}

ConsensusScores consensus(std::span<const Judgment> judgments) {
  if (judgments.empty()) throw DataError("consensus of zero judgments");
  ConsensusScores c;
  c.episode_id = judgments.front().episode_id;
  for (const auto& j : judgments) {
    if (j.episode_id != c.episode_id) {
      throw DataError(fmt::format("consensus mixes episodes {} and {}", c.episode_id, j.episode_id));
    }
    if (!c.per_judge.emplace(j.judge_id, j.scores).second) {
      throw DataError(fmt::format("consensus: judge {} appears twice for {}", j.judge_id, c.episode_id));
    }
  }
  // Integer sums make the mean exact and order-independent.
  const double n = static_cast<double>(judgments.size());
  for (Dimension d : kDimensions) {
    long sum = 0;
    for (const auto& j : judgments) sum += j.scores[d];
    c.mean_scores[d] = static_cast<double>(sum) / n;
  }
  double total = 0.0;
  for (Dimension d : kDimensions) total += c.mean_scores[d];
  c.composite = total / 6.0;
  return c;
}

std::optional<double> krippendorff_alpha(const RatingMatrix& m) {
  m.validate();
  if (m.raters.size() < 2 || m.units.size() < 2) {
    throw DataError("Krippendorff alpha needs at least 2 raters and 2 units");
  }
  std::set<int> cats;
  for (const auto& row : m.values) {
    for (const auto& v : row) {
      if (v) cats.insert(*v);
    }
  }
  const std::vector<int> categories(cats.begin(), cats.end());
  const std::size_t K = categories.size();
  auto index = [&](int v) {
    return static_cast<std::size_t>(std::lower_bound(categories.begin(), categories.end(), v) -
                                    categories.begin());
  };
  std::vector<double> o(K * K, 0.0);
  for (std::size_t u = 0; u < m.units.size(); ++u) {
    std::vector<std::size_t> vals;
    for (std::size_t r = 0; r < m.raters.size(); ++r) {
      if (m.values[r][u]) vals.push_back(index(*m.values[r][u]));
    }
    if (vals.size() < 2) continue;
    const double w = 1.0 / static_cast<double>(vals.size() - 1);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      for (std::size_t j = 0; j < vals.size(); ++j) {
        if (i != j) o[vals[i] * K + vals[j]] += w;
      }
    }
  }
  std::vector<double> nc(K, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t k = 0; k < K; ++k) nc[c] += o[c * K + k];
    n += nc[c];
  }
  if (n == 0.0 || K < 2) return std::nullopt;
  // Ordinal distance: cumulative marginals between c and k with endpoints half-weighted.
  std::vector<double> delta2(K * K, 0.0);
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t k = c + 1; k < K; ++k) {
      double s = 0.0;
      for (std::size_t g = c; g <= k; ++g) s += nc[g];
      s -= (nc[c] + nc[k]) / 2.0;
      delta2[c * K + k] = delta2[k * K + c] = s * s;
    }
  }
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t k = 0; k < K; ++k) {
      observed += o[c * K + k] * delta2[c * K + k];
      expected += nc[c] * nc[k] * delta2[c * K + k];
    }
  }
  if (expected == 0.0) return std::nullopt;
  return 1.0 - (n - 1.0) * observed / expected;
}

std::optional<double> cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DataError("cohen_kappa: rating vectors differ in length");
  if (a.size() < 2) throw DataError("cohen_kappa needs at least 2 units");
  std::map<int, double> pa;
  std::map<int, double> pb;
  double agree = 0.0;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [cat, p] : pa) {
    auto it = pb.find(cat);
    if (it != pb.end()) pe += p * it->second;
  }
  if (std::abs(1.0 - pe) < 1e-15) return std::nullopt;
  return (po - pe) / (1.0 - pe);
}

std::optional<double> icc_consistency(const RatingMatrix& m) {
  m.validate();
  const std::size_t k = m.raters.size();
  const std::size_t n = m.units.size();
  if (k < 2 || n < 2) throw DataError("ICC needs at least 2 raters and 2 units");
  double grand = 0.0;
  std::vector<double> unit_mean(n, 0.0);
  std::vector<double> rater_mean(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t u = 0; u < n; ++u) {
      if (!m.values[r][u]) throw DataError("ICC requires a complete rating matrix");
      const double v = *m.values[r][u];
      unit_mean[u] += v / static_cast<double>(k);
      rater_mean[r] += v / static_cast<double>(n);
      grand += v / static_cast<double>(k * n);
    }
  }
  double ss_units = 0.0;
  double ss_raters = 0.0;
  double ss_total = 0.0;
  for (std::size_t u = 0; u < n; ++u) ss_units += (unit_mean[u] - grand) * (unit_mean[u] - grand);
  ss_units *= static_cast<double>(k);
  for (std::size_t r = 0; r < k; ++r) ss_raters += (rater_mean[r] - grand) * (rater_mean[r] - grand);
  ss_raters *= static_cast<double>(n);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t u = 0; u < n; ++u) {
      const double dv = *m.values[r][u] - grand;
      ss_total += dv * dv;
    }
  }
  const double ss_error = std::max(0.0, ss_total - ss_units - ss_raters);
  const double ms_units = ss_units / static_cast<double>(n - 1);
  const double ms_error = ss_error / static_cast<double>((n - 1) * (k - 1));
  const double denom = ms_units + static_cast<double>(k - 1) * ms_error;
  if (ms_units <= 1e-15 || denom <= 0.0) return std::nullopt;
  return (ms_units - ms_error) / denom;
}

double score_variance(std::span<const ConsensusScores> per_episode) {
  if (per_episode.empty()) throw DataError("score_variance of zero episodes");
  double total = 0.0;
  for (const auto& c : per_episode) {
    if (c.per_judge.size() < 2) {
      throw DataError(fmt::format("score_variance: episode {} has fewer than 2 judges", c.episode_id));
    }
    std::vector<double> comps;
    for (const auto& [_, s] : c.per_judge) comps.push_back(composite(s));
    double m = 0.0;
    for (double v : comps) m += v;
    m /= static_cast<double>(comps.size());
    double ss = 0.0;
    for (double v : comps) ss += (v - m) * (v - m);
    total += std::sqrt(ss / static_cast<double>(comps.size() - 1));
  }
  return total / static_cast<double>(per_episode.size());
}

RatingMatrix rating_matrix(std::span<const Judgment> judgments, Dimension d) {
  std::set<std::string> judges;
  std::set<std::string> episodes;
  for (const auto& j : judgments) {
    judges.insert(j.judge_id);
    episodes.insert(j.episode_id);
  }
  RatingMatrix m;
  m.raters.assign(judges.begin(), judges.end());
  m.units.assign(episodes.begin(), episodes.end());
  m.values.assign(m.raters.size(), std::vector<std::optional<int>>(m.units.size()));
  for (const auto& j : judgments) {
    const auto r = static_cast<std::size_t>(
        std::lower_bound(m.raters.begin(), m.raters.end(), j.judge_id) - m.raters.begin());
    const auto u = static_cast<std::size_t>(
        std::lower_bound(m.units.begin(), m.units.end(), j.episode_id) - m.units.begin());
    m.values[r][u] = j.scores[d];
  }
  return m;
}

nlohmann::ordered_json agreement_report(std::span<const Judgment> judgments) {
  using nlohmann::ordered_json;
  ordered_json report;
  report["icc_form"] = "ICC(3,1) two-way mixed, consistency";
  report["alpha_thresholds"] = {{"tentative", kAlphaTentative}, {"reliable", kAlphaReliable}};
  auto& dims = report["dimensions"] = ordered_json::object();
  for (Dimension d : kDimensions) {
    const auto m = rating_matrix(judgments, d);
    ordered_json entry;
    if (m.raters.size() >= 2 && m.units.size() >= 2) {
      const auto alpha = krippendorff_alpha(m);
      entry["krippendorff_alpha"] = alpha ? stats::number_or_null(*alpha) : ordered_json(nullptr);
      entry["alpha_annotation"] = !alpha                     ? "degenerate"
                                  : *alpha >= kAlphaReliable   ? "reliable"
                                  : *alpha >= kAlphaTentative ? "tentative"
                                                               : "unreliable";
      auto& kappas = entry["pairwise_kappa"] = ordered_json::object();
      for (std::size_t a = 0; a < m.raters.size(); ++a) {
        for (std::size_t b = a + 1; b < m.raters.size(); ++b) {
          std::vector<int> va;
          std::vector<int> vb;
          for (std::size_t u = 0; u < m.units.size(); ++u) {
            if (m.values[a][u] && m.values[b][u]) {
              va.push_back(*m.values[a][u]);
              vb.push_back(*m.values[b][u]);
            }
          }
          const std::string key = m.raters[a] + "|" + m.raters[b];
          if (va.size() < 2) {
            kappas[key] = nullptr;
            continue;
          }
          const auto kappa = cohen_kappa(va, vb);
          kappas[key] = kappa ? ordered_json(*kappa) : ordered_json(nullptr);
        }
      }
    } else {
      entry["krippendorff_alpha"] = nullptr;
      entry["alpha_annotation"] = "insufficient raters or units";
    }
    dims[std::string(to_string(d))] = std::move(entry);
  }
  std::map<std::string, std::vector<Judgment>> by_episode;
  for (const auto& j : judgments) by_episode[j.episode_id].push_back(j);
  std::vector<ConsensusScores> cons;
  bool multi = !by_episode.empty();
  for (const auto& [_, js] : by_episode) {
    cons.push_back(consensus(js));
    if (js.size() < 2) multi = false;
  }
  report["mean_composite_sd"] = multi ? ordered_json(score_variance(cons)) : ordered_json(nullptr);
  return report;
}

}  // namespace tracejudge
