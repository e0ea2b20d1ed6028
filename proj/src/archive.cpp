#include "tracejudge/archive.hpp"

#include <fstream>

#include <fmt/format.h>

#include "tracejudge/error.hpp"

namespace tracejudge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Dimension dimension_key(const std::string& key) {
  auto d = parse_dimension(key);
  if (!d) throw DataError(fmt::format("archive: unknown dimension '{}'", key));
  return *d;
}

template <class T>
ordered_json dim_object(const DimMap<T>& m) {
  ordered_json o = ordered_json::object();
  for (Dimension d : kDimensions) o[std::string(to_string(d))] = m[d];
  return o;
}

template <class T>
DimMap<T> dim_map(const json& o) {
  DimMap<T> m;
  for (Dimension d : kDimensions) m[d] = o.at(std::string(to_string(d))).get<T>();
  for (const auto& [k, _] : o.items()) dimension_key(k);
  return m;
}

}  // namespace

ordered_json to_json(const Judgment& j) {
  ordered_json o;
  o["judge_id"] = j.judge_id;
  o["episode_id"] = j.episode_id;
  o["scores"] = dim_object(j.scores);
  o["justifications"] = dim_object(j.justifications);
  o["failures"] = ordered_json::array();
  for (const auto& f : j.failures) {
    o["failures"].push_back(
        {{"dimension", std::string(to_string(f.dimension))}, {"label", std::string(to_string(f.label))}});
  }
  return o;
}

Judgment judgment_from_json(const json& o) {
  Judgment j;
  j.judge_id = o.at("judge_id").get<std::string>();
  j.episode_id = o.at("episode_id").get<std::string>();
  j.scores = dim_map<int>(o.at("scores"));
  j.justifications = dim_map<std::string>(o.at("justifications"));
  for (const auto& f : o.at("failures")) {
    auto label = parse_failure_label(f.at("label").get<std::string>());
    if (!label) throw DataError("archive: unknown failure label");
    j.failures.push_back({dimension_key(f.at("dimension").get<std::string>()), *label});
  }
  validate(j);
  return j;
}

ordered_json to_json(const ConsensusScores& c) {
  ordered_json o;
  o["episode_id"] = c.episode_id;
  o["mean_scores"] = dim_object(c.mean_scores);
  o["composite"] = c.composite;
  auto& per = o["per_judge"] = ordered_json::object();
  for (const auto& [judge, scores] : c.per_judge) per[judge] = dim_object(scores);
  return o;
}

ConsensusScores consensus_from_json(const json& o) {
  ConsensusScores c;
  c.episode_id = o.at("episode_id").get<std::string>();
  c.mean_scores = dim_map<double>(o.at("mean_scores"));
  c.composite = o.at("composite").get<double>();
  for (const auto& [judge, scores] : o.at("per_judge").items()) {
    c.per_judge[judge] = dim_map<int>(scores);
  }
  return c;
}

Archive::Archive(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& rec : read()) seen_.insert(rec.episode_id);
  }
}

void Archive::write_batch(const std::vector<std::string>& lines) {
  auto tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("archive: cannot write {}", tmp.string()));
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_, std::ios::binary);
      out << in.rdbuf();
    }
    for (const auto& line : lines) out << line << '\n';
    out.flush();
    if (!out) throw DataError(fmt::format("archive: write to {} failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw DataError(fmt::format("archive: rename to {} failed: {}", path_.string(), ec.message()));
}

void Archive::append(const std::string& episode_id, std::span<const Judgment> judgments,
                     const ConsensusScores& cons) {
  std::lock_guard lock(mu_);
  const bool duplicate = seen_.count(episode_id) > 0;
  std::vector<std::string> lines;
  for (const auto& j : judgments) {
    if (j.episode_id != episode_id) {
      throw DataError(fmt::format("archive: judgment for {} filed under {}", j.episode_id, episode_id));
    }
    ordered_json rec;
    rec["kind"] = "judgment";
    rec["episode_id"] = episode_id;
    rec["duplicate"] = duplicate;
    rec["judgment"] = to_json(j);
    lines.push_back(rec.dump());
  }
  ordered_json rec;
  rec["kind"] = "consensus";
  rec["episode_id"] = episode_id;
  rec["duplicate"] = duplicate;
  rec["consensus"] = to_json(cons);
  lines.push_back(rec.dump());
  write_batch(lines);
  seen_.insert(episode_id);
}

void Archive::append_error(const std::string& episode_id, const std::string& judge_id,
                           const std::string& error, const std::string& raw) {
  std::lock_guard lock(mu_);
  ordered_json rec;
  rec["kind"] = "error";
  rec["episode_id"] = episode_id;
  rec["duplicate"] = false;
  rec["judge_id"] = judge_id;
  rec["error"] = error;
  rec["raw"] = raw;
  write_batch({rec.dump()});
}

std::vector<ArchiveRecord> Archive::read() const {
  std::ifstream in(path_);
  if (!in) throw DataError(fmt::format("archive: cannot read {}", path_.string()));
  std::vector<ArchiveRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ArchiveRecord r;
      r.episode_id = j.at("episode_id").get<std::string>();
      r.duplicate = j.at("duplicate").get<bool>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "judgment") {
        r.kind = ArchiveRecord::Kind::Judgment;
        r.judgment = judgment_from_json(j.at("judgment"));
      } else if (kind == "consensus") {
        r.kind = ArchiveRecord::Kind::Consensus;
        r.consensus = consensus_from_json(j.at("consensus"));
      } else if (kind == "error") {
        r.kind = ArchiveRecord::Kind::Error;
        r.judge_id = j.at("judge_id").get<std::string>();
        r.error = j.at("error").get<std::string>();
        r.raw = j.at("raw").get<std::string>();
      } else {
        throw DataError(fmt::format("unknown record kind '{}'", kind));
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path_.string(), lineno, e.what()));
    }
  }
  return out;
}

}  // namespace tracejudge
