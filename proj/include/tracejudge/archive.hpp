#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/agreement.hpp"
#include "tracejudge/judge.hpp"

namespace tracejudge {

nlohmann::ordered_json to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ConsensusScores& c);
ConsensusScores consensus_from_json(const nlohmann::json& j);

struct ArchiveRecord {
  enum class Kind { Judgment, Consensus, Error };
  Kind kind = Kind::Judgment;
  std::string episode_id;
  bool duplicate = false;
  std::optional<Judgment> judgment;
  std::optional<ConsensusScores> consensus;
  std::string judge_id;  // Error records
  std::string error;
  std::string raw;
};

/// Append-only JSON-lines archive. Each batch is written to a sibling temp file holding
/// the previous contents plus the new lines, then renamed over the archive, so readers
/// never see a partial batch. Appends from multiple threads are serialized.
class Archive {
 public:
  explicit Archive(std::filesystem::path path);

  /// One line per judgment plus one consensus line. Records for an episode id already
  /// present are flagged duplicate.
  void append(const std::string& episode_id, std::span<const Judgment> judgments,
              const ConsensusScores& consensus);
  /// Keeps the raw provider output of a failed judgment.
  void append_error(const std::string& episode_id, const std::string& judge_id,
                    const std::string& error, const std::string& raw);

  std::vector<ArchiveRecord> read() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void write_batch(const std::vector<std::string>& lines);

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::set<std::string> seen_;
};

}  // namespace tracejudge
