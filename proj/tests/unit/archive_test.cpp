#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "tracejudge/archive.hpp"

namespace tj = tracejudge;

namespace {

std::vector<tj::Judgment> three_judgments(const tj::Episode& e) {
  return {tj::reference_judge(e, "a"), tj::reference_judge(e, "b"), tj::reference_judge(e, "c")};
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST(Archive, JudgmentsPlusConsensusLines) {
  const auto dir = tj_test::scratch_dir("archive_lines");
  std::mt19937_64 rng(1);
  const auto e = tj_test::random_episode(rng, "e1");
  const auto js = three_judgments(e);
  tj::Archive archive(dir / "a.jsonl");
  archive.append(e.id, js, tj::consensus(js));
  EXPECT_EQ(line_count(dir / "a.jsonl"), 4u);
  const auto records = archive.read();
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].judgment, js[0]);
  EXPECT_EQ(records[3].kind, tj::ArchiveRecord::Kind::Consensus);
  EXPECT_FALSE(records[3].duplicate);
}

TEST(Archive, RerunAppendsAndFlagsDuplicates) {
  const auto dir = tj_test::scratch_dir("archive_dup");
  std::mt19937_64 rng(2);
  const auto e = tj_test::random_episode(rng, "e1");
  const auto js = three_judgments(e);
  {
    tj::Archive archive(dir / "a.jsonl");
    archive.append(e.id, js, tj::consensus(js));
  }
  tj::Archive reopened(dir / "a.jsonl");
  reopened.append(e.id, js, tj::consensus(js));
  const auto records = reopened.read();
  ASSERT_EQ(records.size(), 8u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_FALSE(records[i].duplicate);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_TRUE(records[i].duplicate);
}

TEST(Archive, ErrorRecordsKeepRawOutput) {
  const auto dir = tj_test::scratch_dir("archive_err");
  tj::Archive archive(dir / "a.jsonl");
  archive.append_error("e9", "judge-x", "parse failure", "raw \"model\" text\nwith newline");
  const auto records = archive.read();
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].kind, tj::ArchiveRecord::Kind::Error);
  EXPECT_EQ(records[0].raw, "raw \"model\" text\nwith newline");
  EXPECT_EQ(records[0].judge_id, "judge-x");
}

TEST(Archive, ConcurrentAppendsAreSerialized) {
  const auto dir = tj_test::scratch_dir("archive_mt");
  tj::Archive archive(dir / "a.jsonl");
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 rng(static_cast<std::uint64_t>(t));
      for (int i = 0; i < 10; ++i) {
        const auto e = tj_test::random_episode(rng, "t" + std::to_string(t) + "_" + std::to_string(i));
        const auto js = three_judgments(e);
        archive.append(e.id, js, tj::consensus(js));
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(archive.read().size(), 160u);
}

TEST(Archive, JsonRoundTrip) {
  std::mt19937_64 rng(3);
  const auto e = tj_test::random_episode(rng, "e");
  const auto j = tj::reference_judge(e);
  EXPECT_EQ(tj::judgment_from_json(tj::to_json(j)), j);
  const auto js = three_judgments(e);
  const auto c = tj::consensus(js);
  const auto back = tj::consensus_from_json(tj::to_json(c));
  EXPECT_EQ(back.mean_scores, c.mean_scores);
  EXPECT_EQ(back.per_judge, c.per_judge);
}
