#include <cstdio>
#include <filesystem>
#include <iostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "criteria.hpp"

// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.
int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const auto work = argc > 1 ? std::filesystem::path(argv[1])
                             : std::filesystem::temp_directory_path() / "tracejudge_acceptance";
  const auto results = tj_accept::run_all(work);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << fmt::format("{} {} [{:.1f}s] {}\n", r.pass ? "PASS" : "FAIL", r.name, r.seconds, r.summary);
    for (const auto& f : r.failures) std::cout << "    " << f << '\n';
    failed += r.pass ? 0 : 1;
  }
  std::cout << fmt::format("{}/{} criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
