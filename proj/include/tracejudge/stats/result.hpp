#pragma once

#include <limits>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace tracejudge::stats {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Uniform envelope for every hypothesis test. A degenerate result has no meaningful
/// statistic or p-value (NaN), and `note` says why.
struct TestResult {
  double statistic = kNaN;
  double p_value = kNaN;
  bool degenerate = false;
  std::string note;
  std::map<std::string, double> extras;

  static TestResult make_degenerate(std::string why) {
    TestResult r;
    r.degenerate = true;
    r.note = std::move(why);
    return r;
  }
};

/// NaN and infinities serialize as null.
nlohmann::ordered_json to_json(const TestResult& r);
nlohmann::ordered_json number_or_null(double v);

}  // namespace tracejudge::stats
