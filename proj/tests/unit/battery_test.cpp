#include <fstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "tracejudge/battery.hpp"
#include "tracejudge/error.hpp"

namespace tj = tracejudge;

namespace {

tj::BatteryOptions fast() {
  tj::BatteryOptions o;
  o.bootstrap_resamples = 400;
  o.mcs_resamples = 300;
  o.seed = 3;
  return o;
}

}  // namespace

TEST(Battery, IdenticalModelsAreDegenerate) {
  auto p = tj_test::synthetic_panel(1, 3, 120, 1.0);
  p.forecast[0] = p.forecast[1];
  const auto r = tj::stats_battery(p, fast());
  EXPECT_TRUE(r.all_degenerate);
  tj::check_stats_report(r.report);
}

TEST(Battery, HalvedErrorsWinUnderEveryLoss) {
  const auto p = tj_test::synthetic_panel(2, 4, 250, 0.5);
  const auto r = tj::stats_battery(p, fast());
  EXPECT_FALSE(r.all_degenerate);
  tj::check_stats_report(r.report);
  const auto& dm = r.report.at("dm");
  ASSERT_EQ(dm.size(), 4u);
  for (const auto& [loss, entry] : dm.items()) {
    EXPECT_LT(entry.at("statistic").get<double>(), 0.0) << loss;
  }
}

TEST(Battery, ReportLayoutCheckRejectsMissingSections) {
  const auto p = tj_test::synthetic_panel(3, 2, 80, 0.8);
  auto report = nlohmann::json(tj::stats_battery(p, fast()).report);
  tj::check_stats_report(report);
  report.erase("dm");
  EXPECT_THROW(tj::check_stats_report(report), tj::DataError);
  EXPECT_THROW(tj::check_stats_report(nlohmann::json::array()), tj::DataError);
}

TEST(Battery, UnknownModelRejected) {
  const auto p = tj_test::synthetic_panel(4, 2, 60, 0.8);
  auto o = fast();
  o.first = "nope";
  EXPECT_THROW(tj::stats_battery(p, o), tj::DataError);
}

TEST(ForecastCsv, RoundTrip) {
  const auto p = tj_test::synthetic_panel(5, 3, 40, 0.7);
  const auto path = tj_test::scratch_dir("forecast_csv") / "f.csv";
  tj::write_forecast_csv(path, p);
  const auto back = tj::read_forecast_csv(path);
  EXPECT_EQ(back.models, p.models);
  EXPECT_EQ(back.assets, p.assets);
  EXPECT_EQ(back.days, p.days);
  EXPECT_EQ(back.actual, p.actual);
  EXPECT_EQ(back.forecast, p.forecast);
}

TEST(ForecastCsv, MissingKeyNamed) {
  const auto dir = tj_test::scratch_dir("forecast_gap");
  std::ofstream(dir / "f.csv") << "model,asset,date,previous,actual,forecast,vix\n"
                                  "post,AAA,2024-01-02,100,101,100.5,14\n"
                                  "pre,AAA,2024-01-02,100,101,100.2,14\n"
                                  "post,AAA,2024-01-03,101,102,101.5,15\n";
  try {
    tj::read_forecast_csv(dir / "f.csv");
    FAIL() << "misaligned panel accepted";
  } catch (const tj::DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("pre"), std::string::npos) << what;
    EXPECT_NE(what.find("2024-01-03"), std::string::npos) << what;
  }
}

TEST(Losses, PanelShapeAndIndicator) {
  const auto p = tj_test::synthetic_panel(6, 2, 50, 0.9);
  for (auto k : {tj::stats::LossKind::SE, tj::stats::LossKind::AE, tj::stats::LossKind::MAPE, tj::stats::LossKind::QLIKE}) {
    const auto lp = tj::loss_panel(p, k);
    lp.validate();
    EXPECT_EQ(lp.models, p.models);
  }
  const auto hv = tj::high_vix_indicator(p);
  ASSERT_EQ(hv.size(), 50u);
  double ones = 0.0;
  for (double v : hv) {
    EXPECT_TRUE(v == 0.0 || v == 1.0);
    ones += v;
  }
  EXPECT_GE(ones, 25.0);
}
