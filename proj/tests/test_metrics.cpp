#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "metafold/metrics.hpp"

using namespace metafold;

TEST(ProjectedArea, RectangleAndHalfFold) {
  const auto r = fixtures::rectangle(0.4, 0.6);
  EXPECT_NEAR(projected_area(r.v, r.t) / 0.24, 1.0, 0.01);
  const auto f = fixtures::half_folded(r);
  EXPECT_NEAR(projected_area(f.v, f.t) / 0.12, 1.0, 0.01);
}

TEST(ProjectedArea, MatchesMonteCarloUnion) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 3; ++k) {
    const auto m = fixtures::random_planar(rng);
    const double mc = fixtures::monte_carlo_area(m, 1'000'000, 100 + k);
    EXPECT_NEAR(projected_area(m.v, m.t) / mc, 1.0, 0.02);
  }
}

TEST(ProjectedArea, RotationInvariant) {
  std::mt19937_64 rng(9);
  const auto m = fixtures::random_planar(rng);
  const double base = projected_area(m.v, m.t);
  for (double theta : {0.2, 0.785, 1.3, 2.9}) {
    auto r = m;
    for (auto& p : r.v) p = rotate_z(p, theta);
    EXPECT_NEAR(projected_area(r.v, r.t) / base, 1.0, 0.02) << theta;
  }
}

TEST(ProjectedArea, DegenerateProjection) {
  // A vertical sheet projects onto a segment.
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {1, 0, 1}};
  std::vector<Triangle> t{{0, 1, 2}};
  try {
    projected_area(v, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(Rectangularity, AnalyticShapes) {
  const auto r = fixtures::rectangle(0.4, 0.6);
  EXPECT_NEAR(rectangularity(r.v, r.t), 1.0, 0.02);
  // Triangle area (sqrt3/4) a^2 over its tightest box, a x (sqrt3/2) a.
  const auto tri = fixtures::equilateral(0.5);
  EXPECT_NEAR(rectangularity(tri.v, tri.t), 0.5, 0.02);
  const auto l = fixtures::l_shape();
  EXPECT_LT(rectangularity(l.v, l.t), 0.8);
  EXPECT_NEAR(rectangularity(l.v, l.t), 0.75, 0.02);
}

TEST(Rectangularity, NeverAboveOne) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 20; ++k) {
    const auto m = fixtures::random_planar(rng);
    EXPECT_LE(rectangularity(m.v, m.t), 1.0 + 0.02);
  }
  auto r = fixtures::rectangle(1.0, 0.3, 40, 12);
  for (auto& p : r.v) p = rotate_z(p, 0.4);
  EXPECT_LE(rectangularity(r.v, r.t), 1.0 + 0.02);
}

TEST(AreaRatio, IdentityAndHalfFold) {
  const auto r = fixtures::rectangle(0.4, 0.6);
  EXPECT_NEAR(area_ratio(r.v, r.v, r.t), 1.0, 0.02);
  const auto f = fixtures::half_folded(r);
  EXPECT_NEAR(area_ratio(f.v, r.v, r.t), 0.5, 0.03);
}

TEST(Judge, ThresholdArithmetic) {
  const MetricThresholds th;
  EXPECT_DOUBLE_EQ(th.min_rectangularity, 0.75);
  EXPECT_DOUBLE_EQ(th.max_area_ratio, 0.55);
  EXPECT_TRUE(judge({0.83, 0.33}, th));
  EXPECT_TRUE(judge({0.78, 0.44}, th));  // both thresholds met with the defaults
  EXPECT_FALSE(judge({0.78, 0.60}, th));
  EXPECT_FALSE(judge({0.74, 0.30}, th));
}

TEST(Judge, Monotone) {
  const MetricThresholds th;
  for (double r = 0.5; r <= 1.0; r += 0.05) {
    for (double a = 0.2; a <= 0.9; a += 0.05) {
      if (!judge({r, a}, th)) continue;
      EXPECT_TRUE(judge({r + 0.01, a}, th));
      EXPECT_TRUE(judge({r, a - 0.01}, th));
    }
  }
}

TEST(Report, KeyValueRoundTripAndCsv) {
  FoldReport r{0.8125, 0.3333, true, 0.0042, 0.24, 0.08};
  std::stringstream ss;
  write_report(ss, r);
  const auto back = read_report(ss);
  EXPECT_EQ(back.rectangularity, r.rectangularity);
  EXPECT_EQ(back.area_ratio, r.area_ratio);
  EXPECT_EQ(back.success, r.success);
  EXPECT_EQ(back.final_area, r.final_area);

  const std::vector<FoldReport> reports{r, {0.7, 0.5, false, 0, 1, 1}};
  const auto s = summarize(reports);
  EXPECT_NEAR(s.rectangularity, 0.75625, 1e-12);
  EXPECT_NEAR(s.success_rate, 0.5, 1e-12);
  std::ostringstream csv;
  write_summary_csv(csv, {{"short-sleeve", s}});
  EXPECT_EQ(csv.str(), "metric,short-sleeve\nrectangularity,0.7562\narea_ratio,0.4166\nsuccess_rate,0.5000\nepisodes,2\n");
}
