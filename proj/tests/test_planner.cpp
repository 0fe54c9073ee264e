#include <gtest/gtest.h>

#include <numbers>

#include "metafold/metrics.hpp"
#include "metafold/planner.hpp"

using namespace metafold;

namespace {

// Flat sheet x in [-0.5, 0.5], y in [0, 0.3] at height z0, 0.05 m spacing.
PointCloudFrame sheet(double z0 = 0.002) {
  PointCloudFrame f;
  for (int i = -10; i <= 10; ++i)
    for (int j = 0; j <= 6; ++j) f.points.emplace_back(0.05 * i, 0.05 * j, z0);
  return f;
}

// Fold line x = 0, left half (x < 0) moves.
FoldStage left_onto_right() {
  FoldStage s;
  s.id = StageId::LeftLegOntoRight;
  s.line_point = Vec2::Zero();
  s.line_direction = Vec2(0, 1);
  s.moving_side = 1;
  return s;
}

}  // namespace

TEST(PlanArc, ClosedFormSamples) {
  const auto p = plan_arc(Vec3(0, 0, 0), Vec3(1, 0, 0), 3, 0.5);
  ASSERT_EQ(p.samples.size(), 3u);
  EXPECT_NEAR((p.samples[0] - Vec3(0, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((p.samples[1] - Vec3(0.5, 0, 0.5)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((p.samples[2] - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(PlanArc, FlatLimitAndReversal) {
  const Vec3 a(0.1, -0.2, 0.0), b(-0.3, 0.4, 0.0);
  for (const auto& s : plan_arc(a, b, 25, 1e-12).samples) EXPECT_LE(s.z(), 1e-12);
  const auto fwd = plan_arc(a, b, 25, 0.4).samples;
  const auto back = plan_arc(b, a, 25, 0.4).samples;
  for (std::size_t k = 0; k < fwd.size(); ++k) EXPECT_NEAR((fwd[k] - back[fwd.size() - 1 - k]).norm(), 0.0, 1e-12);
  for (const auto& s : fwd) EXPECT_GE(s.z(), 0.0);
  EXPECT_EQ(fwd.front(), a);
  EXPECT_EQ(fwd.back(), b);
}

TEST(PlanArc, Errors) {
  try {
    plan_arc(Vec3::Zero(), Vec3(0.0005, 0, 0), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSegment);
  }
  EXPECT_THROW(plan_arc(Vec3::Zero(), Vec3(1, 0, 0), 1), Error);
}

TEST(Hinge, FlatSheetEndsOnReflection) {
  const auto obs = sheet();
  const HingeParams hp;
  const auto t = predict_hinge_trajectory(obs, left_onto_right(), 30, hp);
  ASSERT_EQ(t.frame_count(), 30u);
  EXPECT_FALSE(t.converged);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_EQ(t.frames[0][i], obs[i]);
    const Vec3& p = obs[i];
    const Vec3& q = t.final_frame()[i];
    if (p.x() < -hp.side_tolerance) {
      EXPECT_NEAR((q - Vec3(-p.x(), p.y(), p.z() + hp.layer_thickness)).norm(), 0.0, 1e-9);
    } else {
      EXPECT_EQ(q, p);
    }
  }
}

TEST(Hinge, FinalFrameReplansAsConverged) {
  const auto stage = left_onto_right();
  const auto t = predict_hinge_trajectory(sheet(), stage, 30);
  const auto again = predict_hinge_trajectory(t.final_frame(), stage, 30);
  EXPECT_TRUE(again.converged);
  for (const auto& f : again.frames) EXPECT_EQ(f.points, t.final_frame().points);
}

TEST(Hinge, NothingToFold) {
  PointCloudFrame right;
  for (int i = 1; i <= 5; ++i) right.points.emplace_back(0.05 * i, 0.0, 0.002);
  try {
    predict_hinge_trajectory(right, left_onto_right(), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NothingToFold);
  }
}

TEST(Hinge, ResumesFromNinetyDegrees) {
  const double z0 = 0.002;
  auto obs = sheet(z0);
  // Stand the left half up: x = -r becomes height r above the hinge.
  for (auto& p : obs.points) {
    if (p.x() < 0.0) p = Vec3(0.0, p.y(), z0 - p.x());
  }
  const HingeParams hp;
  const auto t = predict_hinge_trajectory(obs, left_onto_right(), 31, hp);
  EXPECT_EQ(t.frames[0].points, obs.points);
  EXPECT_NEAR(t.remaining_fraction, 0.5, 1e-9);
  const auto& mid = t.frames[15];
  const auto& last = t.final_frame();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double r = obs[i].z() - z0;
    if (r < hp.lift_tolerance) continue;
    // Halfway through the remaining quarter turn the angle is 3pi/4.
    const double phi = 0.75 * std::numbers::pi;
    EXPECT_NEAR(mid[i].x(), -r * std::cos(phi), 1e-9);
    EXPECT_NEAR(mid[i].z(), z0 + r * std::sin(phi) + 0.5 * hp.layer_thickness, 1e-9);
    EXPECT_NEAR(last[i].x(), r, 1e-9);
    EXPECT_NEAR(last[i].z(), z0 + hp.layer_thickness, 1e-9);
  }
}

TEST(Hinge, MovingSetIsRigid) {
  const auto obs = sheet();
  const auto t = predict_hinge_trajectory(obs, left_onto_right(), 20);
  std::vector<std::size_t> moving;
  for (std::size_t i = 0; i < obs.size(); ++i)
    if (obs[i].x() < -0.005) moving.push_back(i);
  for (const auto& f : t.frames) {
    for (std::size_t a = 0; a < moving.size(); ++a) {
      for (std::size_t b = a + 1; b < moving.size(); ++b) {
        const double d0 = (obs[moving[a]] - obs[moving[b]]).norm();
        EXPECT_NEAR((f[moving[a]] - f[moving[b]]).norm(), d0, 1e-9);
      }
    }
  }
}

TEST(Hinge, EquivariantUnderRotationAboutZ) {
  const auto obs = sheet();
  const auto stage = left_onto_right();
  const auto t = predict_hinge_trajectory(obs, stage, 12);
  for (double theta : {0.3, 1.2, -2.5}) {
    PointCloudFrame rot = obs;
    for (auto& p : rot.points) p = rotate_z(p, theta);
    const auto tr = predict_hinge_trajectory(rot, stage.rotated(theta), 12);
    ASSERT_EQ(tr.frame_count(), t.frame_count());
    for (std::size_t m = 0; m < t.frame_count(); ++m) {
      for (std::size_t i = 0; i < obs.size(); ++i) {
        EXPECT_NEAR((tr.frames[m][i] - rotate_z(t.frames[m][i], theta)).norm(), 0.0, 1e-9);
      }
    }
  }
}

TEST(Rollout, NoSleeveBottomUpHalvesTheArea) {
  GarmentSpec spec = GarmentSpec::defaults(Category::NoSleeve);
  spec.resolution = 0.03;
  ClothSim sim(build_garment(spec));
  sim.settle(1.0);
  const auto before = sim.positions();
  const auto obs0 = sim.observe(128);
  const auto stage = make_stage(StageId::BottomUp, sim.mesh());
  RolloutParams rp;
  rp.points = 128;
  const auto t = rollout_oracle_trajectory(sim, stage, 30, rp);
  ASSERT_EQ(t.frame_count(), 30u);
  EXPECT_EQ(t.frames[0].points, obs0.points);
  EXPECT_GT(t.frame_period, 0.0);
  EXPECT_LE(area_ratio(sim.positions(), before, sim.mesh().triangles), 0.65);
}

TEST(Rollout, ZeroLengthStageIsDegenerate) {
  ClothSim sim(build_garment(GarmentSpec::defaults(Category::NoSleeve)));
  auto stage = make_stage(StageId::BottomUp, sim.mesh());
  stage.line_point = ground(sim.positions()[sim.mesh().keypoint(stage.grasp_keypoint)]);
  try {
    rollout_oracle_trajectory(sim, stage, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSegment);
  }
}
