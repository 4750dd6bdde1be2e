#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "vasotrans/geometry.hpp"

using namespace vasotrans;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Curve, StraightLengthPointAndProjection) {
  const Curve c = Curve::straight({0, 0, 0}, {3, 4, 0}, 5);
  EXPECT_NEAR(c.length(), 5.0, 1e-14);
  const Vec3 p = c.point_at(2.5);
  EXPECT_NEAR(p.x, 1.5, 1e-14);
  EXPECT_NEAR(p.y, 2.0, 1e-14);
  const auto pr = c.project({1.5 - 0.8, 2.0 + 0.6, 0.0});
  EXPECT_NEAR(pr.s, 2.5, 1e-12);
  EXPECT_NEAR(pr.distance, 1.0, 1e-12);
}

TEST(Curve, FramesAreOrthonormalAndRightHanded) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= 60; ++i) {
    const double t = 0.1 * i;
    pts.push_back({std::cos(t), std::sin(t), 0.3 * t});
  }
  for (const auto& f : frenet_frames(pts)) {
    EXPECT_NEAR(norm(f.T), 1.0, 1e-12);
    EXPECT_NEAR(norm(f.N), 1.0, 1e-12);
    EXPECT_NEAR(dot(f.T, f.N), 0.0, 1e-12);
    const Vec3 b = cross(f.T, f.N);
    EXPECT_NEAR(norm(b - f.B), 0.0, 1e-12);
  }
}

TEST(Curve, StraightFramesDoNotTwist) {
  const Curve c = Curve::straight({0, 0, 0}, {0, 0, 2}, 8);
  const auto frames = c.frames();
  for (const auto& f : frames) {
    EXPECT_NEAR(norm(f.N - frames.front().N), 0.0, 1e-14);
  }
}

TEST(CenterlineGraph, ValidateRejectsDanglingEnd) {
  std::vector<Curve> curves{Curve::straight({0, 0, 0}, {1, 0, 0})};
  CenterlineGraph ok(curves, {}, {{0, CurveEnd::Start}}, {{0, CurveEnd::End}});
  EXPECT_NO_THROW(ok.validate());
  EXPECT_THROW(CenterlineGraph(curves, {}, {{0, CurveEnd::Start}}, {}), GeometryError);
}

TEST(CenterlineGraph, ValidateRejectsJunctionAwayFromEndpoint) {
  std::vector<Curve> curves{Curve::straight({0, 0, 0}, {1, 0, 0}), Curve::straight({1, 0, 0}, {2, 0, 0})};
  EXPECT_THROW(
      CenterlineGraph(curves, {Junction{{1.5, 0, 0}, {0}, {1}}}, {{0, CurveEnd::Start}}, {{1, CurveEnd::End}}),
      GeometryError);
}

TEST(RadiusProfile, DerivativesOfBuiltIns) {
  const auto lin = RadiusProfile::linear(0.2, 0.1, 2.0);
  EXPECT_NEAR(lin(1.0, 0.0), 0.15, 1e-15);
  EXPECT_NEAR(lin.ds(0.3, 0.0), -0.05, 1e-15);
  const auto puls = RadiusProfile::sinusoidal_pulsation(0.1, 0.2, 1.5);
  const double t = 0.37, h = 1e-6;
  const double fd = (puls(0.0, t + h) - puls(0.0, t - h)) / (2 * h);
  EXPECT_NEAR(puls.dt(0.0, t), fd, 1e-8);
  EXPECT_TRUE(puls.time_dependent());
  EXPECT_FALSE(RadiusProfile::constant(0.1).time_dependent());
}

TEST(VesselGeometry, AnnulusMetrics) {
  const auto g = VesselGeometry::annulus(0.05, 0.1, 1.0);
  const auto m = g.metrics(0.5, 0.0);
  EXPECT_NEAR(m.area, kPi * (0.01 - 0.0025), 1e-15);
  EXPECT_NEAR(m.perimeter, 2 * kPi * 0.1, 1e-15);
  EXPECT_NEAR(m.diameter, 0.2, 1e-15);
  EXPECT_THROW(g.metrics(1.5, 0.0), GeometryError);
}

TEST(VesselGeometry, UniformProfileHasNoDrift) {
  const VesselGeometry g(RadiusProfile::constant(0.0), RadiusProfile::linear(0.2, 0.1, 1.0), 1.0);
  EXPECT_NEAR(g.gs(0.4, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(g.metrics(0.5, 0.0).dA_ds, 2 * kPi * 0.15 * -0.1, 1e-14);
}

TEST(ShapeProfile, MeanCheck) {
  EXPECT_TRUE(check_shape_profile(ShapeProfile::uniform(), 0.0, 0.3).pass);
  const auto p = check_shape_profile(ShapeProfile::poiseuille(), 0.0, 0.3);
  EXPECT_TRUE(p.pass);
  EXPECT_NEAR(p.mean, 1.0, 1e-8);
  EXPECT_FALSE(check_shape_profile(ShapeProfile::constant(2.0), 0.0, 0.3).pass);
}

TEST(NetworkJson, ParsesJunctionAndProfiles) {
  const std::string doc = R"({
    "curves": [
      {"points": [[0,0,0],[1,0,0]], "radius": {"profile": "constant", "R2": 0.1}},
      {"points": [[1,0,0],[2,1,0]], "radius": {"profile": "linear", "R2_start": 0.08, "R2_end": 0.05}},
      {"points": [[1,0,0],[2,-1,0]], "radius": {"profile": "sinusoidal-pulsation", "R2": 0.06, "amplitude": 0.1}}
    ],
    "junctions": [{"members": [{"curve": 0, "end": "end"}, {"curve": 1, "end": "start"}, {"curve": 2, "end": "start"}]}],
    "inlets": [{"curve": 0, "end": "start"}],
    "outlets": [{"curve": 1, "end": "end"}, {"curve": 2, "end": "end"}]
  })";
  const auto net = load_network_json(doc);
  EXPECT_NO_THROW(net.graph.validate());
  ASSERT_EQ(net.geometry.size(), 3u);
  EXPECT_NEAR(net.geometry[1].R2(net.geometry[1].length(), 0.0), 0.05, 1e-15);
  EXPECT_TRUE(net.geometry[2].time_dependent());
  ASSERT_EQ(net.graph.junctions().size(), 1u);
  EXPECT_EQ(net.graph.junctions()[0].outgoing.size(), 2u);
}

TEST(NetworkJson, RejectsUnknownProfile) {
  const std::string doc = R"({"curves": [{"points": [[0,0,0],[1,0,0]], "radius": {"profile": "spiral"}}]})";
  EXPECT_THROW(load_network_json(doc), GeometryError);
  EXPECT_THROW(load_network_json("{not json"), GeometryError);
}
