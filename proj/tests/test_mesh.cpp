#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "vasotrans/mesh.hpp"
#include "vasotrans/mesh_io.hpp"

using namespace vasotrans;

namespace {

constexpr double kPi = std::numbers::pi;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("vasotrans_" + name)).string();
}

}  // namespace

TEST(Section, DiskAreaIsInscribedPolygon) {
  const auto s = build_section_triangulation(0.0, 0.2, {OuterShape::Disk, 1.0}, 3, 32);
  EXPECT_NEAR(s.area(), 0.5 * 32 * std::sin(2 * kPi / 32), 1e-12);
  EXPECT_NEAR(s.area(Region::Vessel), 0.5 * 32 * 0.04 * std::sin(2 * kPi / 32), 1e-12);
  EXPECT_EQ(s.count_edges(FacetMarker::GammaS), 32u);
  EXPECT_EQ(s.count_edges(FacetMarker::OuterBoundary), 32u);
}

TEST(Section, RefinementKeepsAreaAndQuadruplesTriangles) {
  const auto s = build_section_triangulation(0.05, 0.1, {OuterShape::Square, 0.5}, 2, 16);
  const auto r = refine_uniform(s);
  EXPECT_EQ(r.triangles.size(), 4 * s.triangles.size());
  EXPECT_NEAR(r.area(), s.area(), 1e-12);
  EXPECT_NEAR(s.area(), 1.0, 1e-12);
  EXPECT_EQ(r.count_edges(FacetMarker::GammaV), 2 * s.count_edges(FacetMarker::GammaV));
}

TEST(Extrude, VolumeMarkersAndAudit) {
  const auto s = build_section_triangulation(0.0, 0.1, {OuterShape::Disk, 0.5}, 2, 16);
  const TetMesh m = extrude(s, 2.0, 6, ExtrusionAxis::along_x());
  EXPECT_NEAR(m.volume(), 2.0 * s.area(), 1e-12);
  EXPECT_NEAR(m.volume(Region::Vessel), 2.0 * s.area(Region::Vessel), 1e-12);
  const auto a = audit(m);
  EXPECT_TRUE(a.ok());
  EXPECT_GT(a.min_volume, 0.0);
  EXPECT_TRUE(m.has_marker(FacetMarker::GammaS));
  EXPECT_TRUE(m.has_marker(FacetMarker::EndS0));
  // interface area of the inscribed 16-gon prism
  EXPECT_NEAR(m.marked_area(FacetMarker::GammaS), 2.0 * 16 * 2 * 0.1 * std::sin(kPi / 16), 1e-12);
  for (const auto& v : m.vertices) {
    EXPECT_GE(v.x, -1e-14);
    EXPECT_LE(v.x, 2.0 + 1e-14);
  }
}

TEST(BoxMesh, CountsAndAudit) {
  const TetMesh m = build_box_mesh({0, 0, 0}, {1, 2, 1}, 3, 4, 2);
  EXPECT_EQ(m.num_cells(), 6u * 3 * 4 * 2);
  EXPECT_EQ(m.num_vertices(), 4u * 5 * 3);
  EXPECT_NEAR(m.volume(), 2.0, 1e-13);
  EXPECT_EQ(m.count_facets(FacetMarker::OuterBoundary), 2u * 2 * (3 * 4 + 4 * 2 + 3 * 2));
  EXPECT_TRUE(audit(m).ok());
}

TEST(Submesh, ParentMapsAreConsistent) {
  const auto s = build_section_triangulation(0.05, 0.1, {OuterShape::Disk, 0.4}, 2, 16);
  const TetMesh m = extrude(s, 1.0, 3, ExtrusionAxis::along_z());
  const TetMesh sub = extract_submesh(m, Region::Pvs);
  EXPECT_EQ(sub.parent_id, m.id);
  EXPECT_NEAR(sub.volume(), m.volume(Region::Pvs), 1e-13);
  for (std::size_t v = 0; v < sub.num_vertices(); ++v) {
    EXPECT_EQ(sub.vertices[v], m.vertices[sub.parent_vertex[v]]);
  }
  for (std::size_t c = 0; c < sub.num_cells(); ++c) EXPECT_EQ(m.cell_region[sub.parent_cell[c]], Region::Pvs);
  EXPECT_TRUE(sub.has_marker(FacetMarker::GammaV));
  EXPECT_TRUE(sub.has_marker(FacetMarker::GammaS));
  EXPECT_TRUE(audit(sub).ok());
}

TEST(LineMesh, YGraphSharesJunctionVertex) {
  std::vector<Curve> curves{Curve::straight({0, 0, 0}, {1, 0, 0}), Curve::straight({1, 0, 0}, {2, 1, 0}),
                            Curve::straight({1, 0, 0}, {2, -1, 0})};
  CenterlineGraph g(curves, {Junction{{1, 0, 0}, {0}, {1, 2}}}, {{0, CurveEnd::Start}},
                    {{1, CurveEnd::End}, {2, CurveEnd::End}});
  const LineMesh lm = build_line_mesh(g, 0.1);
  const std::size_t n1 = lm.curve_vertices[1].size() - 1;
  EXPECT_EQ(lm.curve_vertices[0].size(), 11u);
  EXPECT_EQ(lm.num_vertices(), 10 + 2 * n1 + 1);
  EXPECT_EQ(lm.curve_vertices[0].back(), lm.curve_vertices[1].front());
  EXPECT_EQ(lm.curve_vertices[0].back(), lm.curve_vertices[2].front());
  EXPECT_EQ(lm.markers.at("INLET").size(), 1u);
  EXPECT_EQ(lm.markers.at("OUTLET").size(), 2u);
  EXPECT_EQ(lm.markers.at("JUNCTION").size(), 1u);
  double total = 0.0;
  for (std::size_t e = 0; e < lm.segments.size(); ++e) total += lm.segment_length(e);
  EXPECT_NEAR(total, 1.0 + 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(MeshIo, VtkRoundTrip) {
  const auto s = build_section_triangulation(0.0, 0.1, {OuterShape::Disk, 0.5}, 1, 8);
  const TetMesh m = extrude(s, 1.0, 2, ExtrusionAxis::along_x());
  std::vector<double> f(m.num_vertices());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(0.1 * i) / 3.0;
  const std::string path = temp_path("roundtrip.vtk");
  write_vtk(path, m, {{"f", f}});
  const auto back = read_vtk(path);
  ASSERT_EQ(back.mesh.num_vertices(), m.num_vertices());
  ASSERT_EQ(back.mesh.num_cells(), m.num_cells());
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    EXPECT_EQ(back.mesh.vertices[i], m.vertices[i]);
    EXPECT_EQ(back.point_data.at("f")[i], f[i]);
  }
  EXPECT_EQ(back.mesh.cell_region, m.cell_region);
  EXPECT_EQ(back.mesh.facet_marker, m.facet_marker);
  EXPECT_EQ(back.mesh.facets, m.facets);
  std::filesystem::remove(path);
}

TEST(MeshIo, MissingFileThrows) { EXPECT_THROW(read_vtk("/nonexistent/none.vtk"), IoError); }

TEST(Markers, StringRoundTrip) {
  for (auto m : {FacetMarker::GammaV, FacetMarker::GammaS, FacetMarker::OuterBoundary, FacetMarker::EndS0,
                 FacetMarker::EndSL, FacetMarker::InnerWall}) {
    EXPECT_EQ(facet_marker_from_string(to_string(m)), m);
  }
  EXPECT_EQ(region_from_string(to_string(Region::Pvs)), Region::Pvs);
}
