#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vasotrans/geometry.hpp"
#include "vasotrans/vec3.hpp"

namespace vasotrans {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Region : std::int8_t { Vessel = 0, Pvs = 1, Surroundings = 2 };

enum class FacetMarker : std::int8_t {
  GammaV = 1,         // vessel / perivascular interface (r = R1)
  GammaS = 2,         // interface adjacent to the surroundings (r = R2)
  OuterBoundary = 3,  // outer boundary of the embedding domain
  EndS0 = 4,
  EndSL = 5,
  InnerWall = 6,  // wall of an unmeshed inner hole
};

std::string to_string(Region r);
std::string to_string(FacetMarker m);
Region region_from_string(const std::string& s);
FacetMarker facet_marker_from_string(const std::string& s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// 2D triangulation of a cross-section with marked circle edges.
struct SectionMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Region> triangle_region;
  std::vector<std::array<int, 2>> edges;  // marked edges only
  std::vector<FacetMarker> edge_marker;

  double area() const;
  double area(Region r) const;
  std::size_t count_edges(FacetMarker m) const;
};

enum class RadialSpacing { Uniform, Geometric };
enum class OuterShape { Disk, Square };

/// One annular band of vertex rings ending at radius r_outer (or, for the
/// last band with a square outer shape, at the square of half-width r_outer).
struct RingBand {
  double r_outer = 0.0;
  int n_rings = 1;
  Region region = Region::Surroundings;
  RadialSpacing spacing = RadialSpacing::Uniform;
};

struct SectionLayout {
  double r_hole = 0.0;  // 0: solid center vertex
  FacetMarker hole_marker = FacetMarker::InnerWall;
  std::vector<RingBand> bands;
  OuterShape outer = OuterShape::Disk;
  int n_azimuthal = 16;
};

SectionMesh build_section(const SectionLayout& layout);

struct OuterSpec {
  OuterShape shape = OuterShape::Disk;
  double extent = 1.0;  // disk radius or square half-width
};

/// Convenience layout: vessel [0,R2] (or vessel [0,R1] + PVS [R1,R2] when
/// R1 > 0) with n_radial uniform rings per inner band, surrounded by
/// geometrically graded rings up to the outer shape.
SectionMesh build_section_triangulation(double R1, double R2, OuterSpec outer, int n_radial, int n_azimuthal);

/// Number of geometrically graded rings that keeps cells roughly isotropic
/// between radii r0 and r1 for the given azimuthal count.
int isotropic_ring_count(double r0, double r1, int n_azimuthal);

/// Red refinement: each triangle split into four through edge midpoints.
SectionMesh refine_uniform(const SectionMesh& mesh);
SectionMesh scaled(const SectionMesh& mesh, double factor);

struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> cells;
  std::vector<Region> cell_region;
  std::vector<std::array<int, 3>> facets;
  std::vector<FacetMarker> facet_marker;
  std::vector<int> parent_vertex;  // empty unless extracted from a parent
  std::vector<int> parent_cell;
  std::uint64_t id = 0;
  std::uint64_t parent_id = 0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_cells() const { return cells.size(); }
  double cell_volume(std::size_t c) const;
  double volume() const;
  double volume(Region r) const;
  double facet_area(std::size_t f) const;
  double marked_area(FacetMarker m) const;
  bool has_marker(FacetMarker m) const;
  bool has_region(Region r) const;
  std::size_t count_facets(FacetMarker m) const;
  /// Sorted unique vertex indices touching facets with the marker.
  std::vector<int> marked_vertices(FacetMarker m) const;
};

std::uint64_t next_mesh_id();

/// Straight extrusion frame: x = origin + s T + u N + v B.
struct ExtrusionAxis {
  Vec3 origin{0.0, 0.0, 0.0};
  Frame frame{{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};

  static ExtrusionAxis along_z(double z0 = 0.0);
  static ExtrusionAxis along_x(double x0 = 0.0);
};

/// Extrudes the section over length L in n_layers layers; prisms are split
/// into three tetrahedra by sorted global vertex indices.
TetMesh extrude(const SectionMesh& section, double L, int n_layers, const ExtrusionAxis& axis = {});

/// Structured box split into 6 tetrahedra per hexahedron; every boundary
/// facet is marked OuterBoundary and cells are tagged Surroundings.
TetMesh build_box_mesh(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz);

TetMesh extract_submesh(const TetMesh& mesh, Region region);
TetMesh extract_submesh(const TetMesh& mesh, std::span<const Region> regions);

struct MeshAudit {
  double min_volume = 0.0;
  std::size_t nonpositive_cells = 0;
  std::size_t interior_faces = 0;
  std::size_t boundary_faces = 0;
  std::size_t overshared_faces = 0;   // faces with more than 2 cells
  std::size_t unmarked_boundary = 0;  // boundary faces without a marker
  std::size_t dangling_markers = 0;   // marked facets that are not mesh faces
  bool ok() const {
    return nonpositive_cells == 0 && overshared_faces == 0 && unmarked_boundary == 0 && dangling_markers == 0;
  }
};

MeshAudit audit(const TetMesh& mesh);

struct SizeRange {
  double h_min = 0.0;
  double h_max = 0.0;
};
/// Longest-edge cell size range over cells of one region.
SizeRange size_range(const TetMesh& mesh, Region region);

/// 1D mesh of a centerline graph. Junction endpoints share one vertex.
struct LineMesh {
  CenterlineGraph graph;
  std::vector<Vec3> points;
  std::vector<int> vertex_curve;  // owning curve (first curve for junctions)
  std::vector<double> vertex_s;
  std::vector<std::array<int, 2>> segments;
  std::vector<int> segment_curve;
  std::vector<std::array<double, 2>> segment_s;
  std::vector<std::vector<int>> curve_vertices;  // ordered by s
  std::vector<std::vector<double>> curve_s;      // s of curve_vertices on that curve
  /// Named vertex sets: INLET, OUTLET, JUNCTION and c<k>_start / c<k>_end.
  std::map<std::string, std::vector<int>> markers;

  std::size_t num_vertices() const { return points.size(); }
  double segment_length(std::size_t e) const { return segment_s[e][1] - segment_s[e][0]; }
  double curve_length(int curve) const;
  /// Vertex position on its owning curve and the curve frame there.
  Frame frame_at_vertex(std::size_t v) const;
};

LineMesh build_line_mesh(const CenterlineGraph& graph, double h_target);

}  // namespace vasotrans
