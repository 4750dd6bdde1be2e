#include "vasotrans/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace vasotrans {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using FaceKey = std::array<int, 3>;

FaceKey sorted_key(int a, int b, int c) {
  FaceKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

struct FaceEntry {
  FaceKey key;
  int cell;
};

// All cell faces sorted by key; equal keys are adjacent.
std::vector<FaceEntry> face_table(const TetMesh& mesh) {
  std::vector<FaceEntry> faces;
  faces.reserve(4 * mesh.cells.size());
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& t = mesh.cells[c];
    for (const auto& f : kTetFaces) {
      faces.push_back({sorted_key(t[f[0]], t[f[1]], t[f[2]]), static_cast<int>(c)});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceEntry& a, const FaceEntry& b) {
    return a.key != b.key ? a.key < b.key : a.cell < b.cell;
  });
  return faces;
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return det3(b - a, c - a, d - a) / 6.0;
}

double tri_area2(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

FacetMarker interface_marker(Region inner, Region outer) {
  if (inner == Region::Vessel && outer == Region::Pvs) return FacetMarker::GammaV;
  return FacetMarker::GammaS;
}

}  // namespace

std::string to_string(Region r) {
  switch (r) {
    case Region::Vessel: return "VESSEL";
    case Region::Pvs: return "PVS";
    case Region::Surroundings: return "SURROUNDINGS";
  }
  return "?";
}

std::string to_string(FacetMarker m) {
  switch (m) {
    case FacetMarker::GammaV: return "GAMMA_V";
    case FacetMarker::GammaS: return "GAMMA_S";
    case FacetMarker::OuterBoundary: return "OUTER_BOUNDARY";
    case FacetMarker::EndS0: return "END_S0";
    case FacetMarker::EndSL: return "END_SL";
    case FacetMarker::InnerWall: return "INNER_WALL";
  }
  return "?";
}

Region region_from_string(const std::string& s) {
  for (Region r : {Region::Vessel, Region::Pvs, Region::Surroundings}) {
    if (to_string(r) == s) return r;
  }
  throw MeshError("unknown region '" + s + "'");
}

FacetMarker facet_marker_from_string(const std::string& s) {
  for (FacetMarker m : {FacetMarker::GammaV, FacetMarker::GammaS, FacetMarker::OuterBoundary, FacetMarker::EndS0,
                        FacetMarker::EndSL, FacetMarker::InnerWall}) {
    if (to_string(m) == s) return m;
  }
  throw MeshError("unknown marker '" + s + "'");
}

double SectionMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) a += 0.5 * tri_area2(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return a;
}

double SectionMesh::area(Region r) const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    if (triangle_region[i] != r) continue;
    const auto& t = triangles[i];
    a += 0.5 * tri_area2(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  }
  return a;
}

std::size_t SectionMesh::count_edges(FacetMarker m) const {
  return static_cast<std::size_t>(std::count(edge_marker.begin(), edge_marker.end(), m));
}

int isotropic_ring_count(double r0, double r1, int n_azimuthal) {
  if (r0 <= 0.0 || r1 <= r0) return 1;
  const double n = std::log(r1 / r0) / std::log(1.0 + kTwoPi / n_azimuthal);
  return std::max(1, static_cast<int>(std::lround(n)));
}

SectionMesh build_section(const SectionLayout& layout) {
  const int n = layout.n_azimuthal;
  if (n < 8 || n % 2 != 0) throw MeshError("n_azimuthal must be even and at least 8");
  if (layout.bands.empty()) throw MeshError("section layout has no bands");
  if (layout.outer == OuterShape::Square && n % 8 != 0) {
    throw MeshError("square outer shape needs n_azimuthal divisible by 8");
  }
  if (layout.r_hole < 0.0) throw MeshError("negative hole radius");
  double prev = layout.r_hole;
  for (const auto& b : layout.bands) {
    if (!(b.r_outer > prev)) throw MeshError("section radii out of order");
    if (b.n_rings < 1) throw MeshError("band needs at least one ring");
    prev = b.r_outer;
  }

  SectionMesh mesh;
  std::vector<double> cos_t(n), sin_t(n);
  for (int j = 0; j < n; ++j) {
    const double th = kTwoPi * j / n;
    cos_t[j] = std::cos(th);
    sin_t[j] = std::sin(th);
  }
  // Exact values on the axes keep the rings mirror symmetric.
  for (int j = 0; j < n; j += n / 4) {
    const int q = j / (n / 4);
    cos_t[j] = (q == 0) ? 1.0 : (q == 2 ? -1.0 : 0.0);
    sin_t[j] = (q == 1) ? 1.0 : (q == 3 ? -1.0 : 0.0);
  }

  auto add_ring = [&](auto radius_of_j) {
    const int first = static_cast<int>(mesh.vertices.size());
    for (int j = 0; j < n; ++j) mesh.vertices.push_back(radius_of_j(j));
    return first;
  };
  auto mark_ring = [&](int first, FacetMarker m) {
    for (int j = 0; j < n; ++j) {
      mesh.edges.push_back({first + j, first + (j + 1) % n});
      mesh.edge_marker.push_back(m);
    }
  };
  auto circle_point = [&](double r, int j) { return Point2{r * cos_t[j], r * sin_t[j]}; };
  auto add_tri = [&](int a, int b, int c, Region reg) {
    if (tri_area2(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) < 0.0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
    mesh.triangle_region.push_back(reg);
  };

  int prev_ring = -1;
  int center = -1;
  double r_prev = layout.r_hole;
  if (layout.r_hole > 0.0) {
    prev_ring = add_ring([&](int j) { return circle_point(layout.r_hole, j); });
    mark_ring(prev_ring, layout.hole_marker);
  } else {
    center = 0;
    mesh.vertices.push_back({0.0, 0.0});
  }

  for (std::size_t bi = 0; bi < layout.bands.size(); ++bi) {
    const auto& band = layout.bands[bi];
    const bool last = bi + 1 == layout.bands.size();
    const bool square = last && layout.outer == OuterShape::Square;
    const bool geometric = band.spacing == RadialSpacing::Geometric && r_prev > 0.0;
    for (int k = 1; k <= band.n_rings; ++k) {
      const double frac = static_cast<double>(k) / band.n_rings;
      int ring;
      if (!square) {
        const double r = (k == band.n_rings) ? band.r_outer
                         : geometric ? r_prev * std::pow(band.r_outer / r_prev, frac)
                                     : r_prev + frac * (band.r_outer - r_prev);
        ring = add_ring([&](int j) { return circle_point(r, j); });
      } else {
        const double a = band.r_outer;
        ring = add_ring([&](int j) {
          const double c = cos_t[j], s = sin_t[j];
          const double m = std::max(std::abs(c), std::abs(s));
          if (k == band.n_rings) {
            // Snap to the square exactly.
            if (std::abs(c) >= std::abs(s)) return Point2{std::copysign(a, c), a * s / std::abs(c)};
            return Point2{a * c / std::abs(s), std::copysign(a, s)};
          }
          const double d = a / m;
          const double rho = geometric ? r_prev * std::pow(d / r_prev, frac) : r_prev + frac * (d - r_prev);
          return Point2{rho * c, rho * s};
        });
      }
      for (int j = 0; j < n; ++j) {
        const int j1 = (j + 1) % n;
        if (prev_ring < 0) {
          add_tri(center, ring + j, ring + j1, band.region);
        } else if (j % 2 == 0) {
          add_tri(prev_ring + j, prev_ring + j1, ring + j1, band.region);
          add_tri(prev_ring + j, ring + j1, ring + j, band.region);
        } else {
          add_tri(prev_ring + j, prev_ring + j1, ring + j, band.region);
          add_tri(prev_ring + j1, ring + j1, ring + j, band.region);
        }
      }
      prev_ring = ring;
    }
    if (last) {
      mark_ring(prev_ring, FacetMarker::OuterBoundary);
    } else if (layout.bands[bi + 1].region != band.region) {
      mark_ring(prev_ring, interface_marker(band.region, layout.bands[bi + 1].region));
    }
    r_prev = band.r_outer;
  }
  return mesh;
}

SectionMesh build_section_triangulation(double R1, double R2, OuterSpec outer, int n_radial, int n_azimuthal) {
  if (R1 < 0.0 || !(R2 > R1)) throw MeshError("section radii out of order");
  if (!(outer.extent > R2)) throw MeshError("section radius exceeds outer extent");
  if (n_radial < 1) throw MeshError("n_radial must be positive");
  SectionLayout layout;
  layout.n_azimuthal = n_azimuthal;
  layout.outer = outer.shape;
  if (R1 > 0.0) {
    layout.bands.push_back({R1, n_radial, Region::Vessel, RadialSpacing::Uniform});
    layout.bands.push_back({R2, n_radial, Region::Pvs, RadialSpacing::Uniform});
  } else {
    layout.bands.push_back({R2, n_radial, Region::Vessel, RadialSpacing::Uniform});
  }
  layout.bands.push_back({outer.extent, isotropic_ring_count(R2, outer.extent, n_azimuthal), Region::Surroundings,
                          RadialSpacing::Geometric});
  return build_section(layout);
}

SectionMesh refine_uniform(const SectionMesh& mesh) {
  SectionMesh out;
  out.vertices = mesh.vertices;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back({0.5 * (mesh.vertices[a].x + mesh.vertices[b].x),
                            0.5 * (mesh.vertices[a].y + mesh.vertices[b].y)});
    mid.emplace(key, id);
    return id;
  };
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto [a, b, c] = mesh.triangles[i];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    const Region r = mesh.triangle_region[i];
    for (const auto& t : {std::array<int, 3>{a, ab, ca}, {ab, b, bc}, {ca, bc, c}, {ab, bc, ca}}) {
      out.triangles.push_back(t);
      out.triangle_region.push_back(r);
    }
  }
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const auto [a, b] = mesh.edges[e];
    const int m = midpoint(a, b);
    out.edges.push_back({a, m});
    out.edges.push_back({m, b});
    out.edge_marker.push_back(mesh.edge_marker[e]);
    out.edge_marker.push_back(mesh.edge_marker[e]);
  }
  return out;
}

SectionMesh scaled(const SectionMesh& mesh, double factor) {
  SectionMesh out = mesh;
  for (auto& v : out.vertices) {
    v.x *= factor;
    v.y *= factor;
  }
  return out;
}

std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

double TetMesh::cell_volume(std::size_t c) const {
  const auto& t = cells[c];
  return signed_volume(vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]);
}

double TetMesh::volume() const {
  double v = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) v += cell_volume(c);
  return v;
}

double TetMesh::volume(Region r) const {
  double v = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cell_region[c] == r) v += cell_volume(c);
  }
  return v;
}

double TetMesh::facet_area(std::size_t f) const {
  const auto& t = facets[f];
  return 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
}

double TetMesh::marked_area(FacetMarker m) const {
  double a = 0.0;
  for (std::size_t f = 0; f < facets.size(); ++f) {
    if (facet_marker[f] == m) a += facet_area(f);
  }
  return a;
}

bool TetMesh::has_marker(FacetMarker m) const {
  return std::find(facet_marker.begin(), facet_marker.end(), m) != facet_marker.end();
}

bool TetMesh::has_region(Region r) const {
  return std::find(cell_region.begin(), cell_region.end(), r) != cell_region.end();
}

std::size_t TetMesh::count_facets(FacetMarker m) const {
  return static_cast<std::size_t>(std::count(facet_marker.begin(), facet_marker.end(), m));
}

std::vector<int> TetMesh::marked_vertices(FacetMarker m) const {
  std::vector<int> out;
  for (std::size_t f = 0; f < facets.size(); ++f) {
    if (facet_marker[f] == m) out.insert(out.end(), facets[f].begin(), facets[f].end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ExtrusionAxis ExtrusionAxis::along_z(double z0) {
  return {{0.0, 0.0, z0}, {{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}};
}

ExtrusionAxis ExtrusionAxis::along_x(double x0) {
  return {{x0, 0.0, 0.0}, {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

TetMesh extrude(const SectionMesh& section, double L, int n_layers, const ExtrusionAxis& axis) {
  if (n_layers < 1) throw MeshError("n_layers must be positive");
  if (!(L > 0.0)) throw MeshError("extrusion length must be positive");
  TetMesh mesh;
  mesh.id = next_mesh_id();
  const int nv = static_cast<int>(section.vertices.size());
  const auto& F = axis.frame;
  mesh.vertices.reserve(static_cast<std::size_t>(nv) * (n_layers + 1));
  for (int k = 0; k <= n_layers; ++k) {
    const double s = (k == n_layers) ? L : L * k / n_layers;
    for (const auto& p : section.vertices) mesh.vertices.push_back(axis.origin + s * F.T + p.x * F.N + p.y * F.B);
  }
  mesh.cells.reserve(3 * section.triangles.size() * n_layers);
  for (int k = 0; k < n_layers; ++k) {
    const int lo = k * nv, hi = (k + 1) * nv;
    for (std::size_t t = 0; t < section.triangles.size(); ++t) {
      auto tri = section.triangles[t];
      std::sort(tri.begin(), tri.end());
      const int a = tri[0], b = tri[1], c = tri[2];
      const std::array<std::array<int, 4>, 3> tets{{{lo + a, lo + b, lo + c, hi + c},
                                                    {lo + a, lo + b, hi + b, hi + c},
                                                    {lo + a, hi + a, hi + b, hi + c}}};
      for (auto tet : tets) {
        double v = signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]], mesh.vertices[tet[2]],
                                 mesh.vertices[tet[3]]);
        if (v < 0.0) {
          std::swap(tet[2], tet[3]);
          v = -v;
        }
        if (!(v > 0.0)) {
          throw MeshError("inverted cell " + std::to_string(mesh.cells.size()) + " after extrusion");
        }
        mesh.cells.push_back(tet);
        mesh.cell_region.push_back(section.triangle_region[t]);
      }
    }
  }
  for (std::size_t e = 0; e < section.edges.size(); ++e) {
    const int p = std::min(section.edges[e][0], section.edges[e][1]);
    const int q = std::max(section.edges[e][0], section.edges[e][1]);
    for (int k = 0; k < n_layers; ++k) {
      const int lo = k * nv, hi = (k + 1) * nv;
      mesh.facets.push_back({lo + p, lo + q, hi + q});
      mesh.facets.push_back({lo + p, hi + q, hi + p});
      mesh.facet_marker.push_back(section.edge_marker[e]);
      mesh.facet_marker.push_back(section.edge_marker[e]);
    }
  }
  for (const auto& t : section.triangles) {
    mesh.facets.push_back(t);
    mesh.facet_marker.push_back(FacetMarker::EndS0);
  }
  const int top = n_layers * nv;
  for (const auto& t : section.triangles) {
    mesh.facets.push_back({top + t[0], top + t[1], top + t[2]});
    mesh.facet_marker.push_back(FacetMarker::EndSL);
  }
  return mesh;
}

TetMesh build_box_mesh(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz) {
  if (nx < 1 || ny < 1 || nz < 1) throw MeshError("box mesh needs positive cell counts");
  TetMesh mesh;
  mesh.id = next_mesh_id();
  auto vid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        const double x = (i == nx) ? hi.x : lo.x + (hi.x - lo.x) * i / nx;
        const double y = (j == ny) ? hi.y : lo.y + (hi.y - lo.y) * j / ny;
        const double z = (k == nz) ? hi.z : lo.z + (hi.z - lo.z) * k / nz;
        mesh.vertices.push_back({x, y, z});
      }
    }
  }
  // Kuhn split along the main diagonal; paths through the cube corners (bit 1=x, 2=y, 4=z).
  constexpr std::array<std::array<int, 4>, 6> paths{
      {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}}};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        std::array<int, 8> corner;
        for (int b = 0; b < 8; ++b) corner[b] = vid(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
        for (const auto& p : paths) {
          std::array<int, 4> tet{corner[p[0]], corner[p[1]], corner[p[2]], corner[p[3]]};
          if (signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]], mesh.vertices[tet[2]],
                            mesh.vertices[tet[3]]) < 0.0) {
            std::swap(tet[2], tet[3]);
          }
          mesh.cells.push_back(tet);
          mesh.cell_region.push_back(Region::Surroundings);
        }
      }
    }
  }
  const auto faces = face_table(mesh);
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) {
      mesh.facets.push_back(faces[i].key);
      mesh.facet_marker.push_back(FacetMarker::OuterBoundary);
    }
    i = j;
  }
  return mesh;
}

TetMesh extract_submesh(const TetMesh& mesh, Region region) {
  const std::array<Region, 1> regions{region};
  return extract_submesh(mesh, regions);
}

TetMesh extract_submesh(const TetMesh& mesh, std::span<const Region> regions) {
  auto wanted = [&](Region r) { return std::find(regions.begin(), regions.end(), r) != regions.end(); };
  TetMesh sub;
  sub.id = next_mesh_id();
  sub.parent_id = mesh.id;
  std::vector<int> local(mesh.vertices.size(), -1);
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    if (!wanted(mesh.cell_region[c])) continue;
    std::array<int, 4> t{};
    for (int k = 0; k < 4; ++k) {
      const int v = mesh.cells[c][k];
      if (local[v] < 0) {
        local[v] = static_cast<int>(sub.vertices.size());
        sub.vertices.push_back(mesh.vertices[v]);
        sub.parent_vertex.push_back(v);
      }
      t[k] = local[v];
    }
    sub.cells.push_back(t);
    sub.cell_region.push_back(mesh.cell_region[c]);
    sub.parent_cell.push_back(static_cast<int>(c));
  }
  if (sub.cells.empty()) throw MeshError("empty region in submesh extraction");

  std::vector<FaceKey> own;
  own.reserve(4 * sub.cells.size());
  for (const auto& t : sub.cells) {
    for (const auto& f : kTetFaces) own.push_back(sorted_key(t[f[0]], t[f[1]], t[f[2]]));
  }
  std::sort(own.begin(), own.end());
  for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
    const auto& p = mesh.facets[f];
    const int a = local[p[0]], b = local[p[1]], c = local[p[2]];
    if (a < 0 || b < 0 || c < 0) continue;
    if (!std::binary_search(own.begin(), own.end(), sorted_key(a, b, c))) continue;
    sub.facets.push_back({a, b, c});
    sub.facet_marker.push_back(mesh.facet_marker[f]);
  }
  return sub;
}

MeshAudit audit(const TetMesh& mesh) {
  MeshAudit out;
  out.min_volume = mesh.cells.empty() ? 0.0 : mesh.cell_volume(0);
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const double v = mesh.cell_volume(c);
    out.min_volume = std::min(out.min_volume, v);
    if (!(v > 0.0)) ++out.nonpositive_cells;
  }
  const auto faces = face_table(mesh);
  std::vector<FaceKey> marked;
  for (const auto& f : mesh.facets) marked.push_back(sorted_key(f[0], f[1], f[2]));
  std::sort(marked.begin(), marked.end());
  std::vector<FaceKey> all_faces;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    const std::size_t count = j - i;
    all_faces.push_back(faces[i].key);
    if (count == 1) {
      ++out.boundary_faces;
      if (!std::binary_search(marked.begin(), marked.end(), faces[i].key)) ++out.unmarked_boundary;
    } else if (count == 2) {
      ++out.interior_faces;
    } else {
      ++out.overshared_faces;
    }
    i = j;
  }
  for (const auto& k : marked) {
    if (!std::binary_search(all_faces.begin(), all_faces.end(), k)) ++out.dangling_markers;
  }
  return out;
}

SizeRange size_range(const TetMesh& mesh, Region region) {
  SizeRange r{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    if (mesh.cell_region[c] != region) continue;
    const auto& t = mesh.cells[c];
    double longest = 0.0;
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) longest = std::max(longest, norm(mesh.vertices[t[a]] - mesh.vertices[t[b]]));
    }
    r.h_min = std::min(r.h_min, longest);
    r.h_max = std::max(r.h_max, longest);
  }
  if (r.h_max == 0.0) throw MeshError("region " + to_string(region) + " not present");
  return r;
}

double LineMesh::curve_length(int curve) const {
  double sum = 0.0;
  for (std::size_t e = 0; e < segments.size(); ++e) {
    if (segment_curve[e] == curve) sum += segment_length(e);
  }
  return sum;
}

Frame LineMesh::frame_at_vertex(std::size_t v) const {
  return graph.curves()[vertex_curve[v]].frame_at(vertex_s[v]);
}

LineMesh build_line_mesh(const CenterlineGraph& graph, double h_target) {
  if (!(h_target > 0.0)) throw MeshError("h_target must be positive");
  LineMesh lm;
  lm.graph = graph;
  const auto& curves = graph.curves();
  const std::size_t nc = curves.size();
  lm.curve_vertices.resize(nc);
  lm.curve_s.resize(nc);

  std::vector<int> junction_vertex(graph.junctions().size(), -1);
  auto junction_of = [&](int curve, CurveEnd end) -> int {
    for (std::size_t j = 0; j < graph.junctions().size(); ++j) {
      const auto& J = graph.junctions()[j];
      const auto& list = (end == CurveEnd::End) ? J.incoming : J.outgoing;
      if (std::find(list.begin(), list.end(), curve) != list.end()) return static_cast<int>(j);
    }
    return -1;
  };
  auto add_vertex = [&](int curve, double s) {
    const int id = static_cast<int>(lm.points.size());
    lm.points.push_back(curves[curve].point_at(s));
    lm.vertex_curve.push_back(curve);
    lm.vertex_s.push_back(s);
    return id;
  };

  for (std::size_t ci = 0; ci < nc; ++ci) {
    const int c = static_cast<int>(ci);
    const double L = curves[ci].length();
    const int n = std::max(1, static_cast<int>(std::ceil(L / h_target - 1e-12)));
    std::vector<double> s(n + 1);
    for (int k = 0; k <= n; ++k) s[k] = (k == n) ? L : L * k / n;
    auto& verts = lm.curve_vertices[ci];
    lm.curve_s[ci] = s;
    for (int k = 0; k <= n; ++k) {
      int v = -1;
      if (k == 0 || k == n) {
        const CurveEnd end = (k == 0) ? CurveEnd::Start : CurveEnd::End;
        const int j = junction_of(c, end);
        if (j >= 0) {
          if (junction_vertex[j] < 0) junction_vertex[j] = add_vertex(c, s[k]);
          v = junction_vertex[j];
        }
      }
      if (v < 0) v = add_vertex(c, s[k]);
      verts.push_back(v);
    }
    for (int k = 0; k < n; ++k) {
      lm.segments.push_back({verts[k], verts[k + 1]});
      lm.segment_curve.push_back(c);
      lm.segment_s.push_back({s[k], s[k + 1]});
    }
    lm.markers["c" + std::to_string(c) + "_start"].push_back(verts.front());
    lm.markers["c" + std::to_string(c) + "_end"].push_back(verts.back());
  }
  auto endpoint_id = [&](const EndpointRef& e) {
    const auto& v = lm.curve_vertices[e.curve];
    return e.end == CurveEnd::Start ? v.front() : v.back();
  };
  for (const auto& e : graph.inlets()) lm.markers["INLET"].push_back(endpoint_id(e));
  for (const auto& e : graph.outlets()) lm.markers["OUTLET"].push_back(endpoint_id(e));
  for (int v : junction_vertex) {
    if (v >= 0) lm.markers["JUNCTION"].push_back(v);
  }
  return lm;
}

}  // namespace vasotrans
