#pragma once

#include <map>
#include <string>
#include <vector>

#include "vasotrans/mesh.hpp"

namespace vasotrans {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using PointData = std::map<std::string, std::vector<double>>;

/// Legacy ASCII VTK (v3.0) unstructured grid: tetrahedra followed by the
/// marked facets as triangles, with "region" and "facet_marker" cell data
/// (-1 where not applicable) and point scalars written with 17 digits.
void write_vtk(const std::string& path, const TetMesh& mesh, const PointData& point_data = {});

/// Polyline VTK of a 1D mesh (one VTK line cell per segment).
void write_vtk_polyline(const std::string& path, const LineMesh& mesh, const PointData& point_data = {});

struct VtkContents {
  TetMesh mesh;
  PointData point_data;
};

/// Reads files produced by write_vtk (or any legacy ASCII unstructured grid of
/// tetrahedra and triangles with the same cell-data arrays).
VtkContents read_vtk(const std::string& path);

}  // namespace vasotrans
