#include "vasotrans/mesh_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace vasotrans {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  return out;
}

void write_points(std::ostream& out, const std::vector<Vec3>& pts) {
  out << "POINTS " << pts.size() << " double\n";
  for (const auto& p : pts) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

void write_point_data(std::ostream& out, std::size_t n, const PointData& data, const std::string& path) {
  if (data.empty()) return;
  out << "POINT_DATA " << n << '\n';
  for (const auto& [name, values] : data) {
    if (values.size() != n) throw IoError("field '" + name + "' has wrong length for '" + path + "'");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) out << v << '\n';
  }
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

void write_vtk(const std::string& path, const TetMesh& mesh, const PointData& point_data) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\nvasotrans mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  write_points(out, mesh.vertices);
  const std::size_t nc = mesh.cells.size(), nf = mesh.facets.size();
  out << "CELLS " << nc + nf << ' ' << 5 * nc + 4 * nf << '\n';
  for (const auto& c : mesh.cells) out << "4 " << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
  for (const auto& f : mesh.facets) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  out << "CELL_TYPES " << nc + nf << '\n';
  for (std::size_t i = 0; i < nc; ++i) out << "10\n";
  for (std::size_t i = 0; i < nf; ++i) out << "5\n";
  out << "CELL_DATA " << nc + nf << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (auto r : mesh.cell_region) out << static_cast<int>(r) << '\n';
  for (std::size_t i = 0; i < nf; ++i) out << "-1\n";
  out << "SCALARS facet_marker int 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < nc; ++i) out << "-1\n";
  for (auto m : mesh.facet_marker) out << static_cast<int>(m) << '\n';
  write_point_data(out, mesh.vertices.size(), point_data, path);
  finish(out, path);
}

void write_vtk_polyline(const std::string& path, const LineMesh& mesh, const PointData& point_data) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\nvasotrans centerline\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  write_points(out, mesh.points);
  const std::size_t ns = mesh.segments.size();
  out << "CELLS " << ns << ' ' << 3 * ns << '\n';
  for (const auto& s : mesh.segments) out << "2 " << s[0] << ' ' << s[1] << '\n';
  out << "CELL_TYPES " << ns << '\n';
  for (std::size_t i = 0; i < ns; ++i) out << "3\n";
  out << "CELL_DATA " << ns << "\nSCALARS curve int 1\nLOOKUP_TABLE default\n";
  for (int c : mesh.segment_curve) out << c << '\n';
  write_point_data(out, mesh.points.size(), point_data, path);
  finish(out, path);
}

VtkContents read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  VtkContents result;
  std::string line, word;
  std::getline(in, line);
  if (line.rfind("# vtk DataFile", 0) != 0) throw IoError("'" + path + "' is not a legacy VTK file");
  std::getline(in, line);  // title
  in >> word;
  if (word != "ASCII") throw IoError("'" + path + "' is not ASCII VTK");

  std::vector<std::vector<int>> cells;
  std::vector<int> types;
  std::vector<int> region, marker;
  std::size_t n_points = 0;
  std::string section;  // POINT_DATA or CELL_DATA
  auto fail = [&](const std::string& what) { throw IoError("malformed VTK '" + path + "': " + what); };

  while (in >> word) {
    if (word == "DATASET") {
      in >> word;
      if (word != "UNSTRUCTURED_GRID") fail("unsupported dataset " + word);
    } else if (word == "POINTS") {
      in >> n_points >> word;
      result.mesh.vertices.resize(n_points);
      for (auto& p : result.mesh.vertices) {
        if (!(in >> p.x >> p.y >> p.z)) fail("truncated points");
      }
    } else if (word == "CELLS") {
      std::size_t n, total;
      in >> n >> total;
      cells.resize(n);
      for (auto& c : cells) {
        int k;
        if (!(in >> k)) fail("truncated cells");
        c.resize(k);
        for (auto& v : c) in >> v;
      }
    } else if (word == "CELL_TYPES") {
      std::size_t n;
      in >> n;
      types.resize(n);
      for (auto& t : types) in >> t;
    } else if (word == "CELL_DATA" || word == "POINT_DATA") {
      section = word;
      std::size_t n;
      in >> n;
    } else if (word == "SCALARS") {
      std::string name, type;
      in >> name >> type;
      std::getline(in, line);  // optional component count
      in >> word >> word;      // LOOKUP_TABLE default
      if (section == "CELL_DATA") {
        std::vector<int> values(cells.size());
        for (auto& v : values) {
          double d;
          if (!(in >> d)) fail("truncated cell data");
          v = static_cast<int>(d);
        }
        if (name == "region") region = std::move(values);
        if (name == "facet_marker") marker = std::move(values);
      } else if (section == "POINT_DATA") {
        std::vector<double> values(n_points);
        for (auto& v : values) {
          if (!(in >> v)) fail("truncated point data");
        }
        result.point_data[name] = std::move(values);
      } else {
        fail("SCALARS outside a data section");
      }
    } else {
      fail("unexpected keyword " + word);
    }
  }
  if (types.size() != cells.size()) fail("cell type count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (types[i] == 10 && cells[i].size() == 4) {
      result.mesh.cells.push_back({cells[i][0], cells[i][1], cells[i][2], cells[i][3]});
      const int r = region.empty() ? static_cast<int>(Region::Surroundings) : region[i];
      result.mesh.cell_region.push_back(static_cast<Region>(r));
    } else if (types[i] == 5 && cells[i].size() == 3) {
      if (marker.empty() || marker[i] < 0) continue;
      result.mesh.facets.push_back({cells[i][0], cells[i][1], cells[i][2]});
      result.mesh.facet_marker.push_back(static_cast<FacetMarker>(marker[i]));
    } else {
      fail("unsupported cell type " + std::to_string(types[i]));
    }
  }
  result.mesh.id = next_mesh_id();
  return result;
}

}  // namespace vasotrans
