#include "vasotrans/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "vasotrans/fem.hpp"

namespace vasotrans {

namespace {

std::string point_string(const Vec3& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(' << x.x << ", " << x.y << ", " << x.z << ')';
  return os.str();
}

double min_of(const std::array<double, 4>& b) { return std::min({b[0], b[1], b[2], b[3]}); }

}  // namespace

std::array<double, 4> barycentric(const TetMesh& mesh, std::size_t cell, const Vec3& x) {
  const auto& t = mesh.cells[cell];
  const Vec3& x0 = mesh.vertices[t[0]];
  const Vec3 e1 = mesh.vertices[t[1]] - x0, e2 = mesh.vertices[t[2]] - x0, e3 = mesh.vertices[t[3]] - x0;
  const Vec3 d = x - x0;
  const double det = det3(e1, e2, e3);
  const double l1 = det3(d, e2, e3) / det;
  const double l2 = det3(e1, d, e3) / det;
  const double l3 = det3(e1, e2, d) / det;
  return {1.0 - l1 - l2 - l3, l1, l2, l3};
}

PointLocator::PointLocator(const TetMesh& mesh, double tol) : mesh_(mesh), tol_(tol) {
  if (mesh.cells.empty()) throw CouplingError("point locator needs a non-empty mesh");
  constexpr double inf = std::numeric_limits<double>::infinity();
  lo_ = {inf, inf, inf};
  hi_ = {-inf, -inf, -inf};
  for (const auto& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) {
      lo_[k] = std::min(lo_[k], v[k]);
      hi_[k] = std::max(hi_[k], v[k]);
    }
  }
  // About two cells per bucket, with buckets shaped like the bounding box.
  const double target = std::max(1.0, static_cast<double>(mesh.cells.size()) / 2.0);
  Vec3 ext = hi_ - lo_;
  double vol = 1.0;
  int active = 0;
  for (int k = 0; k < 3; ++k) {
    if (ext[k] > 0.0) {
      vol *= ext[k];
      ++active;
    }
  }
  const double h = std::pow(vol / target, 1.0 / std::max(1, active));
  for (int k = 0; k < 3; ++k) {
    dims_[k] = std::clamp(static_cast<int>(std::ceil(ext[k] / h)), 1, 512);
    cell_size_[k] = ext[k] > 0.0 ? ext[k] / dims_[k] : 1.0;
  }
  const std::size_t nb = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  auto index_range = [&](double a, double b, int k) {
    const int i0 = std::clamp(static_cast<int>(std::floor((a - lo_[k]) / cell_size_[k])), 0, dims_[k] - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor((b - lo_[k]) / cell_size_[k])), 0, dims_[k] - 1);
    return std::make_pair(i0, i1);
  };
  std::vector<std::array<std::pair<int, int>, 3>> ranges(mesh.cells.size());
  std::vector<std::size_t> count(nb + 1, 0);
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    Vec3 a = mesh.vertices[mesh.cells[c][0]], b = a;
    for (int v = 1; v < 4; ++v) {
      const Vec3& p = mesh.vertices[mesh.cells[c][v]];
      for (int k = 0; k < 3; ++k) {
        a[k] = std::min(a[k], p[k]);
        b[k] = std::max(b[k], p[k]);
      }
    }
    for (int k = 0; k < 3; ++k) {
      const double pad = 1e-9 * (ext[k] + 1.0);
      ranges[c][k] = index_range(a[k] - pad, b[k] + pad, k);
    }
    for (int i = ranges[c][0].first; i <= ranges[c][0].second; ++i) {
      for (int j = ranges[c][1].first; j <= ranges[c][1].second; ++j) {
        for (int l = ranges[c][2].first; l <= ranges[c][2].second; ++l) {
          ++count[(static_cast<std::size_t>(l) * dims_[1] + j) * dims_[0] + i + 1];
        }
      }
    }
  }
  for (std::size_t b = 0; b < nb; ++b) count[b + 1] += count[b];
  bucket_ptr_ = count;
  bucket_cells_.resize(count.back());
  std::vector<std::size_t> pos(count.begin(), count.end() - 1);
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    for (int i = ranges[c][0].first; i <= ranges[c][0].second; ++i) {
      for (int j = ranges[c][1].first; j <= ranges[c][1].second; ++j) {
        for (int l = ranges[c][2].first; l <= ranges[c][2].second; ++l) {
          bucket_cells_[pos[(static_cast<std::size_t>(l) * dims_[1] + j) * dims_[0] + i]++] = static_cast<int>(c);
        }
      }
    }
  }
}

bool PointLocator::search(const Vec3& x, std::span<const int> candidates, Hit& hit) const {
  double best = -std::numeric_limits<double>::infinity();
  for (int c : candidates) {
    const auto b = barycentric(mesh_, c, x);
    const double m = min_of(b);
    if (m > best) {
      best = m;
      hit.cell = c;
      hit.bary = b;
    }
  }
  return best >= -tol_;
}

bool PointLocator::try_locate(const Vec3& x, Hit& hit) const {
  std::array<int, 3> idx{};
  for (int k = 0; k < 3; ++k) {
    const double f = (x[k] - lo_[k]) / cell_size_[k];
    if (f < -1e-6 || f > dims_[k] + 1e-6) return false;
    idx[k] = std::clamp(static_cast<int>(std::floor(f)), 0, dims_[k] - 1);
  }
  const std::size_t b = (static_cast<std::size_t>(idx[2]) * dims_[1] + idx[1]) * dims_[0] + idx[0];
  const std::span<const int> cand(bucket_cells_.data() + bucket_ptr_[b], bucket_ptr_[b + 1] - bucket_ptr_[b]);
  if (search(x, cand, hit)) return true;
  // Full scan fallback.
  std::vector<int> all(mesh_.cells.size());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
  return search(x, all, hit);
}

PointLocator::Hit PointLocator::locate(const Vec3& x) const {
  Hit hit;
  if (!try_locate(x, hit)) throw CouplingError("point " + point_string(x) + " is outside the mesh");
  return hit;
}

int default_circle_points(double R2, double h_min) {
  return std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * R2 / h_min)));
}

PerimeterAverageOperator build_perimeter_average(const TetMesh& mesh, const LineMesh& line,
                                                 std::span<const VesselGeometry> geometry, int n_quad, double t,
                                                 double radius_override) {
  if (n_quad < 8) throw CouplingError("perimeter average needs at least 8 circle points");
  if (geometry.size() != line.graph.curves().size()) throw CouplingError("one vessel geometry per curve required");
  const PointLocator locator(mesh);
  PerimeterAverageOperator op;
  op.n_quad = n_quad;
  const std::size_t n1 = line.num_vertices();
  op.radius.resize(n1);
  TripletList trip;
  trip.reserve(4 * n1 * n_quad);
  const double w = 1.0 / n_quad;
  for (std::size_t i = 0; i < n1; ++i) {
    const int c = line.vertex_curve[i];
    const double s = std::min(line.vertex_s[i], geometry[c].length());
    const double R = radius_override > 0.0 ? radius_override : geometry[c].R2(s, t);
    op.radius[i] = R;
    const Frame F = line.frame_at_vertex(i);
    for (int k = 0; k < n_quad; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_quad;
      const Vec3 x = line.points[i] + R * std::cos(th) * F.N + R * std::sin(th) * F.B;
      const auto hit = locator.locate(x);
      op.points.push_back(x);
      op.host_cell.push_back(hit.cell);
      op.bary.push_back(hit.bary);
      for (int v = 0; v < 4; ++v) trip.add(static_cast<int>(i), mesh.cells[hit.cell][v], w * hit.bary[v]);
    }
  }
  op.matrix = SparseMatrix::from_triplets(n1, mesh.num_vertices(), trip);
  return op;
}

SectionAverageOperator build_section_average(const TetMesh& mesh, const LineMesh& line,
                                             std::span<const VesselGeometry> geometry, int n_r, int n_theta,
                                             double t) {
  if (n_r < 1 || n_theta < 3) throw CouplingError("section average needs n_r >= 1 and n_theta >= 3");
  if (geometry.size() != line.graph.curves().size()) throw CouplingError("one vessel geometry per curve required");
  const PointLocator locator(mesh);
  std::vector<double> gx, gw;
  gauss_legendre(n_r, gx, gw);
  SectionAverageOperator op;
  op.n_r = n_r;
  op.n_theta = n_theta;
  const std::size_t n1 = line.num_vertices();
  TripletList trip;
  for (std::size_t i = 0; i < n1; ++i) {
    const int c = line.vertex_curve[i];
    const double s = std::min(line.vertex_s[i], geometry[c].length());
    const double R1 = geometry[c].R1(s, t), R2 = geometry[c].R2(s, t);
    const Frame F = line.frame_at_vertex(i);
    double total = 0.0;
    for (int a = 0; a < n_r; ++a) total += gw[a] * (R1 + 0.5 * (R2 - R1) * (gx[a] + 1.0));
    total *= n_theta;
    for (int a = 0; a < n_r; ++a) {
      const double r = R1 + 0.5 * (R2 - R1) * (gx[a] + 1.0);
      const double w = gw[a] * r / total;
      for (int k = 0; k < n_theta; ++k) {
        const double th = 2.0 * std::numbers::pi * k / n_theta;
        const Vec3 x = line.points[i] + r * std::cos(th) * F.N + r * std::sin(th) * F.B;
        const auto hit = locator.locate(x);
        for (int v = 0; v < 4; ++v) trip.add(static_cast<int>(i), mesh.cells[hit.cell][v], w * hit.bary[v]);
      }
    }
  }
  op.matrix = SparseMatrix::from_triplets(n1, mesh.num_vertices(), trip);
  return op;
}

CenterlinePosition project_to_centerline(const LineMesh& line, const Vec3& x) {
  const auto& curves = line.graph.curves();
  if (curves.empty()) throw CouplingError("line mesh has no curves");
  const auto p0 = curves[0].project(x);
  CenterlinePosition best{0, p0.s, p0.distance};
  for (std::size_t c = 1; c < curves.size(); ++c) {
    const auto p = curves[c].project(x);
    if (p.distance < best.distance - 1e-12 * (1.0 + best.distance)) best = {static_cast<int>(c), p.s, p.distance};
  }
  return best;
}

std::vector<std::pair<int, double>> line_interpolation(const LineMesh& line, int curve, double s) {
  const auto& sv = line.curve_s[curve];
  const auto& vv = line.curve_vertices[curve];
  s = std::clamp(s, sv.front(), sv.back());
  auto it = std::upper_bound(sv.begin(), sv.end(), s);
  std::size_t k = (it == sv.begin()) ? 0 : static_cast<std::size_t>(it - sv.begin()) - 1;
  if (k + 1 >= sv.size()) k = sv.size() - 2;
  const double xi = (s - sv[k]) / (sv[k + 1] - sv[k]);
  return {{vv[k], 1.0 - xi}, {vv[k + 1], xi}};
}

SparseMatrix build_extension(const LineMesh& line, std::span<const Vec3> points) {
  TripletList trip;
  trip.reserve(2 * points.size());
  for (std::size_t q = 0; q < points.size(); ++q) {
    const auto pos = project_to_centerline(line, points[q]);
    for (const auto& [v, w] : line_interpolation(line, pos.curve, pos.s)) trip.add(static_cast<int>(q), v, w);
  }
  return SparseMatrix::from_triplets(points.size(), line.num_vertices(), trip);
}

Vector extend_1d_to_3d(const LineMesh& line, std::span<const double> chat, std::span<const Vec3> points) {
  if (chat.size() != line.num_vertices()) throw CouplingError("1D vector size mismatch");
  return build_extension(line, points) * chat;
}

ExchangeBlocks assemble_exchange_blocks(const SparseMatrix& Pi, const SparseMatrix& M_xiP,
                                        std::span<const double> w_bar, ExchangeTest test) {
  if (M_xiP.rows() != Pi.rows() || w_bar.size() != Pi.rows()) throw CouplingError("exchange block size mismatch");
  const SparseMatrix W = SparseMatrix::diagonal(w_bar);
  const SparseMatrix PiT = Pi.transpose();
  const SparseMatrix MPi = multiply(M_xiP, Pi);
  const SparseMatrix MW = multiply(M_xiP, W);
  ExchangeBlocks B;
  B.cc = multiply(PiT, MPi);
  B.c_chat = multiply(PiT, MW).scaled(-1.0);
  if (test == ExchangeTest::Plain) {
    B.chat_c = MPi.scaled(-1.0);
    B.chat_chat = MW;
  } else {
    B.chat_c = multiply(W, MPi).scaled(-1.0);
    B.chat_chat = multiply(W, MW);
  }
  return B;
}

}  // namespace vasotrans
