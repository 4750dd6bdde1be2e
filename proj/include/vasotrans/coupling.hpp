#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "vasotrans/geometry.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/sparse.hpp"

namespace vasotrans {

class CouplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finds the tetrahedron containing a point. Cells are binned on a uniform
/// grid of their bounding boxes; a full scan is the fallback.
class PointLocator {
 public:
  explicit PointLocator(const TetMesh& mesh, double tol = 1e-10);

  struct Hit {
    int cell = -1;
    std::array<double, 4> bary{};
  };
  /// Throws CouplingError with the coordinates if no cell contains x.
  Hit locate(const Vec3& x) const;
  bool try_locate(const Vec3& x, Hit& hit) const;
  const TetMesh& mesh() const { return mesh_; }

 private:
  bool search(const Vec3& x, std::span<const int> candidates, Hit& hit) const;

  const TetMesh& mesh_;
  double tol_;
  Vec3 lo_, hi_;
  std::array<int, 3> dims_{};
  std::array<double, 3> cell_size_{};
  std::vector<std::size_t> bucket_ptr_;
  std::vector<int> bucket_cells_;
};

std::array<double, 4> barycentric(const TetMesh& mesh, std::size_t cell, const Vec3& x);

/// Circle points per 1D node: max(8, ceil(2 pi R2 / h_min)).
int default_circle_points(double R2, double h_min);

struct PerimeterAverageOperator {
  SparseMatrix matrix;  // n_1d x n_3d
  int n_quad = 0;
  std::vector<double> radius;              // circle radius per 1D vertex
  std::vector<Vec3> points;                // quadrature points, row-major by 1D vertex
  std::vector<int> host_cell;              // per quadrature point
  std::vector<std::array<double, 4>> bary;  // per quadrature point
};

/// Average of P1 values over the circle of radius R2(s_i, t) around every
/// 1D vertex, in the (N, B) plane, with n_quad equispaced points.
/// `radius_override` replaces R2 when positive.
PerimeterAverageOperator build_perimeter_average(const TetMesh& mesh, const LineMesh& line,
                                                 std::span<const VesselGeometry> geometry, int n_quad, double t,
                                                 double radius_override = 0.0);

struct SectionAverageOperator {
  SparseMatrix matrix;
  int n_r = 0;
  int n_theta = 0;
};

/// Average over the disk/annulus [R1, R2] around every 1D vertex with n_r
/// Gauss points radially times n_theta equispaced angles, weighted by r.
SectionAverageOperator build_section_average(const TetMesh& mesh, const LineMesh& line,
                                             std::span<const VesselGeometry> geometry, int n_r, int n_theta, double t);

/// Closest centerline position; ties resolved by the lowest curve index.
struct CenterlinePosition {
  int curve = 0;
  double s = 0.0;
  double distance = 0.0;
};
CenterlinePosition project_to_centerline(const LineMesh& line, const Vec3& x);

/// Matrix mapping 1D nodal values to values at the given points by
/// projecting each point onto the centerline (uniform-in-section extension).
SparseMatrix build_extension(const LineMesh& line, std::span<const Vec3> points);
Vector extend_1d_to_3d(const LineMesh& line, std::span<const double> chat, std::span<const Vec3> points);

/// Interpolation weights of the 1D P1 function of curve `curve` at s.
std::vector<std::pair<int, double>> line_interpolation(const LineMesh& line, int curve, double s);

struct ExchangeBlocks {
  SparseMatrix cc;         // Pi^T M Pi
  SparseMatrix c_chat;     // -Pi^T M W
  SparseMatrix chat_c;     // -M Pi      (Weighted: -W M Pi)
  SparseMatrix chat_chat;  // M W        (Weighted: W M W)
};

/// How the 1D test function enters the exchange term.
/// Plain: b(w c_hat - c_bar, v_hat), which conserves total solute for any w_bar.
/// Weighted: b(w c_hat - c_bar, w v_hat), symmetric with energy (c_bar - w c_hat)^2.
/// Both coincide for w_bar = 1.
enum class ExchangeTest { Plain, Weighted };

/// Blocks of b(c_bar - w c_hat, v_bar) and the 1D counterpart with the
/// 1D weighted mass M (xi P) and W = diag(w_bar).
ExchangeBlocks assemble_exchange_blocks(const SparseMatrix& Pi, const SparseMatrix& M_xiP,
                                        std::span<const double> w_bar, ExchangeTest test = ExchangeTest::Plain);

}  // namespace vasotrans
