#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vasotrans/models.hpp"

namespace vasotrans {

namespace {

struct CellQuadrature {
  std::vector<Vec3> points;
  std::vector<double> weights;
  std::vector<double> values;  // P1 field at the points
};

CellQuadrature quadrature_of(const TetMesh& mesh, const Vector& c) {
  if (c.size() != mesh.num_vertices()) throw ModelError("field size does not match the mesh");
  const auto& Q = tet_rule_degree2();
  CellQuadrature q;
  q.points.reserve(4 * mesh.num_cells());
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const auto& t = mesh.cells[k];
    const double V = mesh.cell_volume(k);
    for (int p = 0; p < 4; ++p) {
      Vec3 x{};
      double v = 0.0;
      for (int i = 0; i < 4; ++i) {
        x += Q.bary[p][i] * mesh.vertices[t[i]];
        v += Q.bary[p][i] * c[t[i]];
      }
      q.points.push_back(x);
      q.weights.push_back(Q.weight[p] * V);
      q.values.push_back(v);
    }
  }
  return q;
}

void check_same_time(const TransientSolution& a, const TransientSolution& b) {
  const double ta = a.final_time(), tb = b.final_time();
  if (std::abs(ta - tb) > 1e-12 * std::max(1.0, std::abs(ta))) {
    std::ostringstream os;
    os << "final time mismatch: " << ta << " vs " << tb;
    throw ModelError(os.str());
  }
}

}  // namespace

double l2_error_vs_extension(const TetMesh& mesh, const Vector& c3, const LineMesh& line, const Vector& chat) {
  if (chat.size() != line.num_vertices()) throw ModelError("1D field size does not match the line mesh");
  const auto q = quadrature_of(mesh, c3);
  const Vector e = build_extension(line, q.points) * chat;
  double s = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) s += q.weights[i] * (q.values[i] - e[i]) * (q.values[i] - e[i]);
  return std::sqrt(s);
}

double l2_difference(const TetMesh& mesh, const Vector& a, const TetMesh& other, const Vector& b) {
  if (b.size() != other.num_vertices()) throw ModelError("field size does not match the other mesh");
  const auto& Q = tet_rule_degree2();
  const bool child = mesh.parent_id == other.id && mesh.parent_cell.size() == mesh.num_cells();
  if (child) {
    double s = 0.0;
    for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
      const auto& t = mesh.cells[k];
      const double V = mesh.cell_volume(k);
      for (int p = 0; p < 4; ++p) {
        double d = 0.0;
        for (int i = 0; i < 4; ++i) d += Q.bary[p][i] * (a[t[i]] - b[mesh.parent_vertex[t[i]]]);
        s += Q.weight[p] * V * d * d;
      }
    }
    return std::sqrt(s);
  }
  const auto q = quadrature_of(mesh, a);
  const PointLocator loc(other);
  double s = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) {
    const auto hit = loc.locate(q.points[i]);
    double v = 0.0;
    for (int j = 0; j < 4; ++j) v += hit.bary[j] * b[other.cells[hit.cell][j]];
    s += q.weights[i] * (q.values[i] - v) * (q.values[i] - v);
  }
  return std::sqrt(s);
}

double l2_error_vs_field(const TetMesh& mesh, const Vector& c, const ScalarField& g, double t) {
  const auto q = quadrature_of(mesh, c);
  double s = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) {
    const double d = q.values[i] - g(q.points[i], t);
    s += q.weights[i] * d * d;
  }
  return std::sqrt(s);
}

ModelErrors compute_model_error(const MultidomainResult& reference, std::size_t vessel_index,
                                std::size_t tissue_index, const Coupled3D1DResult& reduced, const TetMesh& mesh,
                                const LineMesh& line) {
  check_same_time(reference.solution, reduced.solution);
  const auto& ref = reference.solution;
  const TetMesh& mv = reference.submeshes.at(vessel_index);
  const TetMesh& ms = reference.submeshes.at(tissue_index);
  ModelErrors e;
  e.E_v = l2_error_vs_extension(mv, ref.values[vessel_index].back(), line, reduced.solution.final_value("chat"));
  e.Etilde_v = e.E_v / std::sqrt(mv.volume());
  e.E_s = l2_difference(ms, ref.values[tissue_index].back(), mesh, reduced.solution.final_value("c"));
  return e;
}

ModelErrors compute_model_error(const MultidomainResult& reference, std::size_t vessel_index,
                                std::size_t pvs_index, std::size_t tissue_index, const Coupled3D1D1DResult& reduced,
                                const TetMesh& mesh, const LineMesh& line) {
  check_same_time(reference.solution, reduced.solution);
  const auto& ref = reference.solution;
  const TetMesh& mv = reference.submeshes.at(vessel_index);
  const TetMesh& mp = reference.submeshes.at(pvs_index);
  const TetMesh& ms = reference.submeshes.at(tissue_index);
  ModelErrors e;
  e.E_v = l2_error_vs_extension(mv, ref.values[vessel_index].back(), line, reduced.solution.final_value("chat_v"));
  e.Etilde_v = e.E_v / std::sqrt(mv.volume());
  e.E_p = l2_error_vs_extension(mp, ref.values[pvs_index].back(), line, reduced.solution.final_value("chat_p"));
  // Normalized by the whole R2 cylinder (vessel plus PVS).
  e.Etilde_p = *e.E_p / std::sqrt(mv.volume() + mp.volume());
  e.E_s = l2_difference(ms, ref.values[tissue_index].back(), mesh, reduced.solution.final_value("c"));
  return e;
}

std::vector<double> convergence_rates(const std::vector<double>& R, const std::vector<double>& E) {
  if (R.size() != E.size()) throw ModelError("rate table size mismatch");
  std::vector<double> r(R.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < R.size(); ++i) r[i] = std::log(E[i - 1] / E[i]) / std::log(R[i - 1] / R[i]);
  return r;
}

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::vector<double> column(const std::vector<ErrorRow>& rows, double (*get)(const ErrorRow&)) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(get(r));
  return v;
}

}  // namespace

std::string error_table_csv(const std::vector<ErrorRow>& rows) {
  const auto R = column(rows, [](const ErrorRow& r) { return r.R; });
  const auto Ev = column(rows, [](const ErrorRow& r) { return r.errors.E_v; });
  const auto Et = column(rows, [](const ErrorRow& r) { return r.errors.Etilde_v; });
  const auto Es = column(rows, [](const ErrorRow& r) { return r.errors.E_s; });
  const auto rv = convergence_rates(R, Ev), rt = convergence_rates(R, Et), rs = convergence_rates(R, Es);
  std::ostringstream os;
  os << "R,E_v,rate_Ev,Etilde_v,rate,E_s,rate_Es\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << num(R[i]) << ',' << num(Ev[i]) << ',' << num(rv[i]) << ',' << num(Et[i]) << ',' << num(rt[i]) << ','
       << num(Es[i]) << ',' << num(rs[i]) << '\n';
  }
  return os.str();
}

std::string error_table_csv_3d1d1d(const std::vector<ErrorRow>& rows) {
  const auto R = column(rows, [](const ErrorRow& r) { return r.R; });
  const auto Ev = column(rows, [](const ErrorRow& r) { return r.errors.E_v; });
  const auto Et = column(rows, [](const ErrorRow& r) { return r.errors.Etilde_v; });
  const auto Ep = column(rows, [](const ErrorRow& r) { return r.errors.E_p.value_or(std::nan("")); });
  const auto Etp = column(rows, [](const ErrorRow& r) { return r.errors.Etilde_p.value_or(std::nan("")); });
  const auto Es = column(rows, [](const ErrorRow& r) { return r.errors.E_s; });
  const auto rv = convergence_rates(R, Ev), rt = convergence_rates(R, Et), rp = convergence_rates(R, Ep),
             rtp = convergence_rates(R, Etp), rs = convergence_rates(R, Es);
  std::ostringstream os;
  os << "R1,E_v2,rate_Ev2,Etilde_v2,rate,E_p,rate_Ep,Etilde_p,rate_Etp,E_s,rate_Es\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << num(R[i]) << ',' << num(Ev[i]) << ',' << num(rv[i]) << ',' << num(Et[i]) << ',' << num(rt[i]) << ','
       << num(Ep[i]) << ',' << num(rp[i]) << ',' << num(Etp[i]) << ',' << num(rtp[i]) << ',' << num(Es[i]) << ','
       << num(rs[i]) << '\n';
  }
  return os.str();
}

}  // namespace vasotrans
