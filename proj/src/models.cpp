#include "vasotrans/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "vasotrans/solvers.hpp"

namespace vasotrans {

int TimeGrid::steps() const {
  if (!(tau > 0.0)) throw ModelError("time step tau must be positive");
  if (!(T > 0.0)) throw ModelError("final time T must be positive");
  const double n = T / tau;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n)) throw ModelError("T must be a multiple of tau");
  return static_cast<int>(r);
}

std::size_t TransientSolution::field(const std::string& name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == name) return i;
  }
  throw ModelError("unknown solution field '" + name + "'");
}

void TransientSolution::push(double t, std::vector<Vector> v) {
  if (v.size() != fields.size()) throw ModelError("field count mismatch in solution snapshot");
  if (!times.empty() && !(t > times.back())) throw ModelError("solution time stamps must increase");
  if (values.empty()) values.resize(fields.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!values[i].empty() && values[i].back().size() != v[i].size()) {
      throw ModelError("field '" + fields[i] + "' changed size");
    }
    values[i].push_back(std::move(v[i]));
  }
  times.push_back(t);
}

namespace {

bool keep_level(const StepOptions& opt, int k, int n) {
  if (k == 0 || k == n) return true;
  return opt.keep_every > 0 && k % opt.keep_every == 0;
}

struct DirichletSet {
  std::size_t field = 0;
  std::vector<int> dofs;
  double value = 0.0;
};

// Monolithic step system with Dirichlet lift kept aside, so a fixed matrix
// is factorized once and only right-hand sides change between steps.
class StepSolver {
 public:
  void prepare(BlockSystem sys, const std::vector<DirichletSet>& bcs, std::size_t direct_limit, SolveStats& st) {
    for (std::size_t i = 0; i < sys.num_fields(); ++i) std::fill(sys.rhs(i).begin(), sys.rhs(i).end(), 0.0);
    offsets_.clear();
    for (std::size_t i = 0; i <= sys.num_fields(); ++i) offsets_.push_back(i < sys.num_fields() ? sys.field_offset(i) : sys.total_size());
    fixed_.assign(sys.total_size(), 0);
    for (const auto& bc : bcs) {
      sys.apply_dirichlet(bc.field, bc.dofs, bc.value);
      for (int d : bc.dofs) fixed_[sys.field_offset(bc.field) + d] = 1;
    }
    A_ = sys.monolithic();
    lift_ = sys.monolithic_rhs();
    direct_ = A_.rows() <= direct_limit;
    if (direct_) {
      lu_.factorize(A_);
      ++st.factorizations;
    }
    st.dofs = A_.rows();
  }

  Vector solve(const std::vector<Vector>& rhs, const Vector& x0, SolveStats& st) const {
    Vector b;
    b.reserve(A_.rows());
    for (const auto& r : rhs) b.insert(b.end(), r.begin(), r.end());
    if (b.size() != A_.rows()) throw ModelError("right-hand side size mismatch");
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = fixed_[i] ? lift_[i] : b[i] + lift_[i];
    if (direct_) return lu_.solve(b);
    IterativeOptions opt;
    opt.x0 = x0;
    auto res = solve_iterative(A_, b, opt);
    ++st.iterative_solves;
    st.iterations += res.iterations;
    return res.x;
  }

  std::vector<Vector> split(const Vector& x) const {
    std::vector<Vector> out;
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
      out.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                       x.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
    return out;
  }

 private:
  SparseMatrix A_;
  LuSolver lu_;
  bool direct_ = true;
  Vector lift_;
  std::vector<char> fixed_;
  std::vector<std::size_t> offsets_;
};

Vector concat(const std::vector<Vector>& v) {
  Vector out;
  for (const auto& x : v) out.insert(out.end(), x.begin(), x.end());
  return out;
}

Vector add_vec(Vector a, const Vector& b, double s = 1.0) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
  return a;
}

Vector scale_vec(Vector a, double s) {
  for (double& x : a) x *= s;
  return a;
}

// Restriction from parent vertex numbering to a submesh: R[i, parent(i)] = 1.
SparseMatrix restriction(const TetMesh& sub, std::size_t n_parent) {
  TripletList t;
  for (std::size_t i = 0; i < sub.parent_vertex.size(); ++i) t.add(static_cast<int>(i), sub.parent_vertex[i], 1.0);
  return SparseMatrix::from_triplets(sub.num_vertices(), n_parent, t);
}

std::array<int, 3> sorted_face(std::array<int, 3> f) {
  std::sort(f.begin(), f.end());
  return f;
}

std::set<std::array<int, 3>> faces_of(const TetMesh& mesh, const RegionSet& regions) {
  std::set<std::array<int, 3>> out;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    if (!regions.empty() && std::find(regions.begin(), regions.end(), mesh.cell_region[c]) == regions.end()) continue;
    const auto& t = mesh.cells[c];
    for (int k = 0; k < 4; ++k) {
      std::array<int, 3> f{};
      int m = 0;
      for (int j = 0; j < 4; ++j) {
        if (j != k) f[m++] = t[j];
      }
      out.insert(sorted_face(f));
    }
  }
  return out;
}

void check_interface(const TetMesh& mesh, const RegionSet& a, const RegionSet& b, FacetMarker marker) {
  if (!mesh.has_marker(marker)) throw ModelError("interface marker " + to_string(marker) + " absent from mesh");
  const auto fa = faces_of(mesh, a);
  const auto fb = faces_of(mesh, b);
  std::vector<std::size_t> bad;
  for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
    if (mesh.facet_marker[f] != marker) continue;
    const auto key = sorted_face(mesh.facets[f]);
    if (!fa.count(key) || !fb.count(key)) bad.push_back(f);
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "non-conforming interface " << to_string(marker) << ": " << bad.size() << " unmatched facets (";
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 8); ++k) os << (k ? " " : "") << bad[k];
    if (bad.size() > 8) os << " ...";
    os << ")";
    throw ModelError(os.str());
  }
}

bool constant_tensor(const TensorField& f) { return f.is_constant(); }
bool constant_vector(const VectorField& f) { return f.is_constant(); }

bool geometry_time_dependent(const std::vector<VesselGeometry>& g) {
  return std::any_of(g.begin(), g.end(), [](const VesselGeometry& x) { return x.time_dependent(); });
}

void check_geometry(const LineMesh& line, const std::vector<VesselGeometry>& g) {
  if (g.size() != line.graph.curves().size()) throw ModelError("one vessel geometry per curve required");
}

Vector initial_1d(const LineMesh& line, const LineCoefficient& init) {
  Vector v(line.num_vertices(), 0.0);
  if (!init) return v;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = init(line.vertex_curve[i], line.vertex_s[i], 0.0);
  return v;
}

int pick_n_quad(int requested, const TetMesh& mesh, const std::vector<VesselGeometry>& g) {
  if (requested > 0) return requested;
  double h_min = std::numeric_limits<double>::infinity();
  for (Region r : {Region::Vessel, Region::Pvs}) {
    if (mesh.has_region(r)) h_min = std::min(h_min, size_range(mesh, r).h_min);
  }
  if (!std::isfinite(h_min)) h_min = size_range(mesh, Region::Surroundings).h_min;
  double R = 0.0;
  for (const auto& x : g) R = std::max(R, x.R2(0.0, 0.0));
  return default_circle_points(R, h_min);
}

std::vector<DirichletSet> outer_dirichlet(const TetMesh& mesh, std::size_t field, double value) {
  std::vector<DirichletSet> out;
  if (mesh.has_marker(FacetMarker::OuterBoundary)) {
    out.push_back({field, mesh.marked_vertices(FacetMarker::OuterBoundary), value});
  } else {
    throw ModelError("mesh carries no OUTER_BOUNDARY facets for the Dirichlet condition");
  }
  return out;
}

// 3D operator of one field: M/tau + K + C, plus the mass matrix itself.
struct Operator3D {
  SparseMatrix M;
  SparseMatrix A;  // K + C
};

Operator3D assemble_operator_3d(const TetMesh& mesh, const RegionSet& regions, const TensorField& D,
                                const VectorField& u, double t) {
  Operator3D op;
  op.M = assemble_mass(mesh, regions, ScalarField(1.0), t);
  op.A = assemble_stiffness(mesh, regions, D, t);
  if (!u.is_zero()) op.A = add(op.A, assemble_convection(mesh, regions, u, t));
  return op;
}

}  // namespace

// ---------------------------------------------------------------------------

MultidomainResult solve_reference_multidomain(const MultidomainSpec& spec) {
  if (!spec.mesh) throw ModelError("multidomain spec has no mesh");
  if (spec.domains.empty()) throw ModelError("multidomain spec has no domains");
  const TetMesh& parent = *spec.mesh;
  const int n_steps = spec.step.time.steps();
  const double tau = spec.step.time.tau;
  MultidomainResult res;
  const std::size_t nd = spec.domains.size();
  std::vector<SparseMatrix> R;
  for (const auto& d : spec.domains) {
    res.submeshes.push_back(d.regions.empty() ? extract_submesh(parent, std::vector<Region>{Region::Vessel, Region::Pvs,
                                                                                             Region::Surroundings})
                                              : extract_submesh(parent, d.regions));
    R.push_back(restriction(res.submeshes.back(), parent.num_vertices()));
    check_spd(d.D, res.submeshes.back(), 0.0);
  }
  for (const auto& itf : spec.interfaces) {
    if (itf.a >= nd || itf.b >= nd || itf.a == itf.b) throw ModelError("interface refers to invalid domains");
    check_interface(parent, spec.domains[itf.a].regions, spec.domains[itf.b].regions, itf.marker);
  }
  bool fixed_matrix = true;
  for (const auto& d : spec.domains) fixed_matrix = fixed_matrix && constant_tensor(d.D) && constant_vector(d.u);
  for (const auto& i : spec.interfaces) fixed_matrix = fixed_matrix && i.xi.is_constant();

  std::vector<std::pair<std::string, std::size_t>> fields;
  for (std::size_t i = 0; i < nd; ++i) fields.emplace_back(spec.domains[i].name, res.submeshes[i].num_vertices());
  res.solution.fields.clear();
  for (const auto& f : fields) res.solution.fields.push_back(f.first);

  std::vector<DirichletSet> bcs;
  if (spec.dirichlet_outer) {
    for (std::size_t i = 0; i < nd; ++i) {
      if (res.submeshes[i].has_marker(FacetMarker::OuterBoundary)) {
        bcs.push_back({i, res.submeshes[i].marked_vertices(FacetMarker::OuterBoundary), spec.outer_value});
      }
    }
    if (bcs.empty()) throw ModelError("no domain touches OUTER_BOUNDARY");
  }

  std::vector<Vector> c(nd);
  for (std::size_t i = 0; i < nd; ++i) c[i] = interpolate(res.submeshes[i], spec.domains[i].initial, 0.0);
  res.solution.push(0.0, c);

  std::vector<SparseMatrix> M(nd);
  StepSolver solver;
  for (int k = 1; k <= n_steps; ++k) {
    const double t = k * tau;
    if (k == 1 || !fixed_matrix) {
      BlockSystem sys(fields);
      for (std::size_t i = 0; i < nd; ++i) {
        const auto op = assemble_operator_3d(res.submeshes[i], {}, spec.domains[i].D, spec.domains[i].u, t);
        M[i] = op.M;
        sys.add_block(i, i, op.M, 1.0 / tau);
        sys.add_block(i, i, op.A);
      }
      for (const auto& itf : spec.interfaces) {
        const SparseMatrix F = assemble_facet_mass(parent, itf.marker, itf.xi, t);
        const SparseMatrix Fa = multiply(F, R[itf.a].transpose());
        const SparseMatrix Fb = multiply(F, R[itf.b].transpose());
        sys.add_block(itf.a, itf.a, multiply(R[itf.a], Fa));
        sys.add_block(itf.b, itf.b, multiply(R[itf.b], Fb));
        sys.add_block(itf.a, itf.b, multiply(R[itf.a], Fb), -1.0);
        sys.add_block(itf.b, itf.a, multiply(R[itf.b], Fa), -1.0);
      }
      solver.prepare(std::move(sys), bcs, spec.step.direct_limit, res.stats);
    }
    std::vector<Vector> rhs(nd);
    for (std::size_t i = 0; i < nd; ++i) {
      rhs[i] = scale_vec(M[i] * c[i], 1.0 / tau);
      const auto& f = spec.domains[i].f;
      if (!(f.is_constant() && f.value() == 0.0)) rhs[i] = add_vec(rhs[i], assemble_load(res.submeshes[i], {}, f, t));
    }
    c = solver.split(solver.solve(rhs, concat(c), res.stats));
    ++res.stats.steps;
    if (keep_level(spec.step, k, n_steps)) res.solution.push(t, c);
  }
  return res;
}

// ---------------------------------------------------------------------------

LineCoefficient section_average_initial(const ScalarField& c0, const LineMesh& line,
                                        const std::vector<VesselGeometry>& geometry, int n_r, int n_theta) {
  check_geometry(line, geometry);
  const LineMesh* lm = &line;
  return [c0, lm, geometry, n_r, n_theta](int curve, double s, double t) {
    const auto& C = lm->graph.curves()[curve];
    const double ss = std::min(s, geometry[curve].length());
    const Frame F = C.frame_at(ss);
    const Vec3 x0 = C.point_at(ss);
    const double R1 = geometry[curve].R1(ss, t), R2 = geometry[curve].R2(ss, t);
    std::vector<double> gx, gw;
    gauss_legendre(n_r, gx, gw);
    double num = 0.0, den = 0.0;
    for (int a = 0; a < n_r; ++a) {
      const double r = R1 + 0.5 * (R2 - R1) * (gx[a] + 1.0);
      for (int k = 0; k < n_theta; ++k) {
        const double th = 2.0 * std::numbers::pi * k / n_theta;
        const Vec3 x = x0 + r * std::cos(th) * F.N + r * std::sin(th) * F.B;
        num += gw[a] * r * c0(x, t);
        den += gw[a] * r;
      }
    }
    return num / den;
  };
}

namespace {

// Everything of one reduced vessel equation at one time level.
struct VesselLevel {
  VesselForms1D forms;
  SparseMatrix A;  // stiffness + drift + convection (+ dtA for the analytic form)
};

VesselLevel vessel_level(const LineMesh& line, const VesselPhysics& v, TimeDerivative td, double t) {
  VesselLevel L;
  L.forms = assemble_1d(line, v.geometry, v.coef, t);
  L.A = add(add(L.forms.stiffness, L.forms.drift), L.forms.convection);
  if (td == TimeDerivative::Analytic) L.A = add(L.A, L.forms.mass_dtA);
  return L;
}

// (M_A(t+) c+ - M_A(t) c) / tau on the left gives M_A(t) c / tau on the right;
// the analytic form uses M_A(t+) for both.
Vector vessel_history(const VesselLevel& prev, const VesselLevel& next, TimeDerivative td, const Vector& c, double tau) {
  const SparseMatrix& M = td == TimeDerivative::Conservative ? prev.forms.mass_A : next.forms.mass_A;
  return scale_vec(M * c, 1.0 / tau);
}

}  // namespace

Coupled3D1DResult solve_3d1d(const Coupled3D1DSpec& spec) {
  if (!spec.mesh || !spec.line) throw ModelError("3D-1D spec needs a mesh and a line mesh");
  const TetMesh& mesh = *spec.mesh;
  const LineMesh& line = *spec.line;
  check_geometry(line, spec.vessel.geometry);
  check_spd(spec.D, mesh, 0.0);
  const int n_steps = spec.step.time.steps();
  const double tau = spec.step.time.tau;
  Coupled3D1DResult res;
  res.n_quad = pick_n_quad(spec.n_quad, mesh, spec.vessel.geometry);
  const bool moving = geometry_time_dependent(spec.vessel.geometry);
  const bool fixed_matrix = !moving && constant_tensor(spec.D) && constant_vector(spec.u);

  const std::vector<std::pair<std::string, std::size_t>> fields{{"c", mesh.num_vertices()},
                                                                 {"chat", line.num_vertices()}};
  res.solution.fields = {"c", "chat"};
  std::vector<DirichletSet> bcs;
  if (spec.dirichlet_outer) bcs = outer_dirichlet(mesh, 0, spec.outer_value);

  Vector c = interpolate(mesh, spec.initial, 0.0);
  Vector chat = initial_1d(line, spec.vessel.initial);
  res.solution.push(0.0, {c, chat});

  VesselLevel prev = vessel_level(line, spec.vessel, spec.time_derivative, 0.0);
  VesselLevel next;
  Operator3D op3;
  SparseMatrix M1;  // 1D mass for the history term at fixed geometry
  StepSolver solver;
  for (int k = 1; k <= n_steps; ++k) {
    const double t = k * tau;
    const bool rebuild = k == 1 || !fixed_matrix;
    if (rebuild || moving || spec.vessel.coef.source) next = vessel_level(line, spec.vessel, spec.time_derivative, t);
    if (rebuild) {
      op3 = assemble_operator_3d(mesh, {}, spec.D, spec.u, t);
      const auto Pi = build_perimeter_average(mesh, line, spec.vessel.geometry, res.n_quad, t);
      const auto B = assemble_exchange_blocks(Pi.matrix, next.forms.mass_xiP, next.forms.w_bar, spec.exchange);
      BlockSystem sys(fields);
      sys.add_block(0, 0, op3.M, 1.0 / tau);
      sys.add_block(0, 0, op3.A);
      sys.add_block(0, 0, B.cc);
      sys.add_block(0, 1, B.c_chat);
      sys.add_block(1, 0, B.chat_c);
      sys.add_block(1, 1, next.forms.mass_A, 1.0 / tau);
      sys.add_block(1, 1, next.A);
      sys.add_block(1, 1, B.chat_chat);
      solver.prepare(std::move(sys), bcs, spec.step.direct_limit, res.stats);
    }
    Vector r0 = scale_vec(op3.M * c, 1.0 / tau);
    if (!(spec.f.is_constant() && spec.f.value() == 0.0)) r0 = add_vec(r0, assemble_load(mesh, {}, spec.f, t));
    Vector r1 = add_vec(vessel_history(prev, next, spec.time_derivative, chat, tau), next.forms.load);
    auto x = solver.split(solver.solve({r0, r1}, concat({c, chat}), res.stats));
    c = std::move(x[0]);
    chat = std::move(x[1]);
    prev = next;
    ++res.stats.steps;
    if (keep_level(spec.step, k, n_steps)) res.solution.push(t, {c, chat});
  }
  return res;
}

// ---------------------------------------------------------------------------

SparseMatrix network_operator(const NetworkSpec& spec, double t, Vector* load) {
  if (!spec.line) throw ModelError("network spec has no line mesh");
  check_geometry(*spec.line, spec.vessel.geometry);
  const auto L = vessel_level(*spec.line, spec.vessel, TimeDerivative::Analytic, t);
  SparseMatrix A = L.A;
  Vector b = L.forms.load;
  if (spec.exterior) {
    if (spec.exterior->size() != spec.line->num_vertices()) throw ModelError("exterior field size mismatch");
    A = add(A, multiply(L.forms.mass_xiP, SparseMatrix::diagonal(L.forms.w_bar)));
    b = add_vec(b, L.forms.mass_xiP * *spec.exterior);
  }
  if (load) *load = std::move(b);
  return A;
}

Vector solve_1d_network_steady(const NetworkSpec& spec, double t) {
  Vector b;
  const SparseMatrix A = network_operator(spec, t, &b);
  BlockSystem sys({{"chat", A.rows()}});
  sys.add_block(0, 0, A);
  sys.rhs(0) = b;
  for (const auto& [name, value] : spec.dirichlet) apply_dirichlet(sys, 0, *spec.line, name, value);
  return solve_direct(sys.monolithic(), sys.monolithic_rhs());
}

TransientSolution solve_1d_network(const NetworkSpec& spec) {
  if (!spec.line) throw ModelError("network spec has no line mesh");
  const LineMesh& line = *spec.line;
  check_geometry(line, spec.vessel.geometry);
  const int n_steps = spec.step.time.steps();
  const double tau = spec.step.time.tau;
  const bool moving = geometry_time_dependent(spec.vessel.geometry);
  TransientSolution sol;
  sol.fields = {"chat"};
  Vector chat = initial_1d(line, spec.vessel.initial);
  sol.push(0.0, {chat});
  std::vector<DirichletSet> bcs;
  for (const auto& [name, value] : spec.dirichlet) {
    auto it = line.markers.find(name);
    if (it == line.markers.end() || it->second.empty()) throw ModelError("unknown line marker " + name);
    bcs.push_back({0, it->second, value});
  }
  if (spec.exterior && spec.exterior->size() != line.num_vertices()) throw ModelError("exterior field size mismatch");
  VesselLevel prev = vessel_level(line, spec.vessel, spec.time_derivative, 0.0);
  VesselLevel next;
  StepSolver solver;
  SolveStats stats;
  for (int k = 1; k <= n_steps; ++k) {
    const double t = k * tau;
    const bool rebuild = k == 1 || moving;
    if (rebuild || spec.vessel.coef.source) next = vessel_level(line, spec.vessel, spec.time_derivative, t);
    if (rebuild) {
      BlockSystem sys({{"chat", line.num_vertices()}});
      sys.add_block(0, 0, next.forms.mass_A, 1.0 / tau);
      sys.add_block(0, 0, next.A);
      if (spec.exterior) sys.add_block(0, 0, multiply(next.forms.mass_xiP, SparseMatrix::diagonal(next.forms.w_bar)));
      solver.prepare(std::move(sys), bcs, spec.step.direct_limit, stats);
    }
    Vector r = add_vec(vessel_history(prev, next, spec.time_derivative, chat, tau), next.forms.load);
    if (spec.exterior) r = add_vec(r, next.forms.mass_xiP * *spec.exterior);
    chat = solver.solve({r}, chat, stats);
    prev = next;
    if (keep_level(spec.step, k, n_steps)) sol.push(t, {chat});
  }
  return sol;
}

// ---------------------------------------------------------------------------

Coupled3D1D1DResult solve_3d1d1d(const Coupled3D1D1DSpec& spec) {
  if (!spec.mesh || !spec.line) throw ModelError("3D-1D-1D spec needs a mesh and a line mesh");
  const TetMesh& mesh = *spec.mesh;
  const LineMesh& line = *spec.line;
  check_geometry(line, spec.pvs.geometry);
  check_geometry(line, spec.vessel.geometry);
  for (std::size_t c = 0; c < spec.pvs.geometry.size(); ++c) {
    const auto& p = spec.pvs.geometry[c];
    const auto& v = spec.vessel.geometry[c];
    for (double s : {0.0, 0.5 * p.length(), p.length()}) {
      if (!(p.R2(s, 0.0) > p.R1(s, 0.0)) || std::abs(p.R1(s, 0.0) - v.R2(s, 0.0)) > 1e-12) {
        throw ModelError("invalid annulus: PVS must span [R1, R2] around a vessel of radius R1 with R2 > R1");
      }
    }
  }
  check_spd(spec.D, mesh, 0.0);
  const int n_steps = spec.step.time.steps();
  const double tau = spec.step.time.tau;
  Coupled3D1D1DResult res;
  res.n_quad = pick_n_quad(spec.n_quad, mesh, spec.pvs.geometry);
  const bool moving = geometry_time_dependent(spec.pvs.geometry) || geometry_time_dependent(spec.vessel.geometry);
  const bool fixed_matrix = !moving && constant_tensor(spec.D) && constant_vector(spec.u);
  const std::vector<std::pair<std::string, std::size_t>> fields{
      {"c", mesh.num_vertices()}, {"chat_p", line.num_vertices()}, {"chat_v", line.num_vertices()}};
  res.solution.fields = {"c", "chat_p", "chat_v"};
  std::vector<DirichletSet> bcs;
  if (spec.dirichlet_outer) bcs = outer_dirichlet(mesh, 0, spec.outer_value);

  Vector c = interpolate(mesh, spec.initial, 0.0);
  Vector cp = initial_1d(line, spec.pvs.initial);
  Vector cv = initial_1d(line, spec.vessel.initial);
  res.solution.push(0.0, {c, cp, cv});

  VesselLevel prev_p = vessel_level(line, spec.pvs, spec.time_derivative, 0.0);
  VesselLevel prev_v = vessel_level(line, spec.vessel, spec.time_derivative, 0.0);
  VesselLevel next_p, next_v;
  Operator3D op3;
  StepSolver solver;
  for (int k = 1; k <= n_steps; ++k) {
    const double t = k * tau;
    const bool rebuild = k == 1 || !fixed_matrix;
    const bool sources = spec.pvs.coef.source || spec.vessel.coef.source;
    if (rebuild || moving || sources) {
      next_p = vessel_level(line, spec.pvs, spec.time_derivative, t);
      next_v = vessel_level(line, spec.vessel, spec.time_derivative, t);
    }
    if (rebuild) {
      op3 = assemble_operator_3d(mesh, {}, spec.D, spec.u, t);
      const auto Pi = build_perimeter_average(mesh, line, spec.pvs.geometry, res.n_quad, t);
      const auto B = assemble_exchange_blocks(Pi.matrix, next_p.forms.mass_xiP, next_p.forms.w_bar);
      const SparseMatrix& Mv = next_v.forms.mass_xiP;  // xi_v P_v
      BlockSystem sys(fields);
      sys.add_block(0, 0, op3.M, 1.0 / tau);
      sys.add_block(0, 0, op3.A);
      sys.add_block(0, 0, B.cc);
      sys.add_block(0, 1, B.c_chat);
      sys.add_block(1, 0, B.chat_c);
      sys.add_block(1, 1, next_p.forms.mass_A, 1.0 / tau);
      sys.add_block(1, 1, next_p.A);
      sys.add_block(1, 1, B.chat_chat);
      sys.add_block(1, 1, Mv);
      sys.add_block(1, 2, Mv, -1.0);
      sys.add_block(2, 2, next_v.forms.mass_A, 1.0 / tau);
      sys.add_block(2, 2, next_v.A);
      sys.add_block(2, 2, Mv);
      sys.add_block(2, 1, Mv, -1.0);
      solver.prepare(std::move(sys), bcs, spec.step.direct_limit, res.stats);
    }
    Vector r0 = scale_vec(op3.M * c, 1.0 / tau);
    if (!(spec.f.is_constant() && spec.f.value() == 0.0)) r0 = add_vec(r0, assemble_load(mesh, {}, spec.f, t));
    Vector r1 = add_vec(vessel_history(prev_p, next_p, spec.time_derivative, cp, tau), next_p.forms.load);
    Vector r2 = add_vec(vessel_history(prev_v, next_v, spec.time_derivative, cv, tau), next_v.forms.load);
    auto x = solver.split(solver.solve({r0, r1, r2}, concat({c, cp, cv}), res.stats));
    c = std::move(x[0]);
    cp = std::move(x[1]);
    cv = std::move(x[2]);
    prev_p = next_p;
    prev_v = next_v;
    ++res.stats.steps;
    if (keep_level(spec.step, k, n_steps)) res.solution.push(t, {c, cp, cv});
  }
  return res;
}

// ---------------------------------------------------------------------------

double total_mass_3d(const TetMesh& mesh, const Vector& c) {
  const SparseMatrix M = assemble_mass(mesh, {}, ScalarField(1.0), 0.0);
  const Vector ones(mesh.num_vertices(), 1.0);
  return dot(ones, M * c);
}

double total_mass_1d(const LineMesh& line, const std::vector<VesselGeometry>& geometry, const Vector& chat, double t) {
  check_geometry(line, geometry);
  const SparseMatrix M = assemble_line_mass(
      line,
      [&](int c, double s, double tt) { return geometry[c].metrics(std::min(s, geometry[c].length()), tt).area; }, t);
  const Vector ones(line.num_vertices(), 1.0);
  return dot(ones, M * chat);
}

}  // namespace vasotrans
