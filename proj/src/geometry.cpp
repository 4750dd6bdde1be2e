#include "vasotrans/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

namespace vasotrans {

namespace {

constexpr double kPi = std::numbers::pi;

// Unit vector orthogonal to t, chosen from the coordinate axis least aligned with it.
Vec3 any_orthogonal(const Vec3& t) {
  const Vec3 ex{1.0, 0.0, 0.0};
  const Vec3 ey{0.0, 1.0, 0.0};
  const Vec3 seed = std::abs(dot(t, ex)) < 0.9 ? ex : ey;
  return normalized(seed - dot(seed, t) * t);
}

// Rotate v by the minimal rotation taking unit vector a onto unit vector b.
Vec3 transport(const Vec3& v, const Vec3& a, const Vec3& b) {
  const Vec3 axis = cross(a, b);
  const double s = norm(axis);
  const double c = dot(a, b);
  if (s < 1e-15) {
    return v;
  }
  const Vec3 k = axis / s;
  return v * c + cross(k, v) * s + k * (dot(k, v) * (1.0 - c));
}

}  // namespace

std::vector<Frame> frenet_frames(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  if (n < 2) {
    throw GeometryError("degenerate curve: fewer than 2 vertices");
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (norm(points[i + 1] - points[i]) == 0.0) {
      throw GeometryError("degenerate curve: zero-length segment at vertex " + std::to_string(i));
    }
  }

  std::vector<Frame> frames(n);
  std::vector<bool> has_normal(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = i == 0 ? 0 : i - 1;
    const std::size_t next = i + 1 == n ? n - 1 : i + 1;
    Vec3 chord = points[next] - points[prev];

    if (n >= 3) {
      // Circle through three consecutive vertices, with p_i as origin.
      std::size_t ia = i - 1;
      std::size_t ib = i + 1;
      if (i == 0) {
        ia = 1;
        ib = 2;
      } else if (i + 1 == n) {
        ia = n - 3;
        ib = n - 2;
      }
      const Vec3 a = points[ia] - points[i];
      const Vec3 b = points[ib] - points[i];
      const Vec3 axb = cross(a, b);
      const double area2 = dot(axb, axb);
      if (std::sqrt(area2) > 1e-12 * norm(a) * norm(b)) {
        const Vec3 center = cross(dot(a, a) * b - dot(b, b) * a, axb) / (2.0 * area2);
        const Vec3 N = normalized(center);
        frames[i].N = N;
        frames[i].T = normalized(chord - dot(chord, N) * N);
        has_normal[i] = true;
        continue;
      }
    }
    frames[i].T = normalized(chord);
  }

  const auto first = std::find(has_normal.begin(), has_normal.end(), true);
  if (first == has_normal.end()) {
    frames[0].N = any_orthogonal(frames[0].T);
    for (std::size_t i = 1; i < n; ++i) {
      frames[i].N = transport(frames[i - 1].N, frames[i - 1].T, frames[i].T);
    }
  } else {
    const auto i0 = static_cast<std::size_t>(first - has_normal.begin());
    for (std::size_t i = i0; i-- > 0;) {
      frames[i].N = transport(frames[i + 1].N, frames[i + 1].T, frames[i].T);
    }
    for (std::size_t i = i0 + 1; i < n; ++i) {
      if (!has_normal[i]) {
        frames[i].N = transport(frames[i - 1].N, frames[i - 1].T, frames[i].T);
      }
    }
  }

  for (auto& f : frames) {
    f.N = normalized(f.N - dot(f.N, f.T) * f.T);
    f.B = cross(f.T, f.N);
  }
  return frames;
}

Curve::Curve(std::vector<Vec3> points) : points_(std::move(points)) {
  frames_ = frenet_frames(points_);
  arc_.resize(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    arc_[i] = arc_[i - 1] + norm(points_[i] - points_[i - 1]);
  }
}

Curve Curve::straight(const Vec3& a, const Vec3& b, int n_segments) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= n_segments; ++i) {
    const double t = static_cast<double>(i) / n_segments;
    pts.push_back(a + (b - a) * t);
  }
  return Curve(std::move(pts));
}

std::size_t Curve::segment_of(double s) const {
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  std::size_t k = it == arc_.begin() ? 0 : static_cast<std::size_t>(it - arc_.begin()) - 1;
  return std::min(k, points_.size() - 2);
}

Vec3 Curve::point_at(double s) const {
  const std::size_t k = segment_of(s);
  const double t = (s - arc_[k]) / (arc_[k + 1] - arc_[k]);
  return points_[k] + (points_[k + 1] - points_[k]) * t;
}

Frame Curve::frame_at(double s) const {
  const std::size_t k = segment_of(s);
  const double t = std::clamp((s - arc_[k]) / (arc_[k + 1] - arc_[k]), 0.0, 1.0);
  if (t == 0.0) return frames_[k];
  if (t == 1.0) return frames_[k + 1];
  Frame f;
  f.T = normalized(frames_[k].T * (1.0 - t) + frames_[k + 1].T * t);
  const Vec3 n = frames_[k].N * (1.0 - t) + frames_[k + 1].N * t;
  f.N = normalized(n - dot(n, f.T) * f.T);
  f.B = cross(f.T, f.N);
  return f;
}

Curve::Projection Curve::project(const Vec3& x) const {
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k + 1 < points_.size(); ++k) {
    const Vec3 d = points_[k + 1] - points_[k];
    const double t = std::clamp(dot(x - points_[k], d) / dot(d, d), 0.0, 1.0);
    const double dist = norm(x - (points_[k] + d * t));
    if (dist < best.distance) {
      best.distance = dist;
      best.s = arc_[k] + t * (arc_[k + 1] - arc_[k]);
    }
  }
  return best;
}

CenterlineGraph::CenterlineGraph(std::vector<Curve> curves, std::vector<Junction> junctions,
                                 std::vector<EndpointRef> inlets, std::vector<EndpointRef> outlets)
    : curves_(std::move(curves)),
      junctions_(std::move(junctions)),
      inlets_(std::move(inlets)),
      outlets_(std::move(outlets)) {
  validate();
}

CenterlineGraph CenterlineGraph::single(Curve curve) {
  std::vector<Curve> curves;
  curves.push_back(std::move(curve));
  return CenterlineGraph(std::move(curves), {}, {{0, CurveEnd::Start}}, {{0, CurveEnd::End}});
}

void CenterlineGraph::validate() const {
  const std::size_t nc = curves_.size();
  std::vector<int> start_count(nc, 0);
  std::vector<int> end_count(nc, 0);
  auto bump = [&](int curve, CurveEnd end) {
    if (curve < 0 || static_cast<std::size_t>(curve) >= nc) {
      throw GeometryError("endpoint refers to unknown curve " + std::to_string(curve));
    }
    (end == CurveEnd::Start ? start_count : end_count)[static_cast<std::size_t>(curve)]++;
  };
  for (const auto& j : junctions_) {
    for (int c : j.incoming) {
      bump(c, CurveEnd::End);
      const Vec3 p = curves_[static_cast<std::size_t>(c)].points().back();
      if (norm(p - j.point) > 1e-9 * std::max(1.0, norm(j.point))) {
        throw GeometryError("curve " + std::to_string(c) + " does not end at its junction");
      }
    }
    for (int c : j.outgoing) {
      bump(c, CurveEnd::Start);
      const Vec3 p = curves_[static_cast<std::size_t>(c)].points().front();
      if (norm(p - j.point) > 1e-9 * std::max(1.0, norm(j.point))) {
        throw GeometryError("curve " + std::to_string(c) + " does not start at its junction");
      }
    }
  }
  for (const auto& e : inlets_) bump(e.curve, e.end);
  for (const auto& e : outlets_) bump(e.curve, e.end);
  for (std::size_t c = 0; c < nc; ++c) {
    if (start_count[c] != 1 || end_count[c] != 1) {
      throw GeometryError("curve " + std::to_string(c) +
                          " endpoints must each be exactly one of junction member, inlet, outlet");
    }
  }
}

RadiusProfile::RadiusProfile(Fn value, Fn ds, Fn dt, bool time_dependent)
    : value_(std::move(value)), ds_(std::move(ds)), dt_(std::move(dt)), time_dependent_(time_dependent) {}

RadiusProfile RadiusProfile::constant(double r) {
  return RadiusProfile([r](double, double) { return r; }, [](double, double) { return 0.0; },
                       [](double, double) { return 0.0; }, false);
}

RadiusProfile RadiusProfile::linear(double r0, double rL, double L) {
  const double slope = (rL - r0) / L;
  return RadiusProfile([r0, slope](double s, double) { return r0 + slope * s; },
                       [slope](double, double) { return slope; }, [](double, double) { return 0.0; },
                       false);
}

RadiusProfile RadiusProfile::sinusoidal_pulsation(double r, double amplitude, double frequency) {
  const double w = 2.0 * kPi * frequency;
  return RadiusProfile(
      [=](double, double t) { return r * (1.0 + amplitude * std::sin(w * t)); },
      [](double, double) { return 0.0; },
      [=](double, double t) { return r * amplitude * w * std::cos(w * t); }, true);
}

double RadiusProfile::ds(double s, double t) const {
  if (ds_) return ds_(s, t);
  const double h = 1e-6 * std::max(1.0, std::abs(s));
  return (value_(s + h, t) - value_(s - h, t)) / (2.0 * h);
}

double RadiusProfile::dt(double s, double t) const {
  if (dt_) return dt_(s, t);
  const double h = 1e-6 * std::max(1.0, std::abs(t));
  return (value_(s, t + h) - value_(s, t - h)) / (2.0 * h);
}

ShapeProfile ShapeProfile::uniform() {
  return ShapeProfile("uniform", [](double, double, double) { return 1.0; });
}

ShapeProfile ShapeProfile::poiseuille() {
  return ShapeProfile("poiseuille",
                      [](double r, double, double R2) { return 2.0 * (1.0 - (r * r) / (R2 * R2)); });
}

ShapeProfile ShapeProfile::constant(double value) {
  return ShapeProfile("constant", [value](double, double, double) { return value; });
}

VesselGeometry::VesselGeometry(RadiusProfile inner, RadiusProfile outer, double length, ShapeProfile shape)
    : inner_(std::move(inner)), outer_(std::move(outer)), length_(length), shape_(std::move(shape)) {
  if (!(length_ > 0.0)) {
    throw GeometryError("vessel length must be positive");
  }
}

VesselGeometry VesselGeometry::cylinder(double radius, double length) {
  return VesselGeometry(RadiusProfile::constant(0.0), RadiusProfile::constant(radius), length);
}

VesselGeometry VesselGeometry::annulus(double r1, double r2, double length) {
  return VesselGeometry(RadiusProfile::constant(r1), RadiusProfile::constant(r2), length);
}

void VesselGeometry::check_range(double s) const {
  const double tol = 1e-9 * std::max(1.0, length_);
  if (s < -tol || s > length_ + tol) {
    throw GeometryError("arc length " + std::to_string(s) + " outside [0, " + std::to_string(length_) + "]");
  }
}

SectionMetrics VesselGeometry::metrics(double s, double t) const {
  check_range(s);
  const double r1 = R1(s, t);
  const double r2 = R2(s, t);
  if (!(r2 > r1) || r1 < 0.0) {
    throw GeometryError("invalid annulus: R1=" + std::to_string(r1) + " R2=" + std::to_string(r2));
  }
  SectionMetrics m;
  m.area = kPi * (r2 * r2 - r1 * r1);
  m.perimeter = 2.0 * kPi * r2;
  m.diameter = 2.0 * r2;
  m.dA_dt = 2.0 * kPi * (r2 * outer_.dt(s, t) - r1 * inner_.dt(s, t));
  m.dA_ds = 2.0 * kPi * (r2 * outer_.ds(s, t) - r1 * inner_.ds(s, t));
  return m;
}

double VesselGeometry::gs(double s, double t) const {
  check_range(s);
  const double r1 = R1(s, t);
  const double r2 = R2(s, t);
  // sum_i -(gamma_i / 2) * 2 pi * d_s(R_i^2) (1 - w_c(R_i)), gamma_1 = 1, gamma_2 = -1
  const double d_r1sq = 2.0 * r1 * inner_.ds(s, t);
  const double d_r2sq = 2.0 * r2 * outer_.ds(s, t);
  const double term1 = r1 > 0.0 ? -kPi * d_r1sq * (1.0 - shape_(r1, r1, r2)) : 0.0;
  const double term2 = kPi * d_r2sq * (1.0 - shape_(r2, r1, r2));
  return term1 + term2;
}

double VesselGeometry::shape_perimeter_average(double s, double t) const {
  return shape_(R2(s, t), R1(s, t), R2(s, t));
}

ShapeProfileCheck check_shape_profile(const ShapeProfile& w, double R1, double R2) {
  if (!(R2 > R1) || R1 < 0.0) {
    throw GeometryError("invalid annulus");
  }
  auto integrand = [&](double r) { return w(r, R1, R2) * 2.0 * kPi * r; };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, R1, R2, 15, 1e-14);
  ShapeProfileCheck out;
  out.mean = integral / (kPi * (R2 * R2 - R1 * R1));
  out.pass = std::abs(out.mean - 1.0) <= 1e-8;
  return out;
}

namespace {

RadiusProfile parse_radius(const nlohmann::json& spec, const std::string& which, double length) {
  const std::string profile = spec.at("profile").get<std::string>();
  if (spec.contains("theta") || spec.contains("angular")) {
    throw GeometryError("angle-dependent radii are not supported");
  }
  if (profile == "constant") {
    return RadiusProfile::constant(spec.value(which, 0.0));
  }
  if (profile == "linear") {
    return RadiusProfile::linear(spec.value(which + "_start", 0.0), spec.value(which + "_end", 0.0), length);
  }
  if (profile == "sinusoidal-pulsation") {
    return RadiusProfile::sinusoidal_pulsation(spec.value(which, 0.0), spec.value("amplitude", 0.0),
                                               spec.value("frequency", 1.0));
  }
  throw GeometryError("unknown radius profile '" + profile + "'");
}

EndpointRef parse_endpoint(const nlohmann::json& j) {
  EndpointRef e;
  e.curve = j.at("curve").get<int>();
  const std::string end = j.at("end").get<std::string>();
  if (end == "start") {
    e.end = CurveEnd::Start;
  } else if (end == "end") {
    e.end = CurveEnd::End;
  } else {
    throw GeometryError("endpoint must be 'start' or 'end', got '" + end + "'");
  }
  return e;
}

}  // namespace

VesselNetwork load_network_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("network JSON: ") + e.what());
  }
  try {
    std::vector<Curve> curves;
    std::vector<VesselGeometry> geometry;
    for (const auto& c : doc.at("curves")) {
      std::vector<Vec3> pts;
      for (const auto& p : c.at("points")) {
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
      }
      Curve curve(std::move(pts));
      const double L = curve.length();
      const auto& radius = c.at("radius");
      ShapeProfile shape = ShapeProfile::uniform();
      const std::string shape_name = c.value("shape", std::string("uniform"));
      if (shape_name == "poiseuille") {
        shape = ShapeProfile::poiseuille();
      } else if (shape_name != "uniform") {
        throw GeometryError("unknown shape profile '" + shape_name + "'");
      }
      geometry.emplace_back(parse_radius(radius, "R1", L), parse_radius(radius, "R2", L), L, shape);
      curves.push_back(std::move(curve));
    }

    std::vector<Junction> junctions;
    if (doc.contains("junctions")) {
      for (const auto& j : doc.at("junctions")) {
        Junction junction;
        bool first = true;
        for (const auto& m : j.at("members")) {
          const EndpointRef e = parse_endpoint(m);
          if (e.curve < 0 || static_cast<std::size_t>(e.curve) >= curves.size()) {
            throw GeometryError("junction refers to unknown curve " + std::to_string(e.curve));
          }
          const auto& pts = curves[static_cast<std::size_t>(e.curve)].points();
          if (first) {
            junction.point = e.end == CurveEnd::Start ? pts.front() : pts.back();
            first = false;
          }
          (e.end == CurveEnd::End ? junction.incoming : junction.outgoing).push_back(e.curve);
        }
        junctions.push_back(std::move(junction));
      }
    }
    std::vector<EndpointRef> inlets;
    std::vector<EndpointRef> outlets;
    if (doc.contains("inlets")) {
      for (const auto& e : doc.at("inlets")) inlets.push_back(parse_endpoint(e));
    }
    if (doc.contains("outlets")) {
      for (const auto& e : doc.at("outlets")) outlets.push_back(parse_endpoint(e));
    }
    return VesselNetwork{CenterlineGraph(std::move(curves), std::move(junctions), std::move(inlets),
                                         std::move(outlets)),
                         std::move(geometry)};
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("network JSON: ") + e.what());
  }
}

VesselNetwork load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw GeometryError("cannot open network file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_network_json(ss.str());
}

}  // namespace vasotrans
