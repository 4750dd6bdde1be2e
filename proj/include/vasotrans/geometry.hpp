#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vasotrans/vec3.hpp"

namespace vasotrans {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Orthonormal right-handed triple attached to a centerline sample.
struct Frame {
  Vec3 T;
  Vec3 N;
  Vec3 B;
};

/// Per-vertex frames of a polyline. Curved stretches use the Frenet normal
/// (direction to the center of the circle through three consecutive
/// vertices); straight stretches carry the previous frame forward by
/// rotation-minimizing transport.
std::vector<Frame> frenet_frames(std::span<const Vec3> points);

/// Arc-length parametrized polyline with precomputed frames.
class Curve {
 public:
  explicit Curve(std::vector<Vec3> points);

  static Curve straight(const Vec3& a, const Vec3& b, int n_segments = 1);

  double length() const { return arc_.back(); }
  std::span<const Vec3> points() const { return points_; }
  std::span<const double> arc_lengths() const { return arc_; }
  std::span<const Frame> frames() const { return frames_; }

  Vec3 point_at(double s) const;
  Frame frame_at(double s) const;

  struct Projection {
    double s = 0.0;
    double distance = 0.0;
  };
  /// Closest point on the polyline.
  Projection project(const Vec3& x) const;

 private:
  std::size_t segment_of(double s) const;

  std::vector<Vec3> points_;
  std::vector<double> arc_;
  std::vector<Frame> frames_;
};

enum class CurveEnd { Start, End };

struct EndpointRef {
  int curve = 0;
  CurveEnd end = CurveEnd::Start;
  friend bool operator==(const EndpointRef&, const EndpointRef&) = default;
};

/// A bifurcation point y with its incoming curves I_j (curves ending at y)
/// and outgoing curves O_j (curves starting at y).
struct Junction {
  Vec3 point;
  std::vector<int> incoming;
  std::vector<int> outgoing;
};

class CenterlineGraph {
 public:
  CenterlineGraph() = default;
  CenterlineGraph(std::vector<Curve> curves, std::vector<Junction> junctions,
                  std::vector<EndpointRef> inlets, std::vector<EndpointRef> outlets);

  /// Single open curve: start is an inlet, end is an outlet.
  static CenterlineGraph single(Curve curve);

  const std::vector<Curve>& curves() const { return curves_; }
  const std::vector<Junction>& junctions() const { return junctions_; }
  const std::vector<EndpointRef>& inlets() const { return inlets_; }
  const std::vector<EndpointRef>& outlets() const { return outlets_; }

  /// Throws GeometryError unless every curve endpoint is exactly one of
  /// junction member, inlet or outlet, and junction members touch their point.
  void validate() const;

 private:
  std::vector<Curve> curves_;
  std::vector<Junction> junctions_;
  std::vector<EndpointRef> inlets_;
  std::vector<EndpointRef> outlets_;
};

/// Radius R(s, t) of a vessel wall, independent of the angle.
class RadiusProfile {
 public:
  using Fn = std::function<double(double s, double t)>;

  RadiusProfile() : RadiusProfile(constant(0.0)) {}
  RadiusProfile(Fn value, Fn ds = nullptr, Fn dt = nullptr, bool time_dependent = true);

  static RadiusProfile constant(double r);
  /// Linear in s from r0 at s=0 to rL at s=L.
  static RadiusProfile linear(double r0, double rL, double L);
  /// r (1 + amplitude sin(2 pi frequency t)).
  static RadiusProfile sinusoidal_pulsation(double r, double amplitude, double frequency);

  double operator()(double s, double t) const { return value_(s, t); }
  double ds(double s, double t) const;
  double dt(double s, double t) const;
  bool time_dependent() const { return time_dependent_; }
  bool has_analytic_derivatives() const { return ds_ && dt_; }

 private:
  Fn value_;
  Fn ds_;
  Fn dt_;
  bool time_dependent_ = true;
};

/// Radial concentration profile w_c(r) on the section [R1, R2].
class ShapeProfile {
 public:
  using Fn = std::function<double(double r, double R1, double R2)>;

  ShapeProfile() : ShapeProfile(uniform()) {}
  ShapeProfile(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  static ShapeProfile uniform();
  /// 2 (1 - r^2 / R^2) on a disk of radius R (R1 = 0).
  static ShapeProfile poiseuille();
  static ShapeProfile constant(double value);

  double operator()(double r, double R1, double R2) const { return fn_(r, R1, R2); }
  const std::string& name() const { return name_; }
  bool is_uniform() const { return name_ == "uniform"; }

 private:
  std::string name_;
  Fn fn_;
};

struct SectionMetrics {
  double area = 0.0;       // A
  double perimeter = 0.0;  // P of the outer circle
  double diameter = 0.0;   // epsilon
  double dA_dt = 0.0;
  double dA_ds = 0.0;
};

/// Cross-section description of one vessel segment along a curve of length L.
class VesselGeometry {
 public:
  VesselGeometry() = default;
  VesselGeometry(RadiusProfile inner, RadiusProfile outer, double length,
                 ShapeProfile shape = ShapeProfile::uniform());

  static VesselGeometry cylinder(double radius, double length);
  static VesselGeometry annulus(double r1, double r2, double length);

  double R1(double s, double t) const { return inner_(s, t); }
  double R2(double s, double t) const { return outer_(s, t); }
  const RadiusProfile& inner() const { return inner_; }
  const RadiusProfile& outer() const { return outer_; }
  const ShapeProfile& shape() const { return shape_; }
  double length() const { return length_; }
  bool time_dependent() const { return inner_.time_dependent() || outer_.time_dependent(); }

  SectionMetrics metrics(double s, double t) const;
  /// Drift coefficient g_s entering the reduced diffusion flux.
  double gs(double s, double t) const;
  /// Perimeter average of w_c over the outer circle.
  double shape_perimeter_average(double s, double t) const;

 private:
  void check_range(double s) const;

  RadiusProfile inner_;
  RadiusProfile outer_;
  double length_ = 0.0;
  ShapeProfile shape_;
};

struct ShapeProfileCheck {
  double mean = 0.0;
  bool pass = false;
};

/// Cross-section mean of w_c over the disk/annulus [R1, R2], pass iff it is 1 within 1e-8.
ShapeProfileCheck check_shape_profile(const ShapeProfile& w, double R1, double R2);

/// Network of vessels: centerlines plus one section description per curve.
struct VesselNetwork {
  CenterlineGraph graph;
  std::vector<VesselGeometry> geometry;
};

/// Parses the JSON network document (see README for the schema).
VesselNetwork load_network_json(const std::string& text);
VesselNetwork load_network_file(const std::string& path);

}  // namespace vasotrans
