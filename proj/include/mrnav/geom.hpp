#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mrnav::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2 operator-() const { return {-x, -y}; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  // 90 degree counter-clockwise rotation.
  Vec2 perp() const { return {-y, x}; }
  Vec2 rotated(double a) const {
    double c = std::cos(a), s = std::sin(a);
    return {c * x - s * y, s * x + c * y};
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double norm2() const { return x * x + y * y + z * z; }
  Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{0.0, 0.0, 0.0};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dist(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

using Point2 = Vec2;
using Point3 = Vec3;

inline double normalize_angle(double a) {
  // Pull into (-pi, pi].
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

struct Circle2 {
  Vec2 center;
  double radius = 0.0;
};

// Closed polygonal obstacle, optionally drifting at a constant velocity.
struct PolyObstacle {
  std::vector<Vec2> vertices;  // closed loop, >= 3 vertices, simple
  Vec2 velocity;               // m/s, zero for static obstacles

  PolyObstacle translated(const Vec2& d) const;
  Vec2 centroid() const;
  double area() const;  // signed (shoelace)
};

PolyObstacle make_regular_polygon(const Vec2& center, double radius, int n,
                                  const Vec2& velocity = {});

// ---------------------------------------------------------------------------
// Exact planar predicates used by raycasting, scenario validation and audits.
// ---------------------------------------------------------------------------

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b);
Vec2 closest_point_segment(const Vec2& p, const Vec2& a, const Vec2& b);
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

// 0 if p is inside the polygon, otherwise distance to the boundary.
double dist_point_polygon(const Vec2& p, const std::vector<Vec2>& poly);
// Distance from boundary regardless of inside/outside.
double dist_point_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly);
Vec2 closest_point_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly);

double dist_segment_polygon(const Vec2& a, const Vec2& b,
                            const std::vector<Vec2>& poly);

// First intersection of ray origin+t*dir (t>0) with segment [a,b]; returns t.
std::optional<double> ray_segment_intersect(const Vec2& origin, const Vec2& dir,
                                            const Vec2& a, const Vec2& b);
std::optional<double> segment_segment_intersect(const Vec2& p0, const Vec2& p1,
                                                const Vec2& q0, const Vec2& q1);

double polyline_length(const std::vector<Vec2>& pts, bool closed = false);

// Circumradius of the circle through three points; +inf when collinear.
double circumradius(const Vec2& a, const Vec2& b, const Vec2& c);
double circumradius(const Vec3& a, const Vec3& b, const Vec3& c);

// ---------------------------------------------------------------------------
// RegionGrid: uniform free/occupied/unknown grid with an exact Euclidean
// distance transform to the non-free set. Unknown cells count as non-free.
// ---------------------------------------------------------------------------

enum class Cell : uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

inline bool is_free(Cell c) { return c == Cell::Free; }

struct SetDistance {
  double dist = 0.0;        // meters to the nearest non-free cell center
  bool out_of_bounds = false;
  bool has_target = false;  // false when the non-free set is empty
  Vec2 nearest;             // nearest non-free cell center
};

class RegionGrid2 {
 public:
  RegionGrid2() = default;
  RegionGrid2(Vec2 origin, double cell_size, int nx, int ny,
              Cell fill = Cell::Free);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return cell_; }
  Vec2 origin() const { return origin_; }
  Vec2 max_corner() const { return origin_ + Vec2{nx_ * cell_, ny_ * cell_}; }

  Cell at(int i, int j) const { return cells_[idx(i, j)]; }
  void set(int i, int j, Cell c) { cells_[idx(i, j)] = c; dirty_ = true; }
  Cell at_point(const Vec2& p) const;  // Unknown if out of bounds

  bool in_bounds(const Vec2& p) const;
  bool cell_of(const Vec2& p, int& i, int& j) const;
  Vec2 cell_center(int i, int j) const {
    return {origin_.x + (i + 0.5) * cell_, origin_.y + (j + 0.5) * cell_};
  }

  void fill(Cell c);
  void rasterize_polygon(const std::vector<Vec2>& poly, Cell value);
  void rasterize_disk(const Vec2& center, double radius, Cell value);

  // Recompute the cached distance fields. Queries rebuild lazily.
  void rebuild_distance() const;

  // rho(non-free set, p); 0 with flag when p is out of bounds.
  SetDistance distance_to_set(const Vec2& p) const;
  // min(distance to non-free set, distance to the grid boundary).
  double clearance(const Vec2& p) const;
  // Bilinear interpolation of the distance field with its gradient;
  // equilibria driven by it stay smooth below the cell scale.
  double clearance_interp(const Vec2& p, Vec2* grad = nullptr) const;
  // Unit vector from p toward the nearest non-free cell center. When p lies
  // in a non-free cell, points toward the interior (away from free space).
  Vec2 direction_to_set(const Vec2& p) const;

  RegionGrid2 enlarge(double d) const;
  RegionGrid2 reduce(double d) const;
  bool segment_clear(const Vec2& a, const Vec2& b) const;

  int count(Cell c) const;
  double free_area() const;

  const std::vector<Cell>& cells() const { return cells_; }

 private:
  friend class GridContours;
  int idx(int i, int j) const { return j * nx_ + i; }
  void ensure_distance() const;
  double border_distance(const Vec2& p) const;

  Vec2 origin_;
  double cell_ = 1.0;
  int nx_ = 0, ny_ = 0;
  std::vector<Cell> cells_;

  mutable bool dirty_ = true;
  mutable std::vector<float> dist_nonfree_;   // meters, 0 on non-free cells
  mutable std::vector<int32_t> feat_nonfree_; // linear index of nearest non-free
  mutable std::vector<float> dist_free_;      // meters to nearest free cell
  mutable std::vector<int32_t> feat_free_;
};

struct SetDistance3 {
  double dist = 0.0;
  bool out_of_bounds = false;
  bool has_target = false;
  Vec3 nearest;
};

class RegionGrid3 {
 public:
  RegionGrid3() = default;
  RegionGrid3(Vec3 origin, double cell_size, int nx, int ny, int nz,
              Cell fill = Cell::Free);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double cell_size() const { return cell_; }
  Vec3 origin() const { return origin_; }
  Vec3 max_corner() const {
    return origin_ + Vec3{nx_ * cell_, ny_ * cell_, nz_ * cell_};
  }

  Cell at(int i, int j, int k) const { return cells_[idx(i, j, k)]; }
  void set(int i, int j, int k, Cell c) { cells_[idx(i, j, k)] = c; dirty_ = true; }
  Cell at_point(const Vec3& p) const;

  bool in_bounds(const Vec3& p) const;
  bool cell_of(const Vec3& p, int& i, int& j, int& k) const;
  Vec3 cell_center(int i, int j, int k) const {
    return {origin_.x + (i + 0.5) * cell_, origin_.y + (j + 0.5) * cell_,
            origin_.z + (k + 0.5) * cell_};
  }

  void fill(Cell c);
  void rasterize_box(const Vec3& lo, const Vec3& hi, Cell value);
  void rasterize_sphere(const Vec3& center, double radius, Cell value);

  void rebuild_distance() const;
  SetDistance3 distance_to_set(const Vec3& p) const;
  double clearance(const Vec3& p) const;
  Vec3 direction_to_set(const Vec3& p) const;

  RegionGrid3 enlarge(double d) const;
  RegionGrid3 reduce(double d) const;
  bool segment_clear(const Vec3& a, const Vec3& b) const;

  int count(Cell c) const;
  double free_volume() const;

  const std::vector<Cell>& cells() const { return cells_; }

 private:
  int idx(int i, int j, int k) const { return (k * ny_ + j) * nx_ + i; }
  void ensure_distance() const;
  double border_distance(const Vec3& p) const;

  Vec3 origin_;
  double cell_ = 1.0;
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<Cell> cells_;

  mutable bool dirty_ = true;
  mutable std::vector<float> dist_nonfree_;
  mutable std::vector<int32_t> feat_nonfree_;
  mutable std::vector<float> dist_free_;
  mutable std::vector<int32_t> feat_free_;
};

// Closed boundary loops of the free region, traced on cell-corner cracks with
// the free side kept on the left.
std::vector<std::vector<Vec2>> grid_contours(const RegionGrid2& grid);

// Light smoothing used before tangency classification on traced contours.
std::vector<Vec2> smooth_closed_polyline(const std::vector<Vec2>& pts, int passes);

// ---------------------------------------------------------------------------
// Scenario assumption checks (violations are data, not errors).
// ---------------------------------------------------------------------------

struct WorldBounds2 {
  Vec2 lo, hi;
};

enum class ViolationKind {
  EnlargementsOverlap,
  InitialCircleUnsafe,
  OffsetCurvatureTooHigh,
  ObstacleTooFast,
};

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ScenarioCheckInput {
  WorldBounds2 bounds;
  std::vector<PolyObstacle> obstacles;
  std::vector<Vec2> robot_positions;
  std::vector<double> robot_headings;
  double d_s = 0.0;
  double r_min = 0.0;
  double v_r = 0.0;
  double v_max = 0.0;       // bound obstacle/boundary speed must stay under
  bool beta_mode = false;   // tighten curvature bound by 1/(1+beta)
};

std::vector<Violation> validate_scenario(const ScenarioCheckInput& in);

}  // namespace mrnav::geom
