#pragma once

#include <string>
#include <vector>

#include "mrnav/geom.hpp"
#include "mrnav/rng.hpp"

namespace mrnav::sensing {

using geom::Cell;
using geom::PolyObstacle;
using geom::RegionGrid2;
using geom::RegionGrid3;
using geom::Vec2;
using geom::Vec3;

struct Pose2 {
  Vec2 pos;
  double heading = 0.0;
};

// ---------------------------------------------------------------------------
// Ground-truth worlds used by the simulated sensors and by audits.
// ---------------------------------------------------------------------------

struct World2 {
  geom::WorldBounds2 bounds;
  std::vector<PolyObstacle> obstacles;

  std::vector<PolyObstacle> obstacles_at(double t) const;
  // Distance to the nearest obstacle boundary or area boundary at time t.
  double clearance(const Vec2& p, double t) const;
  // First hit along origin + r*dir against obstacles and the area boundary.
  double raycast(const Vec2& origin, const Vec2& dir, double t,
                 double max_range, bool* hit) const;
};

struct Box3 {
  Vec3 lo, hi;
  Vec3 velocity;

  Box3 at(double t) const {
    return {lo + velocity * t, hi + velocity * t, velocity};
  }
};

struct World3 {
  Vec3 lo, hi;  // room bounds; the inner faces are walls/floor/ceiling
  std::vector<Box3> boxes;
  // Transient robot bodies: visible to the sensors but not part of the
  // obstacle clearance (inter-robot separation is audited separately).
  std::vector<Vec3> robot_centers;
  double robot_radius = 0.0;

  double clearance(const Vec3& p, double t) const;
  double raycast(const Vec3& origin, const Vec3& dir, double t,
                 double max_range, bool* hit) const;
};

// ---------------------------------------------------------------------------
// 2D range finders
// ---------------------------------------------------------------------------

struct SensorNode2D {
  Pose2 pose;
  double range = 0.0;               // R_s
  double fov = 2.0 * M_PI;
  double angular_resolution = M_PI / 360.0;

  int ray_count() const {
    return std::max(1, int(std::round(fov / angular_resolution)));
  }
  // Ray angle in the sensor frame, centered bins across the fov.
  double ray_angle(int i) const {
    return -fov / 2.0 + (i + 0.5) * angular_resolution;
  }
};

struct Scan {
  std::vector<double> angles;  // sensor frame
  std::vector<double> ranges;  // (0, R_s]
  std::vector<uint8_t> max_range;
  double range_limit = 0.0;
};

Scan raycast_scan(const World2& world, const SensorNode2D& node, double t,
                  Rng* noise_rng = nullptr, double noise_sigma = 0.0);

// Fused unoccupied area A(t): union of every node's observed-free sector,
// minus disks of radius r_r at the given robot positions. Cells never
// observed free stay Unknown.
struct FuseGridSpec {
  Vec2 origin;
  double cell_size = 0.1;
  int nx = 0, ny = 0;
};

RegionGrid2 fuse_unoccupied_area(const std::vector<SensorNode2D>& nodes,
                                 const std::vector<Scan>& scans,
                                 const std::vector<Vec2>& robot_positions,
                                 double r_r, const FuseGridSpec& spec);

struct ShrinkParams {
  double delta = 0.0;   // sampling interval, s
  double v_max = 0.0;   // obstacle/boundary speed bound, m/s
  int window = 1;       // T
  double d_s = 0.0;
  double r_r = 0.0;
};

inline double shrink_margin(int k, const ShrinkParams& p) {
  return std::min(k, p.window) * p.delta * p.v_max;
}

RegionGrid3 shrink_for_time(const RegionGrid3& area, int k, const ShrinkParams& p);
RegionGrid2 shrink_for_time(const RegionGrid2& area, int k, const ShrinkParams& p);

// ---------------------------------------------------------------------------
// Incremental three-state occupancy maps. Cells only move along
// unknown -> free -> occupied; the violation counter stays zero as long as
// every write goes through the transition rule.
// ---------------------------------------------------------------------------

class OccGrid2D {
 public:
  OccGrid2D() = default;
  OccGrid2D(Vec2 origin, double cell_size, int nx, int ny);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return cell_; }
  Vec2 origin() const { return origin_; }
  Cell at(int i, int j) const { return cells_[j * nx_ + i]; }
  bool cell_of(const Vec2& p, int& i, int& j) const;
  Vec2 cell_center(int i, int j) const {
    return {origin_.x + (i + 0.5) * cell_, origin_.y + (j + 0.5) * cell_};
  }

  void observe_free(int i, int j);
  void observe_occupied(int i, int j);

  int64_t transition_violations() const { return violations_; }
  int count(Cell c) const;
  const std::vector<Cell>& cells() const { return cells_; }

 private:
  Vec2 origin_;
  double cell_ = 1.0;
  int nx_ = 0, ny_ = 0;
  std::vector<Cell> cells_;
  int64_t violations_ = 0;
};

// Bresenham ray updates: traversed cells become free, hit endpoints occupied.
void grid_update_from_scan(OccGrid2D& grid, const Pose2& robot, const Scan& scan);

bool map_complete(const OccGrid2D& grid);

// Cells an integer Bresenham line visits, endpoints included (exposed for the
// traversal oracle tests).
std::vector<std::pair<int, int>> bresenham_cells(int x0, int y0, int x1, int y1);

class VoxelMap3D {
 public:
  VoxelMap3D() = default;
  VoxelMap3D(Vec3 origin, double cell_size, int nx, int ny, int nz);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double cell_size() const { return cell_; }
  Vec3 origin() const { return origin_; }
  Cell at(int i, int j, int k) const { return cells_[(k * ny_ + j) * nx_ + i]; }
  bool cell_of(const Vec3& p, int& i, int& j, int& k) const;
  Vec3 cell_center(int i, int j, int k) const {
    return {origin_.x + (i + 0.5) * cell_, origin_.y + (j + 0.5) * cell_,
            origin_.z + (k + 0.5) * cell_};
  }

  void observe_free(int i, int j, int k);
  void observe_occupied(int i, int j, int k);

  int64_t transition_violations() const { return violations_; }
  int count(Cell c) const;
  const std::vector<Cell>& cells() const { return cells_; }

 private:
  Vec3 origin_;
  double cell_ = 1.0;
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<Cell> cells_;
  int64_t violations_ = 0;
};

bool map_complete(const VoxelMap3D& map);

// Vertical half-plane scan (sensor S2): rays sweep from the right horizon
// over the zenith to the left horizon, in the plane orthogonal to the
// robot's heading.
struct VerticalScan {
  std::vector<double> angles;  // [0, pi]
  std::vector<double> ranges;
  std::vector<uint8_t> max_range;
  double range_limit = 0.0;
};

VerticalScan raycast_vertical(const World3& world, const Pose2& robot,
                              double sensor_z, double t, int rays,
                              double max_range);

void voxel_update_vertical_scan(VoxelMap3D& map, const Pose2& robot,
                                double sensor_z, const VerticalScan& scan);

// ---------------------------------------------------------------------------
// Depth cameras (3D sensor network)
// ---------------------------------------------------------------------------

struct DepthCamera3D {
  Vec3 pos;
  double yaw = 0.0;    // about +z
  double pitch = 0.0;  // positive looks down
  double fov_h = 2.356194490192345;  // 135 deg
  double fov_v = 2.356194490192345;
  int width = 128;
  int height = 128;
  double range = 9.0;  // working range

  Vec3 forward() const;
  Vec3 right() const;
  Vec3 up() const;
  // Unit direction of pixel (u, v); v grows upward.
  Vec3 pixel_dir(int u, int v) const;
};

struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> depth;  // radial distance; >= camera range means invalid
  float at(int u, int v) const { return depth[v * width + u]; }
};

DepthImage render_depth(const World3& world, const DepthCamera3D& cam, double t);

// Pinhole back-projection of valid pixels into the world frame.
std::vector<Vec3> depth_image_to_points(const DepthCamera3D& cam,
                                        const DepthImage& img);

struct FuseGridSpec3 {
  Vec3 origin;
  double cell_size = 0.1;
  int nx = 0, ny = 0, nz = 0;
};

// Union of observed-free frusta minus robot spheres. Returns that terminate
// on a robot sphere are filtered: the ray is truncated at the sphere, and the
// region behind stays unknown.
RegionGrid3 fuse_free_space_3d(const std::vector<DepthCamera3D>& cams,
                               const std::vector<DepthImage>& images,
                               const std::vector<Vec3>& robot_positions,
                               double r_r, const FuseGridSpec3& spec);

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

// PGM (P5): 0 = unknown, 128 = free, 255 = occupied.
bool write_pgm(const OccGrid2D& grid, const std::string& path);
bool write_pgm(const RegionGrid2& grid, const std::string& path);
// One `x y z state` line per known voxel (state: free|occupied).
bool write_voxel_list(const VoxelMap3D& map, const std::string& path);

}  // namespace mrnav::sensing
