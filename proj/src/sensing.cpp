#include "mrnav/sensing.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace mrnav::sensing {

namespace {
constexpr double kInf = 1e20;
}

// ---------------------------------------------------------------------------
// World2
// ---------------------------------------------------------------------------

std::vector<PolyObstacle> World2::obstacles_at(double t) const {
  std::vector<PolyObstacle> out;
  out.reserve(obstacles.size());
  for (const auto& ob : obstacles) out.push_back(ob.translated(ob.velocity * t));
  return out;
}

double World2::clearance(const Vec2& p, double t) const {
  if (p.x < bounds.lo.x || p.x > bounds.hi.x || p.y < bounds.lo.y ||
      p.y > bounds.hi.y)
    return 0.0;
  double best = std::min({p.x - bounds.lo.x, bounds.hi.x - p.x,
                          p.y - bounds.lo.y, bounds.hi.y - p.y});
  for (const auto& ob : obstacles) {
    PolyObstacle moved = ob.translated(ob.velocity * t);
    best = std::min(best, geom::dist_point_polygon(p, moved.vertices));
  }
  return best;
}

double World2::raycast(const Vec2& origin, const Vec2& dir, double t,
                       double max_range, bool* hit) const {
  double best = kInf;
  const Vec2 corners[4] = {bounds.lo,
                           {bounds.hi.x, bounds.lo.y},
                           bounds.hi,
                           {bounds.lo.x, bounds.hi.y}};
  for (int e = 0; e < 4; e++) {
    auto r = geom::ray_segment_intersect(origin, dir, corners[e], corners[(e + 1) % 4]);
    if (r && *r < best) best = *r;
  }
  for (const auto& ob : obstacles) {
    PolyObstacle moved = ob.translated(ob.velocity * t);
    size_t n = moved.vertices.size();
    for (size_t e = 0; e < n; e++) {
      auto r = geom::ray_segment_intersect(origin, dir, moved.vertices[e],
                                           moved.vertices[(e + 1) % n]);
      if (r && *r < best) best = *r;
    }
  }
  if (best <= max_range) {
    if (hit) *hit = true;
    return best;
  }
  if (hit) *hit = false;
  return max_range;
}

// ---------------------------------------------------------------------------
// World3
// ---------------------------------------------------------------------------

double World3::clearance(const Vec3& p, double t) const {
  double best = std::min({p.x - lo.x, hi.x - p.x, p.y - lo.y, hi.y - p.y,
                          p.z - lo.z, hi.z - p.z});
  for (const auto& b : boxes) {
    Box3 m = b.at(t);
    double dx = std::max({m.lo.x - p.x, 0.0, p.x - m.hi.x});
    double dy = std::max({m.lo.y - p.y, 0.0, p.y - m.hi.y});
    double dz = std::max({m.lo.z - p.z, 0.0, p.z - m.hi.z});
    best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return std::max(best, 0.0);
}

namespace {

// Slab test; returns entry t when the ray hits the box with t > 0.
bool ray_aabb(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi,
              double& t_enter) {
  double t0 = 0.0, t1 = kInf;
  const double od[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double ll[3] = {lo.x, lo.y, lo.z};
  const double hh[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; a++) {
    if (std::abs(dd[a]) < 1e-15) {
      if (od[a] < ll[a] || od[a] > hh[a]) return false;
      continue;
    }
    double ta = (ll[a] - od[a]) / dd[a];
    double tb = (hh[a] - od[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return t_enter > 1e-12;
}

}  // namespace

double World3::raycast(const Vec3& origin, const Vec3& dir, double t,
                       double max_range, bool* hit) const {
  // Exit through the room shell counts as a wall/floor/ceiling hit.
  double best = kInf;
  const double od[3] = {origin.x, origin.y, origin.z};
  const double dd[3] = {dir.x, dir.y, dir.z};
  const double ll[3] = {lo.x, lo.y, lo.z};
  const double hh[3] = {hi.x, hi.y, hi.z};
  double exit_t = kInf;
  for (int a = 0; a < 3; a++) {
    if (std::abs(dd[a]) < 1e-15) continue;
    double te = dd[a] > 0 ? (hh[a] - od[a]) / dd[a] : (ll[a] - od[a]) / dd[a];
    exit_t = std::min(exit_t, te);
  }
  if (exit_t > 0.0) best = exit_t;
  for (const auto& b : boxes) {
    Box3 m = b.at(t);
    double te;
    if (ray_aabb(origin, dir, m.lo, m.hi, te) && te < best) best = te;
  }
  for (const auto& rc : robot_centers) {
    Vec3 oc = rc - origin;
    double mid = oc.dot(dir);
    if (mid <= 0.0) continue;
    double h2 = robot_radius * robot_radius - (oc - dir * mid).norm2();
    if (h2 < 0.0) continue;
    double te = mid - std::sqrt(h2);
    if (te > 1e-12 && te < best) best = te;
  }
  if (best <= max_range) {
    if (hit) *hit = true;
    return best;
  }
  if (hit) *hit = false;
  return max_range;
}

// ---------------------------------------------------------------------------
// 2D scanning and fusion
// ---------------------------------------------------------------------------

Scan raycast_scan(const World2& world, const SensorNode2D& node, double t,
                  Rng* noise_rng, double noise_sigma) {
  Scan out;
  out.range_limit = node.range;
  int n = node.ray_count();
  out.angles.reserve(n);
  out.ranges.reserve(n);
  out.max_range.reserve(n);
  for (int i = 0; i < n; i++) {
    double a = node.ray_angle(i);
    double wa = node.pose.heading + a;
    Vec2 dir{std::cos(wa), std::sin(wa)};
    bool hit = false;
    double r = world.raycast(node.pose.pos, dir, t, node.range, &hit);
    if (hit && noise_rng && noise_sigma > 0.0) {
      r += noise_rng->gaussian(0.0, noise_sigma);
      r = std::clamp(r, 1e-6, node.range);
    }
    out.angles.push_back(a);
    out.ranges.push_back(r);
    out.max_range.push_back(hit ? 0 : 1);
  }
  return out;
}

RegionGrid2 fuse_unoccupied_area(const std::vector<SensorNode2D>& nodes,
                                 const std::vector<Scan>& scans,
                                 const std::vector<Vec2>& robot_positions,
                                 double r_r, const FuseGridSpec& spec) {
  if (nodes.empty() || nodes.size() != scans.size())
    throw std::invalid_argument("fuse_unoccupied_area: need one scan per node");
  RegionGrid2 grid(spec.origin, spec.cell_size, spec.nx, spec.ny, Cell::Unknown);

  struct NodeView {
    const SensorNode2D* node;
    const Scan* scan;
    std::vector<double> effective;  // carve-up-to distance per ray
    double half_fov;
    bool full_circle;
  };
  std::vector<NodeView> views;
  for (size_t s = 0; s < nodes.size(); s++) {
    NodeView v;
    v.node = &nodes[s];
    v.scan = &scans[s];
    v.half_fov = nodes[s].fov / 2.0;
    v.full_circle = nodes[s].fov > 2.0 * M_PI - 1e-9;
    v.effective.resize(scans[s].ranges.size());
    for (size_t i = 0; i < scans[s].ranges.size(); i++)
      v.effective[i] = scans[s].max_range[i]
                           ? nodes[s].range
                           : scans[s].ranges[i] - 0.5 * spec.cell_size;
    views.push_back(std::move(v));
  }

  for (int j = 0; j < spec.ny; j++)
    for (int i = 0; i < spec.nx; i++) {
      Vec2 c = grid.cell_center(i, j);
      bool free = false;
      for (const auto& v : views) {
        Vec2 rel = c - v.node->pose.pos;
        double d = rel.norm();
        if (d > v.node->range) continue;
        if (d < 1e-9) {
          free = true;
          break;
        }
        double az = geom::normalize_angle(std::atan2(rel.y, rel.x) -
                                          v.node->pose.heading);
        if (!v.full_circle && std::abs(az) > v.half_fov) continue;
        int n = int(v.effective.size());
        double f = (az + v.half_fov) / v.node->angular_resolution - 0.5;
        int i0 = int(std::floor(f));
        int i1 = i0 + 1;
        if (v.full_circle) {
          i0 = (i0 % n + n) % n;
          i1 = (i1 % n + n) % n;
        } else {
          i0 = std::clamp(i0, 0, n - 1);
          i1 = std::clamp(i1, 0, n - 1);
        }
        if (d <= std::min(v.effective[i0], v.effective[i1])) {
          free = true;
          break;
        }
      }
      if (free) grid.set(i, j, Cell::Free);
    }

  // Observed obstacle boundary, for plots and exports.
  for (const auto& v : views) {
    for (size_t i = 0; i < v.scan->ranges.size(); i++) {
      if (v.scan->max_range[i]) continue;
      double wa = v.node->pose.heading + v.scan->angles[i];
      Vec2 end = v.node->pose.pos +
                 Vec2{std::cos(wa), std::sin(wa)} * v.scan->ranges[i];
      int ci, cj;
      if (grid.cell_of(end, ci, cj)) grid.set(ci, cj, Cell::Occupied);
    }
  }

  for (const auto& r : robot_positions) grid.rasterize_disk(r, r_r, Cell::Unknown);
  return grid;
}

RegionGrid2 shrink_for_time(const RegionGrid2& area, int k, const ShrinkParams& p) {
  if (k < 0) throw std::invalid_argument("shrink_for_time: k must be >= 0");
  double m = shrink_margin(k, p);
  return m > 0.0 ? area.reduce(m) : area;
}

RegionGrid3 shrink_for_time(const RegionGrid3& area, int k, const ShrinkParams& p) {
  if (k < 0) throw std::invalid_argument("shrink_for_time: k must be >= 0");
  double m = shrink_margin(k, p);
  return m > 0.0 ? area.reduce(m) : area;
}

// ---------------------------------------------------------------------------
// OccGrid2D
// ---------------------------------------------------------------------------

OccGrid2D::OccGrid2D(Vec2 origin, double cell_size, int nx, int ny)
    : origin_(origin), cell_(cell_size), nx_(nx), ny_(ny),
      cells_(size_t(nx) * ny, Cell::Unknown) {
  if (cell_size <= 0.0) throw std::invalid_argument("cell_size must be > 0");
}

bool OccGrid2D::cell_of(const Vec2& p, int& i, int& j) const {
  i = int(std::floor((p.x - origin_.x) / cell_));
  j = int(std::floor((p.y - origin_.y) / cell_));
  return i >= 0 && i < nx_ && j >= 0 && j < ny_;
}

void OccGrid2D::observe_free(int i, int j) {
  Cell& c = cells_[j * nx_ + i];
  if (c == Cell::Unknown) c = Cell::Free;
  // occupied never downgrades
}

void OccGrid2D::observe_occupied(int i, int j) {
  Cell& c = cells_[j * nx_ + i];
  if (c == Cell::Unknown || c == Cell::Free) c = Cell::Occupied;
}

int OccGrid2D::count(Cell c) const {
  return int(std::count(cells_.begin(), cells_.end(), c));
}

std::vector<std::pair<int, int>> bresenham_cells(int x0, int y0, int x1, int y1) {
  std::vector<std::pair<int, int>> out;
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  while (true) {
    out.push_back({x, y});
    if (x == x1 && y == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

void grid_update_from_scan(OccGrid2D& grid, const Pose2& robot, const Scan& scan) {
  int x0, y0;
  bool origin_in = grid.cell_of(robot.pos, x0, y0);
  for (size_t i = 0; i < scan.ranges.size(); i++) {
    double wa = robot.heading + scan.angles[i];
    Vec2 end = robot.pos + Vec2{std::cos(wa), std::sin(wa)} * scan.ranges[i];
    int x1 = int(std::floor((end.x - grid.origin().x) / grid.cell_size()));
    int y1 = int(std::floor((end.y - grid.origin().y) / grid.cell_size()));
    if (!origin_in) continue;
    auto cells = bresenham_cells(x0, y0, x1, y1);
    bool hit = !scan.max_range[i];
    for (size_t c = 0; c < cells.size(); c++) {
      auto [cx, cy] = cells[c];
      if (cx < 0 || cx >= grid.nx() || cy < 0 || cy >= grid.ny()) continue;
      if (hit && c + 1 == cells.size())
        grid.observe_occupied(cx, cy);
      else
        grid.observe_free(cx, cy);
    }
  }
}

bool map_complete(const OccGrid2D& grid) {
  for (int j = 0; j < grid.ny(); j++)
    for (int i = 0; i < grid.nx(); i++) {
      if (grid.at(i, j) != Cell::Free) continue;
      for (int dj = -1; dj <= 1; dj++)
        for (int di = -1; di <= 1; di++) {
          if (di == 0 && dj == 0) continue;
          int ni = i + di, nj = j + dj;
          if (ni < 0 || ni >= grid.nx() || nj < 0 || nj >= grid.ny()) continue;
          if (grid.at(ni, nj) == Cell::Unknown) return false;
        }
    }
  return true;
}

// ---------------------------------------------------------------------------
// VoxelMap3D
// ---------------------------------------------------------------------------

VoxelMap3D::VoxelMap3D(Vec3 origin, double cell_size, int nx, int ny, int nz)
    : origin_(origin), cell_(cell_size), nx_(nx), ny_(ny), nz_(nz),
      cells_(size_t(nx) * ny * nz, Cell::Unknown) {
  if (cell_size <= 0.0) throw std::invalid_argument("cell_size must be > 0");
}

bool VoxelMap3D::cell_of(const Vec3& p, int& i, int& j, int& k) const {
  i = int(std::floor((p.x - origin_.x) / cell_));
  j = int(std::floor((p.y - origin_.y) / cell_));
  k = int(std::floor((p.z - origin_.z) / cell_));
  return i >= 0 && i < nx_ && j >= 0 && j < ny_ && k >= 0 && k < nz_;
}

void VoxelMap3D::observe_free(int i, int j, int k) {
  Cell& c = cells_[(k * ny_ + j) * nx_ + i];
  if (c == Cell::Unknown) c = Cell::Free;
}

void VoxelMap3D::observe_occupied(int i, int j, int k) {
  Cell& c = cells_[(k * ny_ + j) * nx_ + i];
  if (c == Cell::Unknown || c == Cell::Free) c = Cell::Occupied;
}

int VoxelMap3D::count(Cell c) const {
  return int(std::count(cells_.begin(), cells_.end(), c));
}

bool map_complete(const VoxelMap3D& m) {
  for (int k = 0; k < m.nz(); k++)
    for (int j = 0; j < m.ny(); j++)
      for (int i = 0; i < m.nx(); i++) {
        if (m.at(i, j, k) != Cell::Free) continue;
        for (int dk = -1; dk <= 1; dk++)
          for (int dj = -1; dj <= 1; dj++)
            for (int di = -1; di <= 1; di++) {
              if (di == 0 && dj == 0 && dk == 0) continue;
              int ni = i + di, nj = j + dj, nk = k + dk;
              if (ni < 0 || ni >= m.nx() || nj < 0 || nj >= m.ny() || nk < 0 ||
                  nk >= m.nz())
                continue;
              if (m.at(ni, nj, nk) == Cell::Unknown) return false;
            }
      }
  return true;
}

VerticalScan raycast_vertical(const World3& world, const Pose2& robot,
                              double sensor_z, double t, int rays,
                              double max_range) {
  VerticalScan out;
  out.range_limit = max_range;
  Vec3 origin{robot.pos.x, robot.pos.y, sensor_z};
  Vec3 right{std::sin(robot.heading), -std::cos(robot.heading), 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  for (int i = 0; i < rays; i++) {
    double w = (i + 0.5) * M_PI / rays;
    Vec3 dir = right * std::cos(w) + up * std::sin(w);
    bool hit = false;
    double r = world.raycast(origin, dir, t, max_range, &hit);
    out.angles.push_back(w);
    out.ranges.push_back(r);
    out.max_range.push_back(hit ? 0 : 1);
  }
  return out;
}

namespace {

template <typename Visit>
void walk_cells_3d(const Vec3& origin, double cell, int nx, int ny, int nz,
                   const Vec3& a, const Vec3& b, Visit&& visit) {
  auto of = [&](const Vec3& p, int& i, int& j, int& k) {
    i = int(std::floor((p.x - origin.x) / cell));
    j = int(std::floor((p.y - origin.y) / cell));
    k = int(std::floor((p.z - origin.z) / cell));
  };
  int i, j, k, ie, je, ke;
  of(a, i, j, k);
  of(b, ie, je, ke);
  auto in = [&](int x, int y, int z) {
    return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
  };
  bool last = (i == ie && j == je && k == ke);
  if (in(i, j, k) && !visit(i, j, k, last)) return;
  if (last) return;
  Vec3 d = b - a;
  int sx = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  int sy = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  int sz = d.z > 0 ? 1 : (d.z < 0 ? -1 : 0);
  double tdx = sx ? cell / std::abs(d.x) : kInf;
  double tdy = sy ? cell / std::abs(d.y) : kInf;
  double tdz = sz ? cell / std::abs(d.z) : kInf;
  auto bdy = [&](double p, double o, int ic, int s, double dp) {
    if (!s) return kInf;
    return (((s > 0) ? ic + 1 : ic) * cell + o - p) / dp;
  };
  double tmx = bdy(a.x, origin.x, i, sx, d.x);
  double tmy = bdy(a.y, origin.y, j, sy, d.y);
  double tmz = bdy(a.z, origin.z, k, sz, d.z);
  int guard = 2 * (nx + ny + nz) + 8;
  while (guard-- > 0) {
    if (tmx <= tmy && tmx <= tmz) {
      i += sx;
      tmx += tdx;
    } else if (tmy <= tmz) {
      j += sy;
      tmy += tdy;
    } else {
      k += sz;
      tmz += tdz;
    }
    bool is_last = (i == ie && j == je && k == ke);
    if (in(i, j, k) && !visit(i, j, k, is_last)) return;
    if (is_last) return;
  }
}

}  // namespace

void voxel_update_vertical_scan(VoxelMap3D& map, const Pose2& robot,
                                double sensor_z, const VerticalScan& scan) {
  Vec3 origin{robot.pos.x, robot.pos.y, sensor_z};
  Vec3 right{std::sin(robot.heading), -std::cos(robot.heading), 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  for (size_t r = 0; r < scan.ranges.size(); r++) {
    Vec3 dir = right * std::cos(scan.angles[r]) + up * std::sin(scan.angles[r]);
    bool hit = !scan.max_range[r];
    // Room-shell hits land exactly on the map edge; pull them a hair inward
    // so the surface voxel stays in-grid.
    double reach = hit ? std::max(scan.ranges[r] - 1e-9, 0.0) : scan.ranges[r];
    Vec3 end = origin + dir * reach;
    walk_cells_3d(map.origin(), map.cell_size(), map.nx(), map.ny(), map.nz(),
                  origin, end, [&](int i, int j, int k, bool last) {
                    if (last && hit)
                      map.observe_occupied(i, j, k);
                    else
                      map.observe_free(i, j, k);
                    return true;
                  });
  }
}

// ---------------------------------------------------------------------------
// Depth cameras
// ---------------------------------------------------------------------------

Vec3 DepthCamera3D::forward() const {
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
          -std::sin(pitch)};
}

Vec3 DepthCamera3D::right() const { return {std::sin(yaw), -std::cos(yaw), 0.0}; }

Vec3 DepthCamera3D::up() const { return right().cross(forward()); }

Vec3 DepthCamera3D::pixel_dir(int u, int v) const {
  double tx = (2.0 * (u + 0.5) / width - 1.0) * std::tan(fov_h / 2.0);
  double ty = (2.0 * (v + 0.5) / height - 1.0) * std::tan(fov_v / 2.0);
  return (forward() + right() * tx + up() * ty).normalized();
}

DepthImage render_depth(const World3& world, const DepthCamera3D& cam, double t) {
  DepthImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.depth.resize(size_t(cam.width) * cam.height);
  for (int v = 0; v < cam.height; v++)
    for (int u = 0; u < cam.width; u++) {
      Vec3 dir = cam.pixel_dir(u, v);
      bool hit = false;
      double r = world.raycast(cam.pos, dir, t, cam.range, &hit);
      img.depth[v * cam.width + u] = float(hit ? r : cam.range);
    }
  return img;
}

std::vector<Vec3> depth_image_to_points(const DepthCamera3D& cam,
                                        const DepthImage& img) {
  if (img.width != cam.width || img.height != cam.height)
    throw std::invalid_argument("depth image does not match camera resolution");
  std::vector<Vec3> pts;
  for (int v = 0; v < img.height; v++)
    for (int u = 0; u < img.width; u++) {
      double d = img.at(u, v);
      if (d >= cam.range - 1e-9) continue;  // max-range pixels are invalid
      pts.push_back(cam.pos + cam.pixel_dir(u, v) * d);
    }
  return pts;
}

RegionGrid3 fuse_free_space_3d(const std::vector<DepthCamera3D>& cams,
                               const std::vector<DepthImage>& images,
                               const std::vector<Vec3>& robot_positions,
                               double r_r, const FuseGridSpec3& spec) {
  if (cams.empty() || cams.size() != images.size())
    throw std::invalid_argument("fuse_free_space_3d: need one image per camera");

  // Filter robot returns: truncate those rays at the sphere surface.
  std::vector<DepthImage> filtered = images;
  for (size_t c = 0; c < cams.size(); c++) {
    const auto& cam = cams[c];
    auto& img = filtered[c];
    for (int v = 0; v < img.height; v++)
      for (int u = 0; u < img.width; u++) {
        float& d = img.depth[v * img.width + u];
        if (d >= cam.range - 1e-9) continue;
        Vec3 dir = cam.pixel_dir(u, v);
        Vec3 p = cam.pos + dir * double(d);
        for (const auto& rp : robot_positions) {
          if (dist(p, rp) <= r_r + spec.cell_size) {
            Vec3 oc = rp - cam.pos;
            double mid = oc.dot(dir);
            double h2 = (r_r + spec.cell_size) * (r_r + spec.cell_size) -
                        (oc - dir * mid).norm2();
            double entry = h2 > 0.0 ? mid - std::sqrt(h2) : mid;
            d = float(std::max(entry, 0.0));
            break;
          }
        }
      }
  }

  RegionGrid3 grid(spec.origin, spec.cell_size, spec.nx, spec.ny, spec.nz,
                   Cell::Unknown);
  struct Frame {
    Vec3 fwd, right, up;
    double tan_h, tan_v;
  };
  std::vector<Frame> frames;
  for (const auto& cam : cams)
    frames.push_back({cam.forward(), cam.right(), cam.up(),
                      std::tan(cam.fov_h / 2.0), std::tan(cam.fov_v / 2.0)});

  double margin = 0.5 * spec.cell_size;
  for (int k = 0; k < spec.nz; k++)
    for (int j = 0; j < spec.ny; j++)
      for (int i = 0; i < spec.nx; i++) {
        Vec3 cc = grid.cell_center(i, j, k);
        bool free = false;
        for (size_t c = 0; c < cams.size() && !free; c++) {
          const auto& cam = cams[c];
          const auto& fr = frames[c];
          Vec3 rel = cc - cam.pos;
          double x = rel.dot(fr.fwd);
          if (x <= 1e-9) continue;
          double ty = rel.dot(fr.right) / x;
          double tz = rel.dot(fr.up) / x;
          if (std::abs(ty) > fr.tan_h || std::abs(tz) > fr.tan_v) continue;
          double radial = rel.norm();
          if (radial > cam.range - margin) continue;
          int u = std::clamp(int((ty / fr.tan_h + 1.0) * 0.5 * cam.width), 0,
                             cam.width - 1);
          int v = std::clamp(int((tz / fr.tan_v + 1.0) * 0.5 * cam.height), 0,
                             cam.height - 1);
          // Conservative: min depth over the 2x2 pixel neighborhood.
          double dmin = kInf;
          for (int dv = 0; dv <= 1; dv++)
            for (int du = 0; du <= 1; du++) {
              int uu = std::min(u + du, cam.width - 1);
              int vv = std::min(v + dv, cam.height - 1);
              dmin = std::min(dmin, double(filtered[c].at(uu, vv)));
            }
          if (radial <= dmin - margin) free = true;
        }
        if (free) grid.set(i, j, k, Cell::Free);
      }

  for (const auto& rp : robot_positions)
    grid.rasterize_sphere(rp, r_r, Cell::Unknown);
  return grid;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

namespace {

uint8_t shade(Cell c) {
  switch (c) {
    case Cell::Free: return 128;
    case Cell::Occupied: return 255;
    default: return 0;
  }
}

bool write_pgm_impl(int nx, int ny, const std::function<Cell(int, int)>& at,
                    const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) return false;
  std::fprintf(f, "P5\n%d %d\n255\n", nx, ny);
  std::vector<uint8_t> row(nx);
  for (int j = ny - 1; j >= 0; j--) {
    for (int i = 0; i < nx; i++) row[i] = shade(at(i, j));
    std::fwrite(row.data(), 1, row.size(), f);
  }
  std::fclose(f);
  return true;
}

}  // namespace

bool write_pgm(const OccGrid2D& grid, const std::string& path) {
  return write_pgm_impl(grid.nx(), grid.ny(),
                        [&](int i, int j) { return grid.at(i, j); }, path);
}

bool write_pgm(const RegionGrid2& grid, const std::string& path) {
  return write_pgm_impl(grid.nx(), grid.ny(),
                        [&](int i, int j) { return grid.at(i, j); }, path);
}

bool write_voxel_list(const VoxelMap3D& map, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) return false;
  for (int k = 0; k < map.nz(); k++)
    for (int j = 0; j < map.ny(); j++)
      for (int i = 0; i < map.nx(); i++) {
        Cell c = map.at(i, j, k);
        if (c == Cell::Unknown) continue;
        std::fprintf(f, "%d %d %d %s\n", i, j, k,
                     c == Cell::Free ? "free" : "occupied");
      }
  std::fclose(f);
  return true;
}

}  // namespace mrnav::sensing
