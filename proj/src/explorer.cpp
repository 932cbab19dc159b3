#include "mrnav/explorer.hpp"

#include <algorithm>
#include <stdexcept>

namespace mrnav::explorer {

// ---------------------------------------------------------------------------
// Tangent detection
// ---------------------------------------------------------------------------

std::vector<TangentSegment> detect_tangents_from_scan(const Scan& scan,
                                                      double d0,
                                                      double filter_slack) {
  std::vector<TangentSegment> out;
  size_t n = scan.ranges.size();
  if (n < 2) return out;
  double res = n >= 2 ? scan.angles[1] - scan.angles[0] : 0.0;
  bool cyclic =
      std::abs((scan.angles.back() + res) - (scan.angles.front() + 2.0 * M_PI)) <
      1e-6;

  // Cartesian scan points (robot frame) for the corridor filter.
  std::vector<Vec2> pts(n);
  for (size_t i = 0; i < n; i++)
    pts[i] = Vec2{std::cos(scan.angles[i]), std::sin(scan.angles[i])} *
             scan.ranges[i];

  size_t pairs = cyclic ? n : n - 1;
  for (size_t i = 0; i < pairs; i++) {
    size_t j = (i + 1) % n;
    if (scan.max_range[i] || scan.max_range[j]) continue;
    double jump = scan.ranges[j] - scan.ranges[i];
    if (std::abs(jump) <= 2.0 * d0) continue;
    size_t near = jump > 0.0 ? i : j;
    // The hypotenuse rotates toward the gap: to bigger polar angles when the
    // near ray is the lower-index one.
    int side = near == i ? +1 : -1;
    double rho = scan.ranges[near];
    double ang = scan.angles[near] + side * std::atan2(d0, rho);
    double len = std::hypot(rho, d0);
    TangentSegment seg;
    seg.start = {0.0, 0.0};
    seg.end = Vec2{std::cos(ang), std::sin(ang)} * len;
    seg.polar_angle = geom::normalize_angle(ang);
    // Generating boundary sits opposite the rotation side.
    seg.side = -side;

    bool blocked = false;
    for (size_t w = 0; w < n && !blocked; w++) {
      if (w == i || w == j) continue;
      if (scan.max_range[w]) continue;
      if (geom::dist_point_segment(pts[w], seg.start, seg.end) <
          d0 - filter_slack)
        blocked = true;
    }
    if (!blocked) out.push_back(seg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Switching control law
// ---------------------------------------------------------------------------

double explorer_control(const UnicycleState& pose, const Scan& scan,
                        ExplorerState& state, const ExplorerConfig& cfg,
                        double now, Rng& rng) {
  double d_min = scan.range_limit;
  size_t d_min_idx = 0;
  for (size_t i = 0; i < scan.ranges.size(); i++)
    if (!scan.max_range[i] && scan.ranges[i] < d_min) {
      d_min = scan.ranges[i];
      d_min_idx = i;
    }
  double d_dot = state.has_prev ? (d_min - state.prev_d_min) / cfg.delta : 0.0;
  state.prev_d_min = d_min;
  state.has_prev = true;

  auto tangents = detect_tangents_from_scan(scan, cfg.d0, cfg.slack());
  const TangentSegment* coinciding = nullptr;
  for (const auto& t : tangents)
    if (std::abs(t.polar_angle) < cfg.theta_trig) {
      coinciding = &t;
      break;
    }

  auto engage_pursuit = [&](const TangentSegment& t) {
    state.mode = Mode::R2;
    state.target = pose.position() + t.end.rotated(pose.theta);
  };

  switch (state.mode) {
    case Mode::R1:
      if (coinciding) engage_pursuit(*coinciding);
      break;
    case Mode::R2:
      if (dist(pose.position(), state.target) < cfg.d_trig) {
        state.mode = Mode::R3;
        // Boundary side at the transition instant: sign of the cross product
        // between the travel direction and the bearing of the closest return.
        double wa = pose.theta + scan.angles[d_min_idx];
        Vec2 to_obst{std::cos(wa), std::sin(wa)};
        double cr = pose.heading().cross(to_obst);
        state.gamma = cr >= 0.0 ? +1 : -1;
      }
      break;
    case Mode::R3:
      if (coinciding && now >= state.pause_until) {
        if (rng.uniform01() < cfg.q0) {
          engage_pursuit(*coinciding);
        } else {
          state.pause_until = now + cfg.pause_s();
        }
      }
      break;
  }

  switch (state.mode) {
    case Mode::R1:
      return state.circle_dir * cfg.u_max;
    case Mode::R2: {
      Vec2 to_t = state.target - pose.position();
      double phi = geom::normalize_angle(std::atan2(to_t.y, to_t.x) - pose.theta);
      return tracking::sgn(phi) * cfg.u_max;
    }
    case Mode::R3:
    default: {
      double lambda = cfg.u_max / std::max(cfg.d0, 1e-6);
      double sw = d_dot + tracking::saturation_x(d_min - cfg.d0, lambda, cfg.d0);
      return state.gamma * tracking::sgn(sw) * cfg.u_max;
    }
  }
}

// ---------------------------------------------------------------------------
// Closed-loop runs
// ---------------------------------------------------------------------------

namespace {

struct RunSetup {
  sensing::SensorNode2D node;
  OccGrid2D grid;
  vehicle::UnicycleParams params;
};

RunSetup make_setup(const World2& world, const ExplorerConfig& cfg) {
  RunSetup s;
  s.node.range = cfg.scan_range;
  s.node.fov = 2.0 * M_PI;
  s.node.angular_resolution = 2.0 * M_PI / cfg.scan_rays;
  Vec2 span = world.bounds.hi - world.bounds.lo;
  int nx = int(std::ceil(span.x / cfg.cell_size)) + 2;
  int ny = int(std::ceil(span.y / cfg.cell_size)) + 2;
  s.grid = OccGrid2D(world.bounds.lo - Vec2{cfg.cell_size, cfg.cell_size},
                     cfg.cell_size, nx, ny);
  s.params = {cfg.v, cfg.u_max};
  return s;
}

}  // namespace

namespace {

ExplorationResult run_impl(const World2& ground, const World3* world3,
                           const ExplorerConfig& cfg, const UnicycleState& start) {
  RunSetup setup = make_setup(ground, cfg);
  ExplorationResult out;
  out.grid = std::move(setup.grid);

  double sensor_z = 0.0;
  if (world3) {
    double vz = cfg.voxel_size;
    sensor_z = cfg.sensor_z >= 0.0 ? cfg.sensor_z : 0.5 * vz;
    Vec2 span{world3->hi.x - world3->lo.x, world3->hi.y - world3->lo.y};
    int nx = int(std::ceil(span.x / vz));
    int ny = int(std::ceil(span.y / vz));
    int nz = int(std::ceil((world3->hi.z - world3->lo.z) / vz));
    out.voxels = VoxelMap3D(world3->lo, vz, nx, ny, nz);
  }

  Rng rng(cfg.seed);
  UnicycleState pose = start;
  UnicycleState est = start;  // odometry estimate used for map building
  ExplorerState state;
  state.circle_dir = (cfg.seed % 2 == 0) ? +1 : -1;

  Rng noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  bool use_noise = cfg.noise_sigma > 0.0;

  double t = 0.0;
  for (int step = 0; step < cfg.step_cap; step++) {
    sensing::SensorNode2D node = setup.node;
    node.pose = {pose.position(), pose.theta};
    Scan scan = sensing::raycast_scan(ground, node, t,
                                      use_noise ? &noise_rng : nullptr,
                                      cfg.noise_sigma);
    sensing::Pose2 est_pose{est.position(), est.theta};
    sensing::grid_update_from_scan(out.grid, est_pose, scan);
    if (world3) {
      sensing::VerticalScan vs = sensing::raycast_vertical(
          *world3, est_pose, sensor_z, t, cfg.vertical_rays, cfg.scan_range);
      sensing::voxel_update_vertical_scan(out.voxels, est_pose, sensor_z, vs);
    }

    double clear = ground.clearance(pose.position(), t);
    out.min_clearance = std::min(out.min_clearance, clear);
    out.trajectory.push_back(
        {t, pose.x, pose.y, pose.theta, int(state.mode), clear});

    bool done = world3 ? map_complete(out.voxels) : map_complete(out.grid);
    if (done) {
      out.completed = true;
      out.t_f = t;
      out.steps = step;
      break;
    }

    double u = explorer_control(pose, scan, state, cfg, t, rng);
    pose = vehicle::step_unicycle(pose, setup.params, u, cfg.delta);
    if (cfg.improved_odometry) {
      double a_lat = cfg.v * u;  // centripetal acceleration measured laterally
      double vn = cfg.v, un = u, an = a_lat;
      if (cfg.odometry_noise > 0.0) {
        vn += noise_rng.gaussian(0.0, cfg.odometry_noise);
        un += noise_rng.gaussian(0.0, cfg.odometry_noise);
        an += noise_rng.gaussian(0.0, cfg.odometry_noise);
      }
      est = improved_odometry_step(est, vn, un, an, cfg.delta).pose;
    } else {
      est = pose;
    }
    t += cfg.delta;
    out.steps = step + 1;
  }
  out.transition_violations = out.grid.transition_violations() +
                              (world3 ? out.voxels.transition_violations() : 0);
  out.final_pose = pose;
  return out;
}

}  // namespace

ExplorationResult run_exploration(const World2& world, const ExplorerConfig& cfg,
                                  const UnicycleState& start) {
  return run_impl(world, nullptr, cfg, start);
}

ExplorationResult run_exploration_3d(const World2& ground, const World3& world,
                                     const ExplorerConfig& cfg,
                                     const UnicycleState& start) {
  return run_impl(ground, &world, cfg, start);
}

// ---------------------------------------------------------------------------
// Improved odometry
// ---------------------------------------------------------------------------

OdometryStep improved_odometry_step(const UnicycleState& prev, double v_hat,
                                    double u_hat, double a_hat, double T,
                                    int panels) {
  if (T <= 0.0) throw std::invalid_argument("improved_odometry_step: T <= 0");
  OdometryStep out;
  out.pose = prev;
  if (std::abs(a_hat * T) >= std::abs(v_hat)) {
    out.fallback = true;
    out.pose.x += v_hat * T * std::cos(prev.theta);
    out.pose.y += v_hat * T * std::sin(prev.theta);
    out.pose.theta = geom::normalize_angle(prev.theta + u_hat * T);
    return out;
  }
  // Simpson quadrature of integral_0^T sqrt(v^2 - (a t)^2) dt.
  if (panels % 2 == 1) panels++;
  double h = T / panels;
  auto f = [&](double tt) {
    double s = v_hat * v_hat - (a_hat * tt) * (a_hat * tt);
    return std::sqrt(std::max(s, 0.0));
  };
  double q = f(0.0) + f(T);
  for (int i = 1; i < panels; i++) q += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  q *= h / 3.0;

  double lat = 0.5 * a_hat * T * T;
  out.pose.x += q * std::cos(prev.theta) + lat * std::cos(prev.theta + M_PI / 2.0);
  out.pose.y += q * std::sin(prev.theta) + lat * std::sin(prev.theta + M_PI / 2.0);
  out.pose.theta = geom::normalize_angle(prev.theta + u_hat * T);
  return out;
}

}  // namespace mrnav::explorer
