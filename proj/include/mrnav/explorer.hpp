#pragma once

#include <string>
#include <vector>

#include "mrnav/geom.hpp"
#include "mrnav/rng.hpp"
#include "mrnav/sensing.hpp"
#include "mrnav/tracking.hpp"
#include "mrnav/vehicle.hpp"

namespace mrnav::explorer {

using geom::Vec2;
using sensing::OccGrid2D;
using sensing::Scan;
using sensing::VoxelMap3D;
using sensing::World2;
using sensing::World3;
using vehicle::UnicycleState;

struct ExplorerConfig {
  double d0 = 1.0;          // safety margin
  double q0 = 0.5;          // branch probability
  double theta_trig = 0.1;  // rad
  double d_trig = 0.2;      // m, proximity to the intermediate target
  double pause = -1.0;      // s; < 0 means the 2*delta default
  double v = 0.5;
  double u_max = 1.4;
  double delta = 0.1;       // control sampling interval
  uint64_t seed = 1;
  int scan_rays = 1440;
  double scan_range = 12.0;
  double cell_size = 0.1;
  int step_cap = 1000000;
  double filter_slack = -1.0;  // < 0 means the 0.15*d0 default
  double noise_sigma = 0.0;    // optional range noise
  bool improved_odometry = false;
  double odometry_noise = 0.0;
  // 3D run
  int vertical_rays = 180;
  double sensor_z = -1.0;      // < 0 means half a voxel above ground
  double voxel_size = 0.25;

  double pause_s() const { return pause >= 0.0 ? pause : 2.0 * delta; }
  double slack() const { return filter_slack >= 0.0 ? filter_slack : 0.15 * d0; }
};

struct TangentSegment {
  Vec2 start;         // robot frame (the pole)
  Vec2 end;           // robot frame
  double polar_angle = 0.0;  // direction of the hypotenuse vs heading
  int side = +1;      // +1 when the generating boundary is left of the segment
};

// Steps 1-3 of the tangent construction: depth discontinuities, the d0
// right-triangle hypotenuse, and the corridor filter.
std::vector<TangentSegment> detect_tangents_from_scan(const Scan& scan,
                                                      double d0,
                                                      double filter_slack);

enum class Mode { R1 = 1, R2 = 2, R3 = 3 };

struct ExplorerState {
  Mode mode = Mode::R1;
  int circle_dir = +1;     // sign of the R1 turn
  Vec2 target;             // intermediate target P_T (world frame), R2 only
  int gamma = +1;          // boundary side, R3
  double pause_until = -1.0;
  double prev_d_min = 0.0;
  bool has_prev = false;
};

// One control evaluation of the switching law; draws from rng only when a
// boundary branch decision is taken.
double explorer_control(const UnicycleState& pose, const Scan& scan,
                        ExplorerState& state, const ExplorerConfig& cfg,
                        double now, Rng& rng);

struct TrajSample {
  double t = 0.0;
  double x = 0.0, y = 0.0, theta = 0.0;
  int mode = 1;
  double min_clearance = 0.0;
};

struct ExplorationResult {
  bool completed = false;
  double t_f = 0.0;
  int steps = 0;
  double min_clearance = 1e30;
  std::vector<TrajSample> trajectory;
  OccGrid2D grid;
  VoxelMap3D voxels;  // populated by the 3D run only
  int64_t transition_violations = 0;
  UnicycleState final_pose;
};

ExplorationResult run_exploration(const World2& world, const ExplorerConfig& cfg,
                                  const UnicycleState& start);

// Dual-scanner run: identical planar navigation plus vertical-scan voxel
// updates; terminates when the 3D known-region boundary is fully occupied.
ExplorationResult run_exploration_3d(const World2& ground, const World3& world,
                                     const ExplorerConfig& cfg,
                                     const UnicycleState& start);

struct OdometryStep {
  UnicycleState pose;
  bool fallback = false;  // |a*T| >= v, plain dead reckoning used
};

// Improved estimation model: advance by the quadrature of
// sqrt(v^2 - (a t)^2) along the heading plus the lateral a T^2/2 term.
OdometryStep improved_odometry_step(const UnicycleState& prev, double v_hat,
                                    double u_hat, double a_hat, double T,
                                    int panels = 64);

}  // namespace mrnav::explorer
