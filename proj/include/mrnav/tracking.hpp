#pragma once

#include <vector>

#include "mrnav/geom.hpp"
#include "mrnav/vehicle.hpp"

namespace mrnav::tracking {

using geom::Vec2;
using geom::Vec3;
using vehicle::UnicycleParams;
using vehicle::UnicycleState;
using vehicle::Vehicle3State;

struct Gains2D {
  double lambda = 2.0;
  double sigma = 1.0;
};

struct Gains3D {
  double lambda_d = 2.0;
  double sigma_d = 1.0;
  double lambda_a = 3.0;
  double sigma_a = 1.0;
  double w_d = 1.0;
  double w_a = 1.0;
};

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// lambda*z inside |z| <= sigma, saturated to lambda*sigma*sgn(z) outside.
inline double saturation_x(double z, double lambda, double sigma) {
  if (std::abs(z) <= sigma) return lambda * z;
  return lambda * sigma * sgn(z);
}

struct CrossTrack {
  double e = 0.0;    // signed distance, positive when the closest point lies
                     // in the robot's upper local half-plane
  int closest_index = 0;  // index of the segment start nearest to the robot
  Vec2 closest;
};

CrossTrack signed_cross_track(const UnicycleState& pose,
                              const std::vector<Vec2>& path);

struct SmoothMode {
  bool enabled = false;
  double slope = 0.0;  // replaces sgn with a +-1 saturation of this slope
};

// u = u_max * sgn(e_dot + X(e)); smooth mode bounds the switching slope.
double smc2d(double e, double e_dot, const Gains2D& g, double u_max,
             const SmoothMode& smooth = {});

struct Smc3Result {
  Vec3 u;
  double e_d = 0.0;
  double e_a = 0.0;
  bool degenerate_plane = false;
};

// Two-error sliding-mode law for the 3D vehicle. e_d_dot / e_a_dot are the
// caller's finite differences of the two errors.
Smc3Result smc3d(const Vehicle3State& state, const std::vector<Vec3>& path,
                 double e_d_dot, double e_a_dot, const Gains3D& g, double u_max,
                 const SmoothMode& smooth = {});

// Errors only (used to form the finite differences between calls).
Smc3Result smc3d_errors(const Vehicle3State& state, const std::vector<Vec3>& path);

struct TrackState2D {
  double prev_e = 0.0;
  bool has_prev = false;
};

// Closed-loop integration of one sampling interval delta at substep dt.
UnicycleState track_step(const UnicycleState& robot, const std::vector<Vec2>& path,
                         const Gains2D& g, const UnicycleParams& params,
                         double delta, double dt, TrackState2D& ts,
                         const SmoothMode& smooth = {});

struct TrackState3D {
  double prev_e_d = 0.0;
  double prev_e_a = 0.0;
  bool has_prev = false;
};

Vehicle3State track_step3(const Vehicle3State& robot, const std::vector<Vec3>& path,
                          const Gains3D& g, double v, double u_max, double delta,
                          double dt, TrackState3D& ts,
                          const SmoothMode& smooth = {});

}  // namespace mrnav::tracking
