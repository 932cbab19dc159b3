#include "mrnav/tracking.hpp"

namespace mrnav::tracking {

CrossTrack signed_cross_track(const UnicycleState& pose,
                              const std::vector<Vec2>& path) {
  CrossTrack out;
  if (path.empty()) return out;
  Vec2 p = pose.position();
  double best = std::numeric_limits<double>::infinity();
  Vec2 bestq = path[0];
  int besti = 0;
  if (path.size() == 1) {
    best = dist(p, bestq);
  } else {
    for (size_t i = 0; i + 1 < path.size(); i++) {
      Vec2 q = geom::closest_point_segment(p, path[i], path[i + 1]);
      double d = dist(p, q);
      if (d < best) {
        best = d;
        bestq = q;
        besti = int(i);
      }
    }
  }
  out.closest = bestq;
  out.closest_index = besti;
  // Half-plane sign in the robot's local frame.
  Vec2 rel = bestq - p;
  double y_local = -std::sin(pose.theta) * rel.x + std::cos(pose.theta) * rel.y;
  double s = y_local > 1e-12 ? 1.0 : (y_local < -1e-12 ? -1.0 : 0.0);
  out.e = s * best;
  return out;
}

namespace {

double switching(double z, double u_max, const SmoothMode& smooth) {
  if (!smooth.enabled) return u_max * sgn(z);
  return u_max * std::clamp(smooth.slope * z, -1.0, 1.0);
}

struct PathFrame3 {
  double e_d = 0.0;
  double e_a = 0.0;
  Vec3 nu_d;  // unit vector from robot toward the closest path point
  Vec3 nu_a;  // unit normal of the plane through the tangent and the robot
  bool degenerate = false;
};

PathFrame3 path_frame3(const Vehicle3State& state, const std::vector<Vec3>& path) {
  PathFrame3 out;
  if (path.empty()) return out;
  double best = std::numeric_limits<double>::infinity();
  Vec3 bestq = path[0];
  Vec3 tangent{1, 0, 0};
  if (path.size() == 1) {
    best = dist(state.s, path[0]);
  } else {
    for (size_t i = 0; i + 1 < path.size(); i++) {
      Vec3 ab = path[i + 1] - path[i];
      double len2 = ab.norm2();
      double t = len2 > 0.0
                     ? std::clamp((state.s - path[i]).dot(ab) / len2, 0.0, 1.0)
                     : 0.0;
      Vec3 q = path[i] + ab * t;
      double d = dist(state.s, q);
      if (d < best) {
        best = d;
        bestq = q;
        if (len2 > 0.0) tangent = ab.normalized();
      }
    }
  }
  out.e_d = best;
  Vec3 off = state.s - bestq;
  out.nu_d = off.norm() > 1e-12 ? -off.normalized() : Vec3{0, 0, 0};
  Vec3 nu_a = tangent.cross(off);
  if (nu_a.norm() < 1e-9) {
    out.degenerate = true;
    Vec3 any = std::abs(tangent.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    nu_a = tangent.cross(any);
  }
  out.nu_a = nu_a.normalized();
  double c = std::clamp(state.i.dot(out.nu_a), -1.0, 1.0);
  out.e_a = std::acos(c) - M_PI / 2.0;
  return out;
}

}  // namespace

double smc2d(double e, double e_dot, const Gains2D& g, double u_max,
             const SmoothMode& smooth) {
  return switching(e_dot + saturation_x(e, g.lambda, g.sigma), u_max, smooth);
}

Smc3Result smc3d_errors(const Vehicle3State& state, const std::vector<Vec3>& path) {
  PathFrame3 f = path_frame3(state, path);
  Smc3Result out;
  out.e_d = f.e_d;
  out.e_a = f.e_a;
  out.degenerate_plane = f.degenerate;
  return out;
}

Smc3Result smc3d(const Vehicle3State& state, const std::vector<Vec3>& path,
                 double e_d_dot, double e_a_dot, const Gains3D& g, double u_max,
                 const SmoothMode& smooth) {
  PathFrame3 f = path_frame3(state, path);
  Smc3Result out;
  out.e_d = f.e_d;
  out.e_a = f.e_a;
  out.degenerate_plane = f.degenerate;

  double z_d = e_d_dot + saturation_x(f.e_d, g.lambda_d, g.sigma_d);
  double z_a = e_a_dot + saturation_x(f.e_a, g.lambda_a, g.sigma_a);
  double sw_d = smooth.enabled ? std::clamp(smooth.slope * z_d, -1.0, 1.0) : sgn(z_d);
  double sw_a = smooth.enabled ? std::clamp(smooth.slope * z_a, -1.0, 1.0) : sgn(z_a);

  Vec3 u_s = f.nu_d * (g.w_d * sw_d) + f.nu_a * (g.w_a * sw_a);
  double n = u_s.norm();
  if (n < 1e-12) return out;
  // Orthogonal projection i x u x i, rescaled to magnitude u_max.
  Vec3 uh = u_s / n;
  Vec3 proj = uh - state.i * uh.dot(state.i);
  double pn = proj.norm();
  if (pn < 1e-12) return out;
  out.u = proj * (u_max / pn);
  return out;
}

UnicycleState track_step(const UnicycleState& robot, const std::vector<Vec2>& path,
                         const Gains2D& g, const UnicycleParams& params,
                         double delta, double dt, TrackState2D& ts,
                         const SmoothMode& smooth) {
  UnicycleState s = robot;
  if (delta <= 0.0) return s;
  int n = std::max(1, int(std::round(delta / dt)));
  double h = delta / n;
  for (int k = 0; k < n; k++) {
    CrossTrack ct = signed_cross_track(s, path);
    double e_dot = ts.has_prev ? (ct.e - ts.prev_e) / h : 0.0;
    ts.prev_e = ct.e;
    ts.has_prev = true;
    double u = smc2d(ct.e, e_dot, g, params.u_max, smooth);
    s = vehicle::step_unicycle(s, params, u, h);
  }
  return s;
}

Vehicle3State track_step3(const Vehicle3State& robot, const std::vector<Vec3>& path,
                          const Gains3D& g, double v, double u_max, double delta,
                          double dt, TrackState3D& ts, const SmoothMode& smooth) {
  Vehicle3State s = robot;
  if (delta <= 0.0) return s;
  int n = std::max(1, int(std::round(delta / dt)));
  double h = delta / n;
  for (int k = 0; k < n; k++) {
    Smc3Result err = smc3d_errors(s, path);
    double edd = ts.has_prev ? (err.e_d - ts.prev_e_d) / h : 0.0;
    double ead = ts.has_prev ? (err.e_a - ts.prev_e_a) / h : 0.0;
    ts.prev_e_d = err.e_d;
    ts.prev_e_a = err.e_a;
    ts.has_prev = true;
    Smc3Result ctl = smc3d(s, path, edd, ead, g, u_max, smooth);
    s = vehicle::step_vehicle3(s, v, ctl.u, u_max, h);
  }
  return s;
}

}  // namespace mrnav::tracking
