#include "mrnav/vehicle.hpp"

#include <stdexcept>

namespace mrnav::vehicle {

UnicycleState step_unicycle(const UnicycleState& s, const UnicycleParams& p,
                            double u, double dt, bool* clamped) {
  if (dt <= 0.0) throw std::invalid_argument("step_unicycle: dt must be > 0");
  bool clip = std::abs(u) > p.u_max;
  if (clamped) *clamped = clip;
  if (clip) u = std::copysign(p.u_max, u);

  UnicycleState out = s;
  if (std::abs(u) < 1e-12) {
    out.x += p.v * std::cos(s.theta) * dt;
    out.y += p.v * std::sin(s.theta) * dt;
  } else {
    double r = p.v / u;
    double th1 = s.theta + u * dt;
    out.x += r * (std::sin(th1) - std::sin(s.theta));
    out.y -= r * (std::cos(th1) - std::cos(s.theta));
    out.theta = th1;
  }
  out.theta = geom::normalize_angle(out.theta);
  return out;
}

std::pair<Circle2, Circle2> initial_circles(const UnicycleState& pose,
                                            double r_min) {
  Vec2 n{-std::sin(pose.theta), std::cos(pose.theta)};
  Vec2 p = pose.position();
  return {Circle2{p + n * r_min, r_min}, Circle2{p - n * r_min, r_min}};
}

Vehicle3State step_vehicle3(const Vehicle3State& s, double v, const Vec3& u_in,
                            double u_max, double dt, bool* adjusted) {
  if (dt <= 0.0) throw std::invalid_argument("step_vehicle3: dt must be > 0");
  bool adj = false;

  Vec3 u = u_in;
  double along = u.dot(s.i);
  if (std::abs(along) > 1e-6 * std::max(1.0, u.norm())) adj = true;
  u = u - s.i * along;  // keep u perpendicular to i
  double mag = u.norm();
  if (mag > u_max) {
    u = u * (u_max / mag);
    mag = u_max;
    adj = true;
  }
  if (adjusted) *adjusted = adj;

  Vehicle3State out = s;
  if (mag < 1e-12) {
    out.s = s.s + s.i * (v * dt);
    return out;
  }
  // Constant perpendicular input rotates i in the (i, u-hat) plane at rate
  // |u|; position follows the corresponding circular arc of radius v/|u|.
  Vec3 uh = u / mag;
  double a = mag * dt;
  double ca = std::cos(a), sa = std::sin(a);
  out.i = (s.i * ca + uh * sa).normalized();
  out.s = s.s + (s.i * sa + uh * (1.0 - ca)) * (v / mag);
  return out;
}

Vec3 InitialTorus::closest_on_base(const Vec3& p, bool* degenerate) const {
  Vec3 w = p - center;
  Vec3 radial = w - axis * w.dot(axis);
  double rn = radial.norm();
  if (rn < 1e-12) {
    if (degenerate) *degenerate = true;
    Vec3 any = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    radial = axis.cross(any).normalized();
    return center + radial * r_min;
  }
  if (degenerate) *degenerate = false;
  return center + radial * (r_min / rn);
}

}  // namespace mrnav::vehicle
