#pragma once

#include "mrnav/geom.hpp"

namespace mrnav::vehicle {

using geom::Circle2;
using geom::Vec2;
using geom::Vec3;

struct UnicycleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // normalized to (-pi, pi]

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }
};

struct UnicycleParams {
  double v = 0.0;      // constant forward speed, m/s
  double u_max = 0.0;  // angular velocity bound, rad/s
};

inline double min_turn_radius(const UnicycleParams& p) { return p.v / p.u_max; }

// Closed-form constant-u arc over dt (straight line when u == 0).
// Out-of-range u is clamped; `clamped` reports it when non-null.
UnicycleState step_unicycle(const UnicycleState& s, const UnicycleParams& p,
                            double u, double dt, bool* clamped = nullptr);

// The two minimum-turn circles tangent to the heading at the current pose.
// first = left of heading, second = right.
std::pair<Circle2, Circle2> initial_circles(const UnicycleState& pose,
                                            double r_min);

struct Vehicle3State {
  Vec3 s;                 // position
  Vec3 i{1.0, 0.0, 0.0};  // unit velocity direction
};

// Integrates ds = v*i, di = u over dt. u is re-orthogonalized against i and
// clamped to u_max; each step advances i by the exact rotation the constant
// input induces, then renormalizes.
Vehicle3State step_vehicle3(const Vehicle3State& s, double v, const Vec3& u,
                            double u_max, double dt, bool* adjusted = nullptr);

struct InitialTorus {
  Vec3 center;            // robot position (center of base circle B)
  Vec3 axis{1.0, 0.0, 0.0};  // plane normal of B = velocity direction i
  double r_min = 0.0;     // base radius and tube radius

  // Closest point on the base circle B; `degenerate` set when the query point
  // lies on the axis and the choice is arbitrary.
  Vec3 closest_on_base(const Vec3& p, bool* degenerate = nullptr) const;
  double tube_distance(const Vec3& p) const {  // rho(B, p)
    return (p - closest_on_base(p)).norm();
  }
};

inline InitialTorus make_initial_torus(const Vehicle3State& st, double r_min) {
  return InitialTorus{st.s, st.i, r_min};
}

}  // namespace mrnav::vehicle
