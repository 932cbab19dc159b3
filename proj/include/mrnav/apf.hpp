#pragma once

#include <span>
#include <vector>

#include "mrnav/geom.hpp"
#include "mrnav/vehicle.hpp"

namespace mrnav::apf {

using geom::Circle2;
using geom::PolyObstacle;
using geom::Vec2;
using vehicle::UnicycleState;

// Equally spaced waypoint chain; spacing L = v_r * delta.
struct PathPolyline {
  std::vector<Vec2> points;
  double spacing = 0.0;

  int size() const { return int(points.size()); }
  // Path length as used for candidate selection (count x L).
  double length() const { return points.empty() ? 0.0 : (points.size() - 1) * spacing; }
  double geometric_length() const { return geom::polyline_length(points); }
};

struct FieldGains {
  // The momentum update is stable only while the local stiffness stays
  // under 2(1+G_N); a pinned chain reaches 4 G_I, so G_I must sit well
  // below (1+G_N)/2.
  double g_i = 0.5;
  double g_r = 1.0;
  double g_p = 0.5;
  double g_c = 1.0;
  double g_n = 0.7;       // momentum attenuation, in (0,1)
  double f_th = 1e-3;     // convergence threshold on |F|
  double l_under = 0.0;   // remove-last threshold, in (0, L)
  double l_over = 0.0;    // add-point threshold, in (L, 2L)
  int max_sweeps = 10000;

  // Spacing-aware defaults. G_P scales with L: the pull stretches every
  // spring by G_P/G_I, which must stay well inside the +-10% spacing band.
  // The convergence exit leaves a spacing drift of up to n*F_th/G_I across
  // an n-spring chain on top of the G_P/G_I pull stretch; both terms must
  // stay well inside the accepted +-10% band.
  static FieldGains defaults_for(double L) {
    FieldGains g;
    g.g_p = 0.01 * L * g.g_i;
    g.f_th = 1e-3 * L;
    g.l_under = 0.5 * L;
    g.l_over = 1.5 * L;
    return g;
  }
};

// Per-index clearance provider: the constraint set seen by path point k.
class ClearanceField {
 public:
  struct Probe {
    double dist = 0.0;  // clearance at p for time index k
    Vec2 away;          // unit push direction out of the constraint set
    bool inside = false;
  };
  virtual Probe probe(const Vec2& p, int k) const = 0;
  virtual double threshold(int k) const = 0;
  virtual ~ClearanceField() = default;
};

// Ch.2 world model: obstacles in uniform linear motion, exact polygon
// distances, constant threshold d_s.
class PredictedWorld : public ClearanceField {
 public:
  std::vector<PolyObstacle> obstacles;
  double delta = 0.0;
  double d_s = 0.0;

  PolyObstacle obstacle_at(int i, int k) const;

  Probe probe(const Vec2& p, int k) const override;
  double threshold(int) const override { return d_s; }
  // Probe a single obstacle (used by the R2 pull on the tracked obstacle).
  Probe probe_obstacle(int i, const Vec2& p, int k) const;
  // Index of the obstacle closest to p at step k, -1 when none.
  int closest_obstacle(const Vec2& p, int k, double* dist = nullptr) const;
};

// Fused-area field with the Ch.3 time-shrunk threshold d_s + min(k,T)dV.
class GridShrinkField : public ClearanceField {
 public:
  GridShrinkField(const geom::RegionGrid2& area, double d_s, double delta,
                  double v_max, int window)
      : area_(area), d_s_(d_s), delta_(delta), v_max_(v_max), window_(window) {}

  Probe probe(const Vec2& p, int) const override;
  double threshold(int k) const override {
    return d_s_ + std::min(k, window_) * delta_ * v_max_;
  }

 private:
  const geom::RegionGrid2& area_;
  double d_s_, delta_, v_max_;
  int window_;
};

struct VelocityEstimate {
  Vec2 velocity;
  bool unreliable = false;
};

// Centroid displacement over one sampling interval; flags shapes that moved
// by anything other than a translation.
VelocityEstimate estimate_obstacle_velocity(const PolyObstacle& at_0,
                                            const PolyObstacle& at_delta,
                                            double delta, double tol = 1e-3);

// --------------------------------------------------------------------------
// The four vector fields.
// --------------------------------------------------------------------------

// F_I: spacing springs along the chain (zero on coincident points).
Vec2 field_interval(const PathPolyline& path, int k, double g_i,
                    bool* degenerate = nullptr);

// F_R from a probe: zero above the threshold, otherwise pushes out with
// magnitude g_r * (threshold - clearance).
Vec2 field_repulsion(const ClearanceField::Probe& probe, double threshold,
                     double g_r);

enum class ProlongModeKind { R1, R2 };

struct ProlongMode {
  ProlongModeKind kind = ProlongModeKind::R1;
  int gamma = +1;      // bypass direction, defined in R2 only
  int obstacle = -1;   // tracked obstacle D_phi, defined in R2 only
};

// F_P on the last point. R1 pulls straight at the target; R2 combines the
// radial band term on the tracked obstacle with the gamma-signed tangent.
Vec2 field_pull(const Vec2& p_n, const Vec2& target, const ProlongMode& mode,
                const PredictedWorld* world, int k, const FieldGains& g);

// F_C for one initial circle; picks a deterministic direction at the center.
Vec2 field_initial_circle(const Vec2& p, const Circle2& circle, double g_c,
                          bool* degenerate = nullptr);

// --------------------------------------------------------------------------
// Relaxation and prolongation
// --------------------------------------------------------------------------

struct RelaxContext {
  const ClearanceField* field = nullptr;
  Vec2 target;
  const ProlongMode* mode = nullptr;  // Ch.2 pull; plain target pull when null
  const PredictedWorld* world = nullptr;  // needed for the R2 pull

  bool use_initial_circles = false;   // Ch.3 F_C
  Circle2 circle_left, circle_right;
  Vec2 heading;                       // unit heading at p0

  bool allow_add_remove = false;      // Ch.3 A2.3 last-point management
};

struct RelaxResult {
  bool converged = false;
  int sweeps = 0;
  bool touched_inside = false;  // some point probed inside the constraint set
};

// Momentum iteration p += v; v = G_N v + F, with p0 pinned.
RelaxResult relax_path(PathPolyline& path, const RelaxContext& ctx,
                       const FieldGains& g);

struct ProlongConfig {
  int step_cap = 4000;
};

struct ProlongOutcome {
  PathPolyline path;
  bool reached = false;
  std::vector<int> gammas_used;  // one entry per R1->R2 event
  bool hit_cap = false;
  bool relax_failed = false;
};

// Ch.2 B1-B3: grow the path point by point, relaxing after each append.
// gamma_prescription pins the choice at the first events; later events pick
// the larger-clearance side and are recorded.
ProlongOutcome prolong_path(const UnicycleState& start, const Vec2& target,
                            const PredictedWorld& world, double spacing,
                            const FieldGains& g,
                            std::span<const int> gamma_prescription = {},
                            const ProlongConfig& cfg = {});

struct HomotopyResult {
  bool ok = false;
  PathPolyline best;
  std::vector<int> best_gammas;
  std::vector<PathPolyline> completed;  // every target-reaching candidate
  int candidates_tried = 0;
};

// Ch.2 C1-C3: branch on every R1->R2 event, keep the shortest completed path.
HomotopyResult homotopy_search(const UnicycleState& start, const Vec2& target,
                               const PredictedWorld& world, double spacing,
                               const FieldGains& g, int candidate_cap = 64,
                               const ProlongConfig& cfg = {});

}  // namespace mrnav::apf
