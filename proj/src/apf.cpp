#include "mrnav/apf.hpp"

#include <algorithm>
#include <set>

namespace mrnav::apf {

// ---------------------------------------------------------------------------
// PredictedWorld
// ---------------------------------------------------------------------------

PolyObstacle PredictedWorld::obstacle_at(int i, int k) const {
  return obstacles[i].translated(obstacles[i].velocity * (k * delta));
}

ClearanceField::Probe PredictedWorld::probe_obstacle(int i, const Vec2& p,
                                                     int k) const {
  // Distance to the moved polygon equals distance of the back-shifted point
  // to the base polygon.
  Vec2 q = p - obstacles[i].velocity * (k * delta);
  Probe out;
  const auto& poly = obstacles[i].vertices;
  if (geom::point_in_polygon(q, poly)) {
    out.inside = true;
    out.dist = 0.0;
    Vec2 exitp = geom::closest_point_polygon_boundary(q, poly);
    out.away = (exitp - q).normalized();
    if (out.away.norm2() < 0.25) out.away = {1.0, 0.0};
    return out;
  }
  Vec2 cp = geom::closest_point_polygon_boundary(q, poly);
  out.dist = dist(q, cp);
  out.away = (q - cp).normalized();
  return out;
}

int PredictedWorld::closest_obstacle(const Vec2& p, int k, double* d) const {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < obstacles.size(); i++) {
    Vec2 q = p - obstacles[i].velocity * (k * delta);
    double di = geom::dist_point_polygon(q, obstacles[i].vertices);
    if (di < bd) {
      bd = di;
      best = int(i);
    }
  }
  if (d) *d = bd;
  return best;
}

ClearanceField::Probe PredictedWorld::probe(const Vec2& p, int k) const {
  Probe out;
  out.dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < obstacles.size(); i++) {
    Probe pi = probe_obstacle(int(i), p, k);
    if (pi.dist < out.dist) out = pi;
    if (out.inside) break;
  }
  if (obstacles.empty()) out.away = {0.0, 0.0};
  return out;
}

ClearanceField::Probe GridShrinkField::probe(const Vec2& p, int) const {
  Probe out;
  Vec2 grad;
  out.dist = area_.clearance_interp(p, &grad);
  out.inside = area_.at_point(p) != geom::Cell::Free;
  if (grad.norm2() > 1e-12) {
    out.away = grad.normalized();
  } else {
    out.away = -area_.direction_to_set(p);
    if (out.away.norm2() < 0.25) out.away = {0.0, 0.0};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Velocity estimation
// ---------------------------------------------------------------------------

VelocityEstimate estimate_obstacle_velocity(const PolyObstacle& at_0,
                                            const PolyObstacle& at_delta,
                                            double delta, double tol) {
  VelocityEstimate out;
  Vec2 disp = at_delta.centroid() - at_0.centroid();
  out.velocity = disp / delta;
  if (at_0.vertices.size() != at_delta.vertices.size()) {
    out.unreliable = true;
    return out;
  }
  double residual = 0.0;
  for (size_t i = 0; i < at_0.vertices.size(); i++)
    residual = std::max(residual,
                        dist(at_0.vertices[i] + disp, at_delta.vertices[i]));
  if (residual > tol) out.unreliable = true;
  return out;
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

Vec2 field_interval(const PathPolyline& path, int k, double g_i,
                    bool* degenerate) {
  const auto& p = path.points;
  const double L = path.spacing;
  if (degenerate) *degenerate = false;
  int n = int(p.size()) - 1;
  if (k <= 0 || k > n) return {0.0, 0.0};
  auto spring = [&](int a) -> Vec2 {
    // (l_a - L) * c_a with c_a the unit vector from p_a toward p_{a-1}.
    Vec2 l = p[a - 1] - p[a];
    double len = l.norm();
    if (len < 1e-12) {
      if (degenerate) *degenerate = true;
      return {0.0, 0.0};
    }
    return l * ((len - L) / len);
  };
  Vec2 f = spring(k);
  if (k != n) {
    Vec2 l = p[k] - p[k + 1];
    double len = l.norm();
    if (len < 1e-12) {
      if (degenerate) *degenerate = true;
    } else {
      f -= l * ((len - L) / len);
    }
  }
  return f * g_i;
}

Vec2 field_repulsion(const ClearanceField::Probe& probe, double threshold,
                     double g_r) {
  if (probe.inside) return probe.away * (g_r * threshold);
  if (probe.dist > threshold) return {0.0, 0.0};
  return probe.away * (g_r * (threshold - probe.dist));
}

Vec2 field_pull(const Vec2& p_n, const Vec2& target, const ProlongMode& mode,
                const PredictedWorld* world, int k, const FieldGains& g) {
  if (mode.kind == ProlongModeKind::R1 || world == nullptr ||
      mode.obstacle < 0) {
    Vec2 a = (target - p_n).normalized();
    return a * g.g_p;
  }
  ClearanceField::Probe pr = world->probe_obstacle(mode.obstacle, p_n, k);
  Vec2 e = -pr.away;  // toward the obstacle, radially
  Vec2 b = e.perp();
  double h = pr.dist;
  return e * (g.g_r * (h - world->d_s)) + b * (mode.gamma * g.g_p);
}

Vec2 field_initial_circle(const Vec2& p, const Circle2& circle, double g_c,
                          bool* degenerate) {
  if (degenerate) *degenerate = false;
  Vec2 h = circle.center - p;
  double hn = h.norm();
  if (hn < 1e-12) {
    if (degenerate) *degenerate = true;
    // Deterministic fallback push along +x of the circle frame.
    return Vec2{1.0, 0.0} * (g_c * circle.radius);
  }
  if (hn > circle.radius) return {0.0, 0.0};
  return h * (g_c * (1.0 - circle.radius / hn));
}

// ---------------------------------------------------------------------------
// Relaxation
// ---------------------------------------------------------------------------

namespace {

Vec2 total_force(const PathPolyline& path, int k, const RelaxContext& ctx,
                 const FieldGains& g, bool* touched_inside) {
  Vec2 f = field_interval(path, k, g.g_i);
  if (ctx.field) {
    ClearanceField::Probe pr = ctx.field->probe(path.points[k], k);
    if (pr.inside && touched_inside) *touched_inside = true;
    f += field_repulsion(pr, ctx.field->threshold(k), g.g_r);
  }
  int n = path.size() - 1;
  if (k == n) {
    if (ctx.mode) {
      f += field_pull(path.points[k], ctx.target, *ctx.mode, ctx.world, k, g);
    } else {
      f += (ctx.target - path.points[k]).normalized() * g.g_p;
    }
  }
  if (ctx.use_initial_circles && path.size() >= 2) {
    // Circle on the same side of the heading as p1 (re-evaluated as p1 moves).
    Vec2 rel = path.points[1] - path.points[0];
    const Circle2& c =
        ctx.heading.cross(rel) >= 0.0 ? ctx.circle_left : ctx.circle_right;
    f += field_initial_circle(path.points[k], c, g.g_c);
  }
  return f;
}

}  // namespace

RelaxResult relax_path(PathPolyline& path, const RelaxContext& ctx,
                       const FieldGains& g) {
  RelaxResult out;
  if (path.size() <= 1) {
    out.converged = true;
    return out;
  }
  std::vector<Vec2> vel(path.points.size(), Vec2{0.0, 0.0});
  std::vector<Vec2> force(path.points.size());

  // Forces are evaluated at the freshly moved positions; with the force
  // taken before the move the momentum map has determinant G_N + k and
  // diverges for any useful spring stiffness.
  for (int sweep = 0; sweep < g.max_sweeps; sweep++) {
    out.sweeps = sweep + 1;
    int n = path.size() - 1;
    for (int k = 1; k <= n; k++) path.points[k] += vel[k];
    double fmax = 0.0;
    for (int k = 1; k <= n; k++) {
      force[k] = total_force(path, k, ctx, g, &out.touched_inside);
      fmax = std::max(fmax, force[k].norm());
    }
    if (fmax < g.f_th) {
      out.converged = true;
      return out;
    }
    double vcap = 0.25 * path.spacing;
    for (int k = 1; k <= n; k++) {
      vel[k] = vel[k] * g.g_n + force[k];
      double vn = vel[k].norm();
      if (vn > vcap) vel[k] = vel[k] * (vcap / vn);
    }
    if (ctx.allow_add_remove && path.size() >= 2) {
      double dlast = dist(path.points.back(), ctx.target);
      if (dlast < g.l_under && path.size() > 2) {
        path.points.pop_back();
        vel.pop_back();
        force.pop_back();
      } else if (dlast > g.l_over) {
        Vec2 dirt = (ctx.target - path.points.back()).normalized();
        path.points.push_back(path.points.back() + dirt * path.spacing);
        vel.push_back({0.0, 0.0});
        force.push_back({0.0, 0.0});
      }
    }
  }
  out.converged = false;
  return out;
}

// ---------------------------------------------------------------------------
// Prolongation (Ch.2 B1-B3) and homotopy search (C1-C3)
// ---------------------------------------------------------------------------

ProlongOutcome prolong_path(const UnicycleState& start, const Vec2& target,
                            const PredictedWorld& world, double spacing,
                            const FieldGains& g,
                            std::span<const int> gamma_prescription,
                            const ProlongConfig& cfg) {
  ProlongOutcome out;
  out.path.spacing = spacing;
  out.path.points = {start.position()};
  ProlongMode mode;
  RelaxContext ctx;
  ctx.field = &world;
  ctx.target = target;
  ctx.mode = &mode;
  ctx.world = &world;

  for (int step = 0; step < cfg.step_cap; step++) {
    // B2.1: one new point toward the target.
    Vec2 tail = out.path.points.back();
    Vec2 a = (target - tail).normalized();
    out.path.points.push_back(tail + a * out.path.spacing);

    // B2.2: optimize.
    RelaxResult rr = relax_path(out.path, ctx, g);
    if (!rr.converged) {
      out.relax_failed = true;
      return out;
    }

    // B2.3: mode transitions.
    int n = out.path.size() - 1;
    if (mode.kind == ProlongModeKind::R1) {
      double d;
      int phi = world.closest_obstacle(out.path.points[n], n, &d);
      if (phi >= 0 && d <= world.d_s) {
        mode.kind = ProlongModeKind::R2;
        mode.obstacle = phi;
        size_t ev = out.gammas_used.size();
        if (ev < gamma_prescription.size()) {
          mode.gamma = gamma_prescription[ev];
        } else {
          // Pick the side with larger clearance a short hop away.
          ClearanceField::Probe pr = world.probe_obstacle(phi, out.path.points[n], n);
          Vec2 b = (-pr.away).perp();
          Vec2 probe_plus = out.path.points[n] + b * world.d_s;
          Vec2 probe_minus = out.path.points[n] - b * world.d_s;
          double dp, dm;
          world.closest_obstacle(probe_plus, n, &dp);
          world.closest_obstacle(probe_minus, n, &dm);
          mode.gamma = dp >= dm ? +1 : -1;
        }
        out.gammas_used.push_back(mode.gamma);
      }
    } else {
      const PolyObstacle moved = world.obstacle_at(mode.obstacle, n);
      double dseg = geom::dist_segment_polygon(out.path.points[n], target,
                                               moved.vertices);
      if (dseg > world.d_s) {
        mode.kind = ProlongModeKind::R1;
        mode.obstacle = -1;
      }
    }

    // B3.
    if (dist(out.path.points[n], target) < out.path.spacing) {
      out.reached = true;
      return out;
    }
  }
  out.hit_cap = true;
  return out;
}

HomotopyResult homotopy_search(const UnicycleState& start, const Vec2& target,
                               const PredictedWorld& world, double spacing,
                               const FieldGains& g, int candidate_cap,
                               const ProlongConfig& cfg) {
  HomotopyResult out;
  std::vector<std::vector<int>> worklist = {{}};
  std::set<std::vector<int>> seen = {{}};
  std::vector<std::pair<PathPolyline, std::vector<int>>> done;

  for (size_t w = 0; w < worklist.size() && int(w) < candidate_cap; w++) {
    std::vector<int> prescription = worklist[w];
    ProlongOutcome po = prolong_path(start, target, world, spacing, g, prescription, cfg);
    out.candidates_tried++;
    // Spawn the sibling of every event decided beyond the prescription.
    for (size_t e = prescription.size(); e < po.gammas_used.size(); e++) {
      std::vector<int> sib(po.gammas_used.begin(), po.gammas_used.begin() + e + 1);
      sib.back() = -sib.back();
      if (seen.insert(sib).second) worklist.push_back(std::move(sib));
    }
    if (po.reached) done.push_back({std::move(po.path), po.gammas_used});
  }

  if (done.empty()) return out;
  size_t best = 0;
  for (size_t i = 1; i < done.size(); i++) {
    if (done[i].first.size() < done[best].first.size() ||
        (done[i].first.size() == done[best].first.size() &&
         done[i].second.size() < done[best].second.size()))
      best = i;
  }
  out.ok = true;
  out.best = done[best].first;
  out.best_gammas = done[best].second;
  for (auto& d : done) out.completed.push_back(d.first);
  return out;
}

}  // namespace mrnav::apf
