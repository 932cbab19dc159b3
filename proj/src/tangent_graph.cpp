#include "mrnav/tangent_graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mrnav::tangent_graph {

namespace {

constexpr double kInf = 1e20;

// Arc-length parametrization of a closed polyline.
struct CurveGeom {
  std::vector<Vec2> pts;
  std::vector<double> cum;  // cum[i] = arc length at pts[i]; cum[n] = total
  double total = 0.0;

  void init(const std::vector<Vec2>& p) {
    pts = p;
    cum.assign(pts.size() + 1, 0.0);
    for (size_t i = 0; i < pts.size(); i++)
      cum[i + 1] = cum[i] + dist(pts[i], pts[(i + 1) % pts.size()]);
    total = cum[pts.size()];
  }

  double wrap(double s) const {
    s = std::fmod(s, total);
    return s < 0.0 ? s + total : s;
  }

  Vec2 point_at(double s) const {
    s = wrap(s);
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    size_t i = std::max<size_t>(1, it - cum.begin()) - 1;
    i = std::min(i, pts.size() - 1);
    double seg = cum[i + 1] - cum[i];
    double t = seg > 0.0 ? (s - cum[i]) / seg : 0.0;
    return pts[i] + (pts[(i + 1) % pts.size()] - pts[i]) * t;
  }

  Vec2 tangent_at(double s) const {
    s = wrap(s);
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    size_t i = std::max<size_t>(1, it - cum.begin()) - 1;
    i = std::min(i, pts.size() - 1);
    return (pts[(i + 1) % pts.size()] - pts[i]).normalized();
  }

  double project(const Vec2& p, double* d_out = nullptr) const {
    double best = kInf, bparam = 0.0;
    for (size_t i = 0; i < pts.size(); i++) {
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % pts.size()];
      Vec2 q = geom::closest_point_segment(p, a, b);
      double d = dist(p, q);
      if (d < best) {
        best = d;
        bparam = cum[i] + dist(a, q);
      }
    }
    if (d_out) *d_out = best;
    return bparam;
  }

  // Points along the curve from s0 to s1 walking in direction dir; includes
  // the interpolated endpoints and every polyline vertex in between.
  std::vector<Vec2> slice(double s0, double s1, int dir) const {
    std::vector<Vec2> out;
    s0 = wrap(s0);
    s1 = wrap(s1);
    double len = dir > 0 ? wrap(s1 - s0) : wrap(s0 - s1);
    out.push_back(point_at(s0));
    if (len <= 1e-12) return out;
    double walked = 0.0;
    size_t n = pts.size();
    // Vertex params in travel order starting after s0.
    auto next_vertex_after = [&](double s, int d) {
      if (d > 0) {
        auto it = std::upper_bound(cum.begin(), cum.begin() + n, s + 1e-12);
        size_t i = it - cum.begin();
        return i >= n ? std::pair<double, size_t>{cum[0] + total, 0}
                      : std::pair<double, size_t>{cum[i], i};
      }
      auto it = std::lower_bound(cum.begin(), cum.begin() + n, s - 1e-12);
      if (it == cum.begin())
        return std::pair<double, size_t>{cum[n - 1] - total, n - 1};
      size_t i = (it - cum.begin()) - 1;
      return std::pair<double, size_t>{cum[i], i};
    };
    double s = s0, unwrapped = 0.0;
    int guard = int(n) + 4;
    while (guard-- > 0) {
      auto [sv, iv] = next_vertex_after(s, dir);
      double step = dir > 0 ? sv - s : s - sv;
      if (step < 0) step += total;
      if (unwrapped + step >= len - 1e-12) break;
      unwrapped += step;
      walked = unwrapped;
      (void)walked;
      out.push_back(pts[iv]);
      s = wrap(sv);
    }
    out.push_back(point_at(s1));
    return out;
  }
};

struct CircleGeom {
  Circle2 c;
  int dir = +1;      // +1 ccw, -1 cw
  double a0 = 0.0;   // polar angle of p0 on the circle

  Vec2 at_travel(double s) const {
    double a = a0 + dir * s;
    return c.center + Vec2{std::cos(a), std::sin(a)} * c.radius;
  }
  Vec2 travel_tangent(double s) const {
    double a = a0 + dir * s;
    Vec2 t{-std::sin(a), std::cos(a)};
    return dir > 0 ? t : -t;
  }
  double travel_of(const Vec2& p) const {
    double a = std::atan2(p.y - c.center.y, p.x - c.center.x);
    double s = dir > 0 ? a - a0 : a0 - a;
    s = std::fmod(s, 2.0 * M_PI);
    return s < 0.0 ? s + 2.0 * M_PI : s;
  }
  std::vector<Vec2> slice(double s0, double s1, double step_len) const {
    std::vector<Vec2> out;
    double span = s1 - s0;
    int steps = std::max(2, int(std::ceil(span * c.radius / step_len)));
    for (int i = 0; i <= steps; i++)
      out.push_back(at_travel(s0 + span * i / steps));
    return out;
  }
};

std::vector<Vec2> resample_closed(const std::vector<Vec2>& p, double spacing) {
  CurveGeom g;
  g.init(p);
  int n = std::max(8, int(std::round(g.total / spacing)));
  std::vector<Vec2> out;
  out.reserve(n);
  for (int i = 0; i < n; i++) out.push_back(g.point_at(g.total * i / n));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Boundary extraction
// ---------------------------------------------------------------------------

BoundaryCurves extract_boundary_curves(const RegionGrid2& reduced) {
  if (reduced.count(geom::Cell::Free) == 0)
    throw std::invalid_argument("extract_boundary_curves: empty free set");
  BoundaryCurves out;
  auto loops = geom::grid_contours(reduced);
  double cell = reduced.cell_size();
  out.cell = cell;
  double min_area = 9.0 * cell * cell;
  std::vector<std::pair<double, std::vector<Vec2>>> keep;
  for (auto& l : loops) {
    geom::PolyObstacle poly;
    poly.vertices = l;
    double a = std::abs(poly.area());
    if (a < min_area) continue;
    keep.push_back({a, std::move(l)});
  }
  std::sort(keep.begin(), keep.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (auto& k : keep) {
    out.curves.push_back(k.second);
    out.smoothed.push_back(
        geom::smooth_closed_polyline(resample_closed(k.second, cell), 4));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

// Tangent vertices of a closed polyline as seen from an external point:
// both neighbors on the same side of the line through `from` and the vertex.
std::vector<size_t> tangent_vertices(const std::vector<Vec2>& poly,
                                     const Vec2& from) {
  size_t n = poly.size();
  std::vector<size_t> hits;
  for (size_t i = 0; i < n; i++) {
    Vec2 d = poly[i] - from;
    if (d.norm2() < 1e-18) continue;
    double c1 = d.cross(poly[(i + n - 1) % n] - poly[i]);
    double c2 = d.cross(poly[(i + 1) % n] - poly[i]);
    if (c1 * c2 >= -1e-12) hits.push_back(i);
  }
  // Cluster runs of adjacent indices (wrapping) and keep run middles.
  std::vector<size_t> reps;
  if (hits.empty()) return reps;
  std::vector<std::vector<size_t>> runs;
  runs.push_back({hits[0]});
  for (size_t k = 1; k < hits.size(); k++) {
    if (hits[k] - runs.back().back() <= 3)
      runs.back().push_back(hits[k]);
    else
      runs.push_back({hits[k]});
  }
  if (runs.size() > 1 && (hits.front() + n - runs.back().back()) <= 3) {
    for (auto i : runs.front()) runs.back().push_back(i);
    runs.erase(runs.begin());
  }
  for (auto& r : runs) reps.push_back(r[r.size() / 2]);
  return reps;
}

struct SegHit {
  double t = kInf;  // parameter along [a, b]
  int curve = -1;
  Vec2 pos;
  double param = 0.0;
};

SegHit first_curve_hit(const Vec2& a, const Vec2& b,
                       const std::vector<CurveGeom>& geoms,
                       const Vec2& exclude_near, double exclude_radius) {
  SegHit best;
  for (size_t c = 0; c < geoms.size(); c++) {
    const auto& pts = geoms[c].pts;
    size_t n = pts.size();
    for (size_t e = 0; e < n; e++) {
      auto t = geom::segment_segment_intersect(a, b, pts[e], pts[(e + 1) % n]);
      if (!t) continue;
      Vec2 pos = a + (b - a) * (*t);
      if (dist(pos, exclude_near) < exclude_radius) continue;
      if (*t < best.t) {
        best.t = *t;
        best.curve = int(c);
        best.pos = pos;
        best.param = geoms[c].cum[e] + dist(pts[e], pos);
      }
    }
  }
  return best;
}

}  // namespace

std::vector<Vertex> classify_points(const BoundaryCurves& curves,
                                    const Vec2& target,
                                    const UnicycleState& pose, double r_min,
                                    bool* conflict) {
  std::vector<Vertex> verts;
  std::vector<CurveGeom> geoms(curves.smoothed.size());
  for (size_t c = 0; c < curves.smoothed.size(); c++)
    geoms[c].init(curves.smoothed[c]);
  double excl = std::max(1e-3, curves.cell * 2.5);

  auto add_pair = [&](Vertex a, VertexType prime_type) {
    // Segment from the tangent point toward the target; the first curve hit
    // becomes the prime vertex.
    SegHit hit = first_curve_hit(a.pos, target, geoms, a.pos, excl);
    int ia = int(verts.size());
    verts.push_back(a);
    if (hit.curve < 0) {
      verts[ia].link = -2;  // segment runs straight to the target
    } else {
      Vertex p;
      p.type = prime_type;
      p.pos = hit.pos;
      p.host_curve = hit.curve;
      p.host_param = hit.param;
      p.link = ia;
      int ip = int(verts.size());
      verts.push_back(p);
      verts[ia].link = ip;
    }
  };

  // A points: tangents from the target to every curve.
  for (size_t c = 0; c < curves.smoothed.size(); c++) {
    for (size_t vi : tangent_vertices(curves.smoothed[c], target)) {
      Vertex v;
      v.type = VertexType::A;
      v.pos = curves.smoothed[c][vi];
      v.host_curve = int(c);
      v.host_param = geoms[c].cum[vi];
      add_pair(v, VertexType::APrime);
    }
  }

  // S points: backward ray from p0 against C0.
  if (!curves.smoothed.empty()) {
    Vec2 dir = (pose.position() - target).normalized();
    const auto& pts = geoms[0].pts;
    size_t n = pts.size();
    for (size_t e = 0; e < n; e++) {
      auto t = geom::ray_segment_intersect(pose.position(), dir, pts[e],
                                           pts[(e + 1) % n]);
      if (!t || *t < 1e-9) continue;
      Vec2 pos = pose.position() + dir * (*t);
      Vertex v;
      v.type = VertexType::S;
      v.pos = pos;
      v.host_curve = 0;
      v.host_param = geoms[0].cum[e] + dist(pts[e], pos);
      verts.push_back(v);
    }
  }

  // B points: travel-compatible tangents from the target to each circle.
  auto circles = vehicle::initial_circles(pose, r_min);
  const CircleGeom cg[2] = {
      {circles.first, +1,
       std::atan2(pose.y - circles.first.center.y, pose.x - circles.first.center.x)},
      {circles.second, -1,
       std::atan2(pose.y - circles.second.center.y, pose.x - circles.second.center.x)}};
  for (int s = 0; s < 2; s++) {
    Vec2 d = target - cg[s].c.center;
    double dn = d.norm();
    if (dn <= cg[s].c.radius) continue;
    double base = std::atan2(d.y, d.x);
    double phi = std::acos(cg[s].c.radius / dn);
    for (double ang : {base + phi, base - phi}) {
      Vec2 p = cg[s].c.center + Vec2{std::cos(ang), std::sin(ang)} * cg[s].c.radius;
      double tr = cg[s].travel_of(p);
      Vec2 tt = cg[s].travel_tangent(tr);
      if (tt.dot(target - p) <= 0.0) continue;  // cannot exit here
      // Not a B point if an inner curve encircles it.
      bool encircled = false;
      for (size_t c = 1; c < curves.curves.size(); c++)
        if (geom::point_in_polygon(p, curves.curves[c])) encircled = true;
      if (encircled) continue;
      Vertex v;
      v.type = VertexType::B;
      v.pos = p;
      v.host_circle = s;
      v.travel_param = tr;
      add_pair(v, VertexType::BPrime);
    }
  }

  // V points: circle-curve intersections.
  for (int s = 0; s < 2; s++) {
    for (size_t c = 0; c < curves.smoothed.size(); c++) {
      const auto& pts = geoms[c].pts;
      size_t n = pts.size();
      for (size_t e = 0; e < n; e++) {
        // Segment-circle intersection.
        Vec2 a = pts[e], b = pts[(e + 1) % n];
        Vec2 ab = b - a;
        Vec2 ac = a - cg[s].c.center;
        double qa = ab.norm2();
        if (qa < 1e-18) continue;
        double qb = 2.0 * ac.dot(ab);
        double qc = ac.norm2() - cg[s].c.radius * cg[s].c.radius;
        double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) continue;
        double sq = std::sqrt(disc);
        for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
          if (t < 0.0 || t > 1.0) continue;
          Vec2 pos = a + ab * t;
          Vertex v;
          v.type = VertexType::V;
          v.pos = pos;
          v.host_curve = int(c);
          v.host_param = geoms[c].cum[e] + dist(a, pos);
          v.host_circle = s;
          v.travel_param = cg[s].travel_of(pos);
          verts.push_back(v);
        }
      }
    }
  }

  // Tangent-point uniqueness (assumption): flag near-coincident vertices of
  // segment-bearing types.
  if (conflict) {
    *conflict = false;
    for (size_t i = 0; i < verts.size(); i++)
      for (size_t j = i + 1; j < verts.size(); j++)
        if ((verts[i].type == VertexType::A || verts[i].type == VertexType::B) &&
            (verts[j].type == VertexType::A || verts[j].type == VertexType::B) &&
            dist(verts[i].pos, verts[j].pos) < 1e-6)
          *conflict = true;
  }
  return verts;
}

// ---------------------------------------------------------------------------
// Graph assembly
// ---------------------------------------------------------------------------

GraphG build_graph(const BoundaryCurves& curves, std::vector<Vertex> vertices,
                   const UnicycleState& pose, const Vec2& target, double r_min) {
  GraphG g;
  g.curves = curves;
  g.start = pose.position();
  g.target = target;
  g.r_min = r_min;
  auto circles = vehicle::initial_circles(pose, r_min);
  g.circle_left = circles.first;
  g.circle_right = circles.second;

  Vertex tv;
  tv.type = VertexType::Target;
  tv.pos = target;
  g.target_vertex = 0;
  Vertex sv;
  sv.type = VertexType::Start;
  sv.pos = pose.position();
  g.start_vertex = 1;
  g.vertices.push_back(tv);
  g.vertices.push_back(sv);
  int base = 2;
  for (auto& v : vertices) {
    if (v.link >= 0) v.link += base;
    g.vertices.push_back(v);
  }
  for (auto& v : g.vertices)
    if (v.link == -2) v.link = g.target_vertex;

  g.curve_order.assign(curves.smoothed.size(), {});
  for (size_t i = 0; i < g.vertices.size(); i++) {
    const Vertex& v = g.vertices[i];
    if (v.host_curve >= 0) g.curve_order[v.host_curve].push_back(int(i));
    if (v.host_circle >= 0) g.circle_order[v.host_circle].push_back(int(i));
  }
  for (auto& order : g.curve_order)
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return g.vertices[a].host_param < g.vertices[b].host_param;
    });
  for (auto& order : g.circle_order)
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return g.vertices[a].travel_param < g.vertices[b].travel_param;
    });
  return g;
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

GenerateResult generate_candidates(const GraphG& g, const GenerateOptions& opt) {
  GenerateResult out;
  std::vector<CurveGeom> geoms(g.curves.smoothed.size());
  double cell = 0.05;
  for (size_t c = 0; c < g.curves.smoothed.size(); c++) {
    geoms[c].init(g.curves.smoothed[c]);
    if (g.curves.smoothed[c].size() > 1)
      cell = std::max(cell, geoms[c].total / double(g.curves.smoothed[c].size()));
  }
  const CircleGeom cg[2] = {
      {g.circle_left, +1,
       std::atan2(g.start.y - g.circle_left.center.y,
                  g.start.x - g.circle_left.center.x)},
      {g.circle_right, -1,
       std::atan2(g.start.y - g.circle_right.center.y,
                  g.start.x - g.circle_right.center.x)}};

  struct Item {
    Candidate cand;
    enum class Loc { OnCircle, OnCurve } loc = Loc::OnCircle;
    int circle = 0;
    int curve = -1;
    int dir = 0;
    int at = -1;  // current vertex (for OnCurve)
    int hops = 0;
    std::set<std::pair<int, int>> seen;
  };

  std::vector<Item> queue;
  for (int s = 0; s < 2; s++) {
    Item it;
    it.loc = Item::Loc::OnCircle;
    it.circle = s;
    it.cand.points = {g.start};
    it.cand.trace = {g.start_vertex};
    queue.push_back(std::move(it));
  }

  auto append_points = [](Candidate& c, const std::vector<Vec2>& pts) {
    for (const auto& p : pts)
      if (c.points.empty() || dist(c.points.back(), p) > 1e-9)
        c.points.push_back(p);
  };

  size_t qi = 0;
  while (qi < queue.size()) {
    if (int(queue.size()) > opt.candidate_cap) {
      out.truncated = true;
      break;
    }
    Item it = std::move(queue[qi++]);
    bool alive = true;
    while (alive && it.hops++ < opt.hop_cap) {
      if (it.loc == Item::Loc::OnCircle) {
        const auto& order = g.circle_order[it.circle];
        if (order.empty()) {
          it.cand.status = Candidate::Status::Abandoned;
          break;
        }
        int v = order.front();  // first vertex in travel order from p0
        append_points(it.cand,
                      cg[it.circle].slice(0.0, g.vertices[v].travel_param, cell));
        it.cand.trace.push_back(v);
        const Vertex& vx = g.vertices[v];
        if (vx.type == VertexType::B) {
          // rule 2: follow the tangent segment
          int far = vx.link;
          it.cand.points.push_back(g.vertices[far].pos);
          it.cand.trace.push_back(far);
          if (far == g.target_vertex) {
            it.cand.status = Candidate::Status::Completed;
            break;
          }
          // B': branch both directions along the host curve (rule 3)
          Item sib = it;
          sib.loc = Item::Loc::OnCurve;
          sib.curve = g.vertices[far].host_curve;
          sib.at = far;
          sib.dir = -1;
          queue.push_back(std::move(sib));
          it.loc = Item::Loc::OnCurve;
          it.curve = g.vertices[far].host_curve;
          it.at = far;
          it.dir = +1;
        } else if (vx.type == VertexType::V) {
          // rule 4: keep the circle's turning sense on the curve
          it.loc = Item::Loc::OnCurve;
          it.curve = vx.host_curve;
          it.at = v;
          Vec2 tc = cg[it.circle].travel_tangent(vx.travel_param);
          Vec2 tk = geoms[it.curve].tangent_at(vx.host_param);
          it.dir = tk.dot(tc) >= 0.0 ? +1 : -1;
        } else {
          it.cand.status = Candidate::Status::Abandoned;
          break;
        }
      } else {
        // Traveling along a curve: advance to the next vertex in `dir`.
        const auto& order = g.curve_order[it.curve];
        if (order.size() <= 1) {
          it.cand.status = Candidate::Status::Abandoned;
          break;
        }
        auto pos_of = [&](int vid) { return g.vertices[vid].host_param; };
        // Find our index.
        size_t idx = 0;
        for (; idx < order.size(); idx++)
          if (order[idx] == it.at) break;
        if (idx == order.size()) {
          // Current vertex not indexed (interpolated entry): insert by param.
          double p = g.vertices[it.at].host_param;
          idx = 0;
          while (idx < order.size() && pos_of(order[idx]) < p) idx++;
          idx = (idx + (it.dir > 0 ? 0 : order.size() - 1)) % order.size();
          // fallthrough uses idx as "next" directly
          int next = order[idx % order.size()];
          append_points(it.cand, geoms[it.curve].slice(
                                     p, g.vertices[next].host_param, it.dir));
          it.at = next;
        } else {
          size_t nidx = (idx + (it.dir > 0 ? 1 : order.size() - 1)) % order.size();
          int next = order[nidx];
          append_points(it.cand,
                        geoms[it.curve].slice(g.vertices[it.at].host_param,
                                              g.vertices[next].host_param, it.dir));
          it.at = next;
        }
        it.cand.trace.push_back(it.at);
        if (!it.seen.insert({it.at, it.dir}).second) {
          it.cand.status = Candidate::Status::Abandoned;
          break;
        }
        const Vertex& vx = g.vertices[it.at];
        if (vx.type == VertexType::S) {
          it.cand.status = Candidate::Status::Abandoned;  // rule 5
          break;
        }
        if (vx.type == VertexType::A) {  // rule 2
          int far = vx.link;
          it.cand.points.push_back(g.vertices[far].pos);
          it.cand.trace.push_back(far);
          if (far == g.target_vertex) {
            it.cand.status = Candidate::Status::Completed;  // rule 6
            break;
          }
          Item sib = it;  // rule 3 at the A'/B' landing
          sib.curve = g.vertices[far].host_curve;
          sib.at = far;
          sib.dir = -1;
          queue.push_back(std::move(sib));
          it.curve = g.vertices[far].host_curve;
          it.at = far;
          it.dir = +1;
        }
        // A', B', V encountered mid-curve: pass through.
      }
    }
    if (it.cand.status == Candidate::Status::Growing)
      it.cand.status = Candidate::Status::Abandoned;  // hop cap
    out.candidates.push_back(std::move(it.cand));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adjustment and selection
// ---------------------------------------------------------------------------

namespace {

// Remove backtracking spikes (turns sharper than ~150 degrees); a fold in
// the seed polyline survives relaxation wherever the chain is slack.
std::vector<Vec2> unfold_polyline(std::vector<Vec2> pts) {
  bool changed = true;
  int guard = 64;
  while (changed && guard-- > 0) {
    changed = false;
    for (size_t i = 1; i + 1 < pts.size();) {
      Vec2 a = (pts[i] - pts[i - 1]).normalized();
      Vec2 b = (pts[i + 1] - pts[i]).normalized();
      if (a.dot(b) < -0.86) {
        pts.erase(pts.begin() + i);
        changed = true;
      } else {
        i++;
      }
    }
  }
  return pts;
}

apf::PathPolyline resample_open(const std::vector<Vec2>& pts, double spacing) {
  apf::PathPolyline out;
  out.spacing = spacing;
  if (pts.empty()) return out;
  out.points.push_back(pts[0]);
  double carry = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); i++) {
    Vec2 a = pts[i], b = pts[i + 1];
    double seg = dist(a, b);
    if (seg < 1e-12) continue;
    Vec2 dir = (b - a) / seg;
    double s = spacing - carry;
    while (s <= seg + 1e-12) {
      out.points.push_back(a + dir * s);
      s += spacing;
    }
    carry = seg - (s - spacing);
  }
  return out;
}

}  // namespace

AdjustResult adjust_candidate(const Candidate& cand, const PlanInput& in) {
  AdjustResult out;
  apf::PathPolyline path = resample_open(unfold_polyline(cand.points), in.spacing);
  if (path.size() < 2) {
    // Degenerate candidate (start nearly at target).
    out.ok = true;
    out.path = path;
    return out;
  }
  // Seeded candidates carry junction corners; tripled pull tension keeps the
  // chain taut enough to straighten them while staying inside the spacing
  // band (stretch = G_P/G_I).
  apf::FieldGains gains = in.gains;
  gains.g_p *= 3.0;
  apf::GridShrinkField field(*in.area, in.shrink.d_s, in.shrink.delta,
                             in.shrink.v_max, in.shrink.window);
  apf::RelaxContext ctx;
  ctx.field = &field;
  ctx.target = in.target;
  ctx.use_initial_circles = true;
  auto circles = vehicle::initial_circles(in.pose, in.r_min);
  ctx.circle_left = circles.first;
  ctx.circle_right = circles.second;
  ctx.heading = in.pose.heading();
  ctx.allow_add_remove = true;
  double cell = in.area->cell_size();
  auto audit = [&](const apf::PathPolyline& p) {
    for (int k = 1; k < p.size(); k++) {
      auto pr = field.probe(p.points[k], k);
      if (pr.dist < field.threshold(k) - 1.5 * cell) return false;
    }
    if (p.size() >= 2 && dist(p.points.back(), in.target) > in.spacing + 1e-9)
      return false;
    for (int k = 1; k + 1 < p.size(); k++)
      if (geom::circumradius(p.points[k - 1], p.points[k], p.points[k + 1]) <
          in.r_min * 0.95)
        return false;
    return true;
  };
  auto polish_tail = [&](apf::PathPolyline& p) {
    if (p.size() < 2) return;
    std::vector<Vec2> pts = p.points;
    if (dist(pts.back(), in.target) > in.spacing) pts.push_back(in.target);
    p = resample_open(pts, in.spacing);
  };
  auto smooth_open = [](std::vector<Vec2> pts, int passes) {
    for (int s = 0; s < passes; s++)
      for (size_t i = 1; i + 1 < pts.size(); i++)
        pts[i] = pts[i - 1] * 0.25 + pts[i] * 0.5 + pts[i + 1] * 0.25;
    return pts;
  };

  // Junction corners survive the relaxation as zero-tension equilibria;
  // smoothing between rounds removes them (see prm3 for the same loop).
  apf::RelaxResult rr = apf::relax_path(path, ctx, gains);
  if (rr.converged) polish_tail(path);
  for (int round = 0; round < 4 && rr.converged && !audit(path); round++) {
    path = resample_open(smooth_open(path.points, 2 + round), in.spacing);
    rr = apf::relax_path(path, ctx, gains);
    if (rr.converged) polish_tail(path);
  }
  if (!rr.converged || !audit(path)) return out;
  out.ok = true;
  out.path = std::move(path);
  return out;
}

PlanResult plan_path(const PlanInput& in) {
  PlanResult out;
  RegionGrid2 reduced = in.area->reduce(in.shrink.d_s);
  int ci, cj;
  if (!reduced.cell_of(in.pose.position(), ci, cj) ||
      reduced.at(ci, cj) != geom::Cell::Free) {
    out.failure = "robot outside the reduced unoccupied area";
    return out;
  }
  if (reduced.count(geom::Cell::Free) == 0) {
    out.failure = "reduced area empty";
    return out;
  }

  BoundaryCurves curves;
  try {
    curves = extract_boundary_curves(reduced);
  } catch (const std::exception& e) {
    out.failure = e.what();
    return out;
  }

  UnicycleState pose = in.pose;
  bool conflict = false;
  auto verts = classify_points(curves, in.target, pose, in.r_min, &conflict);
  GraphG graph = build_graph(curves, std::move(verts), pose, in.target, in.r_min);
  graph.tangent_conflict = conflict;
  GenerateOptions gopt;
  gopt.candidate_cap = in.candidate_cap;
  GenerateResult gen = generate_candidates(graph, gopt);
  out.candidates = gen.candidates;

  // Completed candidates by raw length (stable on ties).
  std::vector<int> done;
  for (size_t i = 0; i < gen.candidates.size(); i++)
    if (gen.candidates[i].status == Candidate::Status::Completed)
      done.push_back(int(i));
  if (done.empty()) {
    out.failure = "no completed candidate";
    return out;
  }
  std::stable_sort(done.begin(), done.end(), [&](int a, int b) {
    return gen.candidates[a].raw_length() < gen.candidates[b].raw_length();
  });

  if (in.fast_mode) {
    for (int id : done) {
      AdjustResult ar = adjust_candidate(gen.candidates[id], in);
      if (ar.ok) {
        out.ok = true;
        out.path = std::move(ar.path);
        out.chosen = id;
        return out;
      }
    }
    out.failure = "no candidate survived adjustment";
    return out;
  }

  double best_len = kInf;
  for (int id : done) {
    AdjustResult ar = adjust_candidate(gen.candidates[id], in);
    if (!ar.ok) continue;
    double len = ar.path.size() * in.spacing;
    if (len < best_len) {
      best_len = len;
      out.path = std::move(ar.path);
      out.chosen = id;
      out.ok = true;
    }
  }
  if (!out.ok) out.failure = "no candidate survived adjustment";
  return out;
}

std::string graph_debug_dump(const GraphG& g) {
  std::ostringstream os;
  auto tname = [](VertexType t) {
    switch (t) {
      case VertexType::Target: return "T";
      case VertexType::Start: return "start";
      case VertexType::A: return "A";
      case VertexType::APrime: return "A'";
      case VertexType::B: return "B";
      case VertexType::BPrime: return "B'";
      case VertexType::S: return "S";
      case VertexType::V: return "V";
    }
    return "?";
  };
  for (size_t i = 0; i < g.vertices.size(); i++) {
    const auto& v = g.vertices[i];
    os << "vertex " << i << " " << tname(v.type) << " " << v.pos.x << " "
       << v.pos.y;
    if (v.host_curve >= 0) os << " curve " << v.host_curve;
    if (v.host_circle >= 0) os << " circle " << v.host_circle;
    os << "\n";
  }
  for (size_t i = 0; i < g.vertices.size(); i++)
    if (g.vertices[i].link >= 0 &&
        (g.vertices[i].type == VertexType::A || g.vertices[i].type == VertexType::B))
      os << "segment " << i << " " << g.vertices[i].link << "\n";
  for (size_t c = 0; c < g.curves.curves.size(); c++)
    os << "curve " << c << " points " << g.curves.curves[c].size() << "\n";
  return os.str();
}

}  // namespace mrnav::tangent_graph
