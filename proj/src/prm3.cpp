#include "mrnav/prm3.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <stdexcept>

namespace mrnav::prm3 {

namespace {
constexpr double kInf = 1e20;
}

std::vector<Vec3> sample_free(const RegionGrid3& region, int n, Rng& rng) {
  std::vector<int> free_cells;
  const auto& cells = region.cells();
  for (size_t c = 0; c < cells.size(); c++)
    if (cells[c] == geom::Cell::Free) free_cells.push_back(int(c));
  if (free_cells.empty())
    throw std::invalid_argument("sample_free: free set is empty");
  std::vector<Vec3> out;
  out.reserve(n);
  int nx = region.nx(), ny = region.ny();
  double cell = region.cell_size();
  for (int s = 0; s < n; s++) {
    int c = free_cells[rng.uniform_int(free_cells.size())];
    int k = c / (nx * ny);
    int j = (c / nx) % ny;
    int i = c % nx;
    Vec3 p = region.cell_center(i, j, k);
    p.x += (rng.uniform01() - 0.5) * cell;
    p.y += (rng.uniform01() - 0.5) * cell;
    p.z += (rng.uniform01() - 0.5) * cell;
    out.push_back(p);
  }
  return out;
}

Prm3Graph connect_prm(const std::vector<Vec3>& samples, const Vec3& init,
                      const Vec3& init_dir, const Vec3& goal,
                      const Prm3Params& p, const RegionGrid3& region) {
  Prm3Graph g;
  g.vertices = samples;
  g.init = int(g.vertices.size());
  g.vertices.push_back(init);
  g.goal = int(g.vertices.size());
  g.vertices.push_back(goal);

  auto neighbors_of = [&](int v, int count) {
    std::vector<std::pair<double, int>> ds;
    for (int o = 0; o < int(g.vertices.size()); o++) {
      if (o == v) continue;
      ds.push_back({dist(g.vertices[v], g.vertices[o]), o});
    }
    std::sort(ds.begin(), ds.end());
    if (int(ds.size()) > count) ds.resize(count);
    return ds;
  };

  std::set<std::pair<int, int>> present;
  auto add_edge = [&](int a, int b) {
    auto key = std::minmax(a, b);
    if (!present.insert({key.first, key.second}).second) return;
    double len = dist(g.vertices[a], g.vertices[b]);
    g.edges.push_back({a, b, len});
  };

  double cone = std::asin(std::clamp(p.spacing * p.u_max / (2.0 * p.v), 0.0, 1.0));
  for (int v = 0; v < int(g.vertices.size()); v++) {
    if (v == g.init || v == g.goal) continue;
    for (auto& [d, o] : neighbors_of(v, p.n_neighbors)) {
      if (o == g.init || o == g.goal) continue;
      if (region.segment_clear(g.vertices[v], g.vertices[o])) add_edge(v, o);
    }
  }
  // A4: edges leaving the start respect the initial-heading cone.
  for (auto& [d, o] : neighbors_of(g.init, p.n_neighbors)) {
    if (o == g.init) continue;
    Vec3 zeta = g.vertices[o] - g.vertices[g.init];
    double zn = zeta.norm();
    if (zn < 1e-12) continue;
    double ang = std::acos(std::clamp(init_dir.dot(zeta) / zn, -1.0, 1.0));
    if (ang > cone) continue;
    if (region.segment_clear(g.vertices[g.init], g.vertices[o]))
      add_edge(g.init, o);
  }
  for (auto& [d, o] : neighbors_of(g.goal, p.n_neighbors)) {
    if (o == g.goal) continue;
    if (region.segment_clear(g.vertices[g.goal], g.vertices[o]))
      add_edge(g.goal, o);
  }

  g.adj.assign(g.vertices.size(), {});
  for (const auto& e : g.edges) {
    g.adj[e.a].push_back({e.b, e.len});
    g.adj[e.b].push_back({e.a, e.len});
  }
  return g;
}

std::optional<std::vector<int>> shortest_prm_path(const Prm3Graph& g) {
  if (g.init < 0 || g.goal < 0) return std::nullopt;
  size_t n = g.vertices.size();
  std::vector<double> d(n, kInf);
  std::vector<int> prev(n, -1);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  d[g.init] = 0.0;
  pq.push({0.0, g.init});
  while (!pq.empty()) {
    auto [dd, v] = pq.top();
    pq.pop();
    if (dd > d[v] + 1e-15) continue;
    if (v == g.goal) break;
    for (auto& [o, w] : g.adj[v]) {
      double nd = dd + w;
      if (nd < d[o] - 1e-15) {
        d[o] = nd;
        prev[o] = v;
        pq.push({nd, o});
      }
    }
  }
  if (d[g.goal] >= kInf) return std::nullopt;
  std::vector<int> path;
  for (int v = g.goal; v != -1; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

Path3 resample_equal(const std::vector<Vec3>& verts, double spacing) {
  Path3 out;
  out.spacing = spacing;
  if (verts.empty()) return out;
  out.points.push_back(verts[0]);
  double carry = 0.0;
  for (size_t i = 0; i + 1 < verts.size(); i++) {
    Vec3 a = verts[i], b = verts[i + 1];
    double seg = dist(a, b);
    if (seg < 1e-12) continue;
    Vec3 dir = (b - a) / seg;
    double s = spacing - carry;
    while (s <= seg + 1e-12) {
      out.points.push_back(a + dir * s);
      s += spacing;
    }
    carry = seg - (s - spacing);
  }
  if (out.points.size() < 2) out.points.push_back(verts.back());
  return out;
}

RegionGrid3 valid_area(const RegionGrid3& area, int k, const ShrinkParams& p,
                       const std::vector<Path3>& other_plans) {
  RegionGrid3 out = sensing::shrink_for_time(area, k, p);
  for (const auto& plan : other_plans) {
    if (plan.empty()) continue;
    out.rasterize_sphere(plan.at_step(k), p.r_r, geom::Cell::Occupied);
  }
  return out;
}

double ValidAreaQuery::clearance(const Vec3& q, int k) const {
  double c = area_.clearance(q) - sensing::shrink_margin(k, p_);
  for (const auto& plan : others_) {
    if (plan.empty()) continue;
    c = std::min(c, dist(q, plan.at_step(k)) - p_.r_r);
  }
  return c;
}

Vec3 ValidAreaQuery::away(const Vec3& q, int k) const {
  double grid_c = area_.clearance(q) - sensing::shrink_margin(k, p_);
  double best = grid_c;
  int best_robot = -1;
  for (size_t r = 0; r < others_.size(); r++) {
    if (others_[r].empty()) continue;
    double c = dist(q, others_[r].at_step(k)) - p_.r_r;
    if (c < best) {
      best = c;
      best_robot = int(r);
    }
  }
  if (best_robot >= 0) {
    Vec3 d = q - others_[best_robot].at_step(k);
    double n = d.norm();
    return n > 1e-12 ? d / n : Vec3{1, 0, 0};
  }
  Vec3 toward = area_.direction_to_set(q);
  Vec3 away = -toward;
  return away.norm2() > 0.25 ? away : Vec3{0, 0, 0};
}

Relax3Result relax3(Path3& path, const ValidAreaQuery& q, const InitialTorus& torus,
                    const Vec3& target, const apf::FieldGains& g) {
  Relax3Result out;
  if (path.size() <= 1) {
    out.converged = true;
    return out;
  }
  const double L = path.spacing;
  const double d_s = q.shrink().d_s;
  std::vector<Vec3> vel(path.points.size(), Vec3{});
  std::vector<Vec3> force(path.points.size());

  auto total_force = [&](int k) {
    const auto& p = path.points;
    int n = int(p.size()) - 1;
    Vec3 f{};
    // F_I
    {
      Vec3 l = p[k - 1] - p[k];
      double len = l.norm();
      if (len > 1e-12) f += l * (g.g_i * (len - L) / len);
      if (k != n) {
        Vec3 l2 = p[k] - p[k + 1];
        double len2 = l2.norm();
        if (len2 > 1e-12) f -= l2 * (g.g_i * (len2 - L) / len2);
      }
    }
    // F_R against hat-A(t,k)
    {
      double c = q.clearance(p[k], k);
      if (c <= d_s) f += q.away(p[k], k) * (g.g_r * (d_s - c));
    }
    // F_P
    if (k == n) f += (target - p[k]).normalized() * g.g_p;
    // F_C off the initial torus
    {
      bool degen = false;
      Vec3 cb = torus.closest_on_base(p[k], &degen);
      Vec3 h = cb - p[k];
      double hn = h.norm();
      if (hn < 1e-12) {
        f += Vec3{1, 0, 0} * (g.g_c * torus.r_min);
      } else if (hn <= torus.r_min) {
        f += h * (g.g_c * (1.0 - torus.r_min / hn));
      }
    }
    return f;
  };

  // Same evaluation order as apf::relax_path: move, then measure forces.
  for (int sweep = 0; sweep < g.max_sweeps; sweep++) {
    out.sweeps = sweep + 1;
    int n = path.size() - 1;
    for (int k = 1; k <= n; k++) path.points[k] += vel[k];
    double fmax = 0.0;
    for (int k = 1; k <= n; k++) {
      force[k] = total_force(k);
      fmax = std::max(fmax, force[k].norm());
    }
    if (fmax < g.f_th) {
      out.converged = true;
      break;
    }
    double vcap = 0.25 * L;
    for (int k = 1; k <= n; k++) {
      vel[k] = vel[k] * g.g_n + force[k];
      double vn = vel[k].norm();
      if (vn > vcap) vel[k] = vel[k] * (vcap / vn);
    }
    double dlast = dist(path.points.back(), target);
    if (dlast < g.l_under && path.size() > 2) {
      path.points.pop_back();
      vel.pop_back();
      force.pop_back();
    } else if (dlast > g.l_over) {
      Vec3 dirs = (target - path.points.back()).normalized();
      path.points.push_back(path.points.back() + dirs * L);
      vel.push_back({});
      force.push_back({});
    }
  }
  return out;
}

Plan3Result plan_step3(const Plan3Input& in) {
  Plan3Result out;
  // Roadmap seeds carry vertex corners; boosted tension straightens them
  // (see tangent_graph::adjust_candidate).
  apf::FieldGains gains = in.gains;
  gains.g_p *= 3.0;
  ValidAreaQuery query(*in.area, in.shrink, in.other_plans);
  InitialTorus torus = vehicle::make_initial_torus(
      in.state, in.params.u_max > 0.0 ? in.params.v / in.params.u_max : 0.0);
  double cell = in.area->cell_size();

  double r_min = in.params.u_max > 0.0 ? in.params.v / in.params.u_max : 0.0;
  auto audit = [&](const Path3& path) {
    for (int k = 1; k < path.size(); k++)
      if (query.clearance(path.points[k], k) < in.shrink.d_s - 1.5 * cell)
        return false;
    if (path.size() >= 2 &&
        dist(path.points.back(), in.target) > in.params.spacing + 1e-9)
      return false;
    for (int k = 1; k + 1 < path.size(); k++)
      if (geom::circumradius(path.points[k - 1], path.points[k],
                             path.points[k + 1]) < r_min * 0.95)
        return false;
    return true;
  };

  // A kink whose springs sit at rest length is an exact equilibrium of the
  // fields (the chain carries no bending moment and the kink blocks tension),
  // so seed corners must be smoothed away between rounds rather than relied
  // on the relaxation to remove.
  auto smooth_open = [](std::vector<Vec3> pts, int passes) {
    for (int s = 0; s < passes; s++)
      for (size_t i = 1; i + 1 < pts.size(); i++)
        pts[i] = pts[i - 1] * 0.25 + pts[i] * 0.5 + pts[i + 1] * 0.25;
    return pts;
  };
  // Tail polish: the add/remove rule leaves the tail anywhere inside
  // (l_under, l_over); appending the target and resampling restores both the
  // target-reaching bound and the exact spacing.
  auto polish_tail = [&](Path3& path) {
    if (path.size() < 2) return;
    if (dist(path.points.back(), in.target) > in.params.spacing)
      path.points.push_back(in.target);
    path = resample_equal(path.points, in.params.spacing);
  };
  auto relax_rounds = [&](Path3& path) {
    Relax3Result rr = relax3(path, query, torus, in.target, gains);
    if (rr.converged) polish_tail(path);
    for (int round = 0; round < 4 && rr.converged && !audit(path); round++) {
      path = resample_equal(smooth_open(path.points, 2 + round),
                            in.params.spacing);
      rr = relax3(path, query, torus, in.target, gains);
      if (rr.converged) polish_tail(path);
    }
    return rr;
  };

  // Reuse the previous plan when it still relaxes to a safe path.
  if (in.previous.size() >= 2) {
    Path3 seed = in.previous;
    seed.points[0] = in.state.s;
    if (seed.size() >= 3 &&
        dist(seed.points[0], seed.points[1]) < 0.5 * seed.spacing)
      seed.points.erase(seed.points.begin() + 1);
    Relax3Result rr = relax_rounds(seed);
    if (rr.converged && audit(seed)) {
      out.ok = true;
      out.path = std::move(seed);
      return out;
    }
  }

  // PRM seed in R[A, d_s + T delta V_max].
  out.used_prm = true;
  RegionGrid3 sampling_region =
      in.area->reduce(in.shrink.d_s + in.shrink.window * in.shrink.delta * in.shrink.v_max);
  for (int attempt = 0; attempt < in.prm_attempts; attempt++) {
    std::vector<Vec3> samples;
    try {
      samples = sample_free(sampling_region, in.params.n_samples, *in.rng);
    } catch (const std::exception& e) {
      out.failure = e.what();
      return out;
    }
    Prm3Graph graph = connect_prm(samples, in.state.s, in.state.i, in.target,
                                  in.params, sampling_region);
    auto vp = shortest_prm_path(graph);
    if (!vp) {
      out.failure = "roadmap disconnected";
      continue;
    }
    std::vector<Vec3> verts;
    for (int v : *vp) verts.push_back(graph.vertices[v]);
    Path3 rough = resample_equal(verts, in.params.spacing);
    Relax3Result rr = relax_rounds(rough);
    if (rr.converged && audit(rough)) {
      out.ok = true;
      out.path = std::move(rough);
      out.failure.clear();
      return out;
    }
    out.failure = "relaxation failed";
  }
  return out;
}

}  // namespace mrnav::prm3
