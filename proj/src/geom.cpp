#include "mrnav/geom.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <stdexcept>

namespace mrnav::geom {

namespace {
constexpr double kInf = 1e20;
}

// ---------------------------------------------------------------------------
// PolyObstacle
// ---------------------------------------------------------------------------

PolyObstacle PolyObstacle::translated(const Vec2& d) const {
  PolyObstacle out = *this;
  for (auto& v : out.vertices) v += d;
  return out;
}

Vec2 PolyObstacle::centroid() const {
  // Area-weighted centroid; falls back to vertex mean for degenerate loops.
  double a2 = 0.0;
  Vec2 c{0.0, 0.0};
  size_t n = vertices.size();
  for (size_t i = 0; i < n; i++) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % n];
    double w = p.cross(q);
    a2 += w;
    c += (p + q) * w;
  }
  if (std::abs(a2) < 1e-12) {
    Vec2 m{0.0, 0.0};
    for (const auto& v : vertices) m += v;
    return m / double(n);
  }
  return c / (3.0 * a2);
}

double PolyObstacle::area() const {
  double a2 = 0.0;
  size_t n = vertices.size();
  for (size_t i = 0; i < n; i++)
    a2 += vertices[i].cross(vertices[(i + 1) % n]);
  return 0.5 * a2;
}

PolyObstacle make_regular_polygon(const Vec2& center, double radius, int n,
                                  const Vec2& velocity) {
  PolyObstacle o;
  o.velocity = velocity;
  o.vertices.reserve(n);
  for (int i = 0; i < n; i++) {
    double a = 2.0 * M_PI * i / n;
    o.vertices.push_back(center + Vec2{radius * std::cos(a), radius * std::sin(a)});
  }
  return o;
}

// ---------------------------------------------------------------------------
// Planar predicates
// ---------------------------------------------------------------------------

Vec2 closest_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  if (len2 <= 0.0) return a;
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + ab * t;
}

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return dist(p, closest_point_segment(p, a, b));
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool in = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[j];
    const Vec2& b = poly[i];
    if ((b.y > p.y) != (a.y > p.y)) {
      double xcross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < xcross) in = !in;
    }
  }
  return in;
}

double dist_point_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly) {
  double best = kInf;
  size_t n = poly.size();
  for (size_t i = 0; i < n; i++)
    best = std::min(best, dist_point_segment(p, poly[i], poly[(i + 1) % n]));
  return best;
}

Vec2 closest_point_polygon_boundary(const Vec2& p, const std::vector<Vec2>& poly) {
  double best = kInf;
  Vec2 bp = poly.empty() ? p : poly[0];
  size_t n = poly.size();
  for (size_t i = 0; i < n; i++) {
    Vec2 q = closest_point_segment(p, poly[i], poly[(i + 1) % n]);
    double d = dist(p, q);
    if (d < best) {
      best = d;
      bp = q;
    }
  }
  return bp;
}

double dist_point_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  if (point_in_polygon(p, poly)) return 0.0;
  return dist_point_polygon_boundary(p, poly);
}

double dist_segment_polygon(const Vec2& a, const Vec2& b,
                            const std::vector<Vec2>& poly) {
  if (point_in_polygon(a, poly) || point_in_polygon(b, poly)) return 0.0;
  double best = kInf;
  size_t n = poly.size();
  for (size_t i = 0; i < n; i++) {
    const Vec2& q0 = poly[i];
    const Vec2& q1 = poly[(i + 1) % n];
    if (segment_segment_intersect(a, b, q0, q1)) return 0.0;
    best = std::min(best, dist_point_segment(q0, a, b));
    best = std::min(best, dist_point_segment(q1, a, b));
    best = std::min(best, dist_point_segment(a, q0, q1));
    best = std::min(best, dist_point_segment(b, q0, q1));
  }
  return best;
}

std::optional<double> ray_segment_intersect(const Vec2& origin, const Vec2& dir,
                                            const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double denom = dir.cross(ab);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  Vec2 ao = a - origin;
  double t = ao.cross(ab) / denom;
  double s = ao.cross(dir) / denom;
  if (t >= 0.0 && s >= 0.0 && s <= 1.0) return t;
  return std::nullopt;
}

std::optional<double> segment_segment_intersect(const Vec2& p0, const Vec2& p1,
                                                const Vec2& q0, const Vec2& q1) {
  Vec2 d = p1 - p0;
  Vec2 e = q1 - q0;
  double denom = d.cross(e);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  Vec2 w = q0 - p0;
  double t = w.cross(e) / denom;
  double s = w.cross(d) / denom;
  if (t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0) return t;
  return std::nullopt;
}

double polyline_length(const std::vector<Vec2>& pts, bool closed) {
  double len = 0.0;
  for (size_t i = 1; i < pts.size(); i++) len += dist(pts[i - 1], pts[i]);
  if (closed && pts.size() > 2) len += dist(pts.back(), pts.front());
  return len;
}

double circumradius(const Vec2& a, const Vec2& b, const Vec2& c) {
  double la = dist(b, c), lb = dist(a, c), lc = dist(a, b);
  double cr = (b - a).cross(c - a);
  if (std::abs(cr) < 1e-15) return kInf;
  return la * lb * lc / (2.0 * std::abs(cr));
}

double circumradius(const Vec3& a, const Vec3& b, const Vec3& c) {
  double la = dist(b, c), lb = dist(a, c), lc = dist(a, b);
  double cr = (b - a).cross(c - a).norm();
  if (cr < 1e-15) return kInf;
  return la * lb * lc / (2.0 * cr);
}

// ---------------------------------------------------------------------------
// 1D squared distance transform (lower envelope of parabolas) with argmin.
// ---------------------------------------------------------------------------

namespace {

void dt1d(const std::vector<double>& f, int n, std::vector<double>& d,
          std::vector<int>& arg, std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; q++) {
    double s;
    while (true) {
      int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        k--;
      } else {
        break;
      }
    }
    k++;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; q++) {
    while (z[k + 1] < q) k++;
    int p = v[k];
    d[q] = double(q - p) * (q - p) + f[p];
    arg[q] = p;
  }
}

// Exact EDT over an arbitrary-rank grid, specialized below for 2D/3D.
struct Edt2Result {
  std::vector<float> dist;     // meters
  std::vector<int32_t> feat;   // linear index of nearest seed, -1 if none
};

Edt2Result edt2(const std::vector<uint8_t>& seed, int nx, int ny, double cell) {
  const int n = nx * ny;
  std::vector<double> g(n, kInf);   // squared distance within row
  std::vector<int32_t> fx(n, -1);
  // Row sweeps: nearest seed column in each row.
  for (int j = 0; j < ny; j++) {
    int last = -1;
    for (int i = 0; i < nx; i++) {
      int id = j * nx + i;
      if (seed[id]) last = i;
      if (last >= 0) {
        double dd = double(i - last);
        g[id] = dd * dd;
        fx[id] = last;
      }
    }
    last = -1;
    for (int i = nx - 1; i >= 0; i--) {
      int id = j * nx + i;
      if (seed[id]) last = i;
      if (last >= 0) {
        double dd = double(last - i);
        if (dd * dd < g[id]) {
          g[id] = dd * dd;
          fx[id] = last;
        }
      }
    }
  }
  // Column envelope.
  Edt2Result out;
  out.dist.assign(n, float(kInf));
  out.feat.assign(n, -1);
  std::vector<double> f(ny), d(ny);
  std::vector<int> arg(ny), v(ny);
  std::vector<double> z(ny + 1);
  for (int i = 0; i < nx; i++) {
    for (int j = 0; j < ny; j++) f[j] = g[j * nx + i];
    dt1d(f, ny, d, arg, v, z);
    for (int j = 0; j < ny; j++) {
      int id = j * nx + i;
      if (d[j] >= kInf) continue;
      out.dist[id] = float(std::sqrt(d[j]) * cell);
      out.feat[id] = arg[j] * nx + fx[arg[j] * nx + i];
    }
  }
  return out;
}

Edt2Result edt3(const std::vector<uint8_t>& seed, int nx, int ny, int nz,
                double cell) {
  const int n = nx * ny * nz;
  auto id3 = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  std::vector<double> g(n, kInf);
  std::vector<int32_t> fx(n, -1);
  for (int k = 0; k < nz; k++)
    for (int j = 0; j < ny; j++) {
      int last = -1;
      for (int i = 0; i < nx; i++) {
        int id = id3(i, j, k);
        if (seed[id]) last = i;
        if (last >= 0) {
          double dd = double(i - last);
          g[id] = dd * dd;
          fx[id] = last;
        }
      }
      last = -1;
      for (int i = nx - 1; i >= 0; i--) {
        int id = id3(i, j, k);
        if (seed[id]) last = i;
        if (last >= 0) {
          double dd = double(last - i);
          if (dd * dd < g[id]) {
            g[id] = dd * dd;
            fx[id] = last;
          }
        }
      }
    }
  // y pass
  std::vector<double> g2(n, kInf);
  std::vector<int32_t> fy(n, -1);
  {
    std::vector<double> f(ny), d(ny);
    std::vector<int> arg(ny), v(ny);
    std::vector<double> z(ny + 1);
    for (int k = 0; k < nz; k++)
      for (int i = 0; i < nx; i++) {
        for (int j = 0; j < ny; j++) f[j] = g[id3(i, j, k)];
        dt1d(f, ny, d, arg, v, z);
        for (int j = 0; j < ny; j++) {
          int id = id3(i, j, k);
          g2[id] = d[j];
          fy[id] = arg[j];
        }
      }
  }
  // z pass
  Edt2Result out;
  out.dist.assign(n, float(kInf));
  out.feat.assign(n, -1);
  {
    std::vector<double> f(nz), d(nz);
    std::vector<int> arg(nz), v(nz);
    std::vector<double> z(nz + 1);
    for (int j = 0; j < ny; j++)
      for (int i = 0; i < nx; i++) {
        for (int k = 0; k < nz; k++) f[k] = g2[id3(i, j, k)];
        dt1d(f, nz, d, arg, v, z);
        for (int k = 0; k < nz; k++) {
          int id = id3(i, j, k);
          if (d[k] >= kInf) continue;
          int zz = arg[k];
          int yy = fy[id3(i, j, zz)];
          int xx = fx[id3(i, yy, zz)];
          out.dist[id] = float(std::sqrt(d[k]) * cell);
          out.feat[id] = id3(xx, yy, zz);
        }
      }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RegionGrid2
// ---------------------------------------------------------------------------

RegionGrid2::RegionGrid2(Vec2 origin, double cell_size, int nx, int ny, Cell fill)
    : origin_(origin), cell_(cell_size), nx_(nx), ny_(ny),
      cells_(size_t(nx) * ny, fill) {
  if (cell_size <= 0.0) throw std::invalid_argument("cell_size must be > 0");
  if (nx <= 0 || ny <= 0) throw std::invalid_argument("grid dims must be > 0");
}

bool RegionGrid2::in_bounds(const Vec2& p) const {
  return p.x >= origin_.x && p.y >= origin_.y && p.x <= origin_.x + nx_ * cell_ &&
         p.y <= origin_.y + ny_ * cell_;
}

bool RegionGrid2::cell_of(const Vec2& p, int& i, int& j) const {
  i = int(std::floor((p.x - origin_.x) / cell_));
  j = int(std::floor((p.y - origin_.y) / cell_));
  bool ok = i >= 0 && i < nx_ && j >= 0 && j < ny_;
  i = std::clamp(i, 0, nx_ - 1);
  j = std::clamp(j, 0, ny_ - 1);
  return ok && in_bounds(p);
}

Cell RegionGrid2::at_point(const Vec2& p) const {
  int i, j;
  if (!cell_of(p, i, j)) return Cell::Unknown;
  return at(i, j);
}

void RegionGrid2::fill(Cell c) {
  std::fill(cells_.begin(), cells_.end(), c);
  dirty_ = true;
}

void RegionGrid2::rasterize_polygon(const std::vector<Vec2>& poly, Cell value) {
  if (poly.size() < 3) return;
  for (int j = 0; j < ny_; j++) {
    double y = origin_.y + (j + 0.5) * cell_;
    std::vector<double> xs;
    size_t n = poly.size();
    for (size_t e = 0; e < n; e++) {
      const Vec2& a = poly[e];
      const Vec2& b = poly[(e + 1) % n];
      if ((b.y > y) != (a.y > y))
        xs.push_back(b.x + (y - b.y) * (a.x - b.x) / (a.y - b.y));
    }
    std::sort(xs.begin(), xs.end());
    for (size_t s = 0; s + 1 < xs.size(); s += 2) {
      int i0 = int(std::ceil((xs[s] - origin_.x) / cell_ - 0.5));
      int i1 = int(std::floor((xs[s + 1] - origin_.x) / cell_ - 0.5));
      i0 = std::max(i0, 0);
      i1 = std::min(i1, nx_ - 1);
      for (int i = i0; i <= i1; i++) cells_[idx(i, j)] = value;
    }
  }
  dirty_ = true;
}

void RegionGrid2::rasterize_disk(const Vec2& center, double radius, Cell value) {
  int i0 = std::max(0, int(std::floor((center.x - radius - origin_.x) / cell_)));
  int i1 = std::min(nx_ - 1, int(std::floor((center.x + radius - origin_.x) / cell_)));
  int j0 = std::max(0, int(std::floor((center.y - radius - origin_.y) / cell_)));
  int j1 = std::min(ny_ - 1, int(std::floor((center.y + radius - origin_.y) / cell_)));
  double r2 = radius * radius;
  for (int j = j0; j <= j1; j++)
    for (int i = i0; i <= i1; i++)
      if ((cell_center(i, j) - center).norm2() <= r2) cells_[idx(i, j)] = value;
  dirty_ = true;
}

void RegionGrid2::rebuild_distance() const {
  const int n = nx_ * ny_;
  std::vector<uint8_t> nonfree(n), freec(n);
  for (int c = 0; c < n; c++) {
    nonfree[c] = cells_[c] != Cell::Free;
    freec[c] = cells_[c] == Cell::Free;
  }
  Edt2Result a = edt2(nonfree, nx_, ny_, cell_);
  dist_nonfree_ = std::move(a.dist);
  feat_nonfree_ = std::move(a.feat);
  Edt2Result b = edt2(freec, nx_, ny_, cell_);
  dist_free_ = std::move(b.dist);
  feat_free_ = std::move(b.feat);
  dirty_ = false;
}

void RegionGrid2::ensure_distance() const {
  if (dirty_ || dist_nonfree_.empty()) rebuild_distance();
}

SetDistance RegionGrid2::distance_to_set(const Vec2& p) const {
  SetDistance out;
  int i, j;
  if (!cell_of(p, i, j)) {
    out.out_of_bounds = true;
    out.dist = 0.0;
    return out;
  }
  ensure_distance();
  int id = idx(i, j);
  if (feat_nonfree_[id] < 0) {
    out.has_target = false;
    out.dist = std::numeric_limits<double>::infinity();
    return out;
  }
  out.has_target = true;
  if (cells_[id] != Cell::Free) {
    out.dist = 0.0;
    out.nearest = p;
    return out;
  }
  int f = feat_nonfree_[id];
  out.nearest = cell_center(f % nx_, f / nx_);
  out.dist = dist(p, out.nearest);
  return out;
}

double RegionGrid2::border_distance(const Vec2& p) const {
  double dx = std::min(p.x - origin_.x, origin_.x + nx_ * cell_ - p.x);
  double dy = std::min(p.y - origin_.y, origin_.y + ny_ * cell_ - p.y);
  return std::min(dx, dy);
}

double RegionGrid2::clearance(const Vec2& p) const {
  SetDistance d = distance_to_set(p);
  if (d.out_of_bounds) return 0.0;
  return std::min(d.dist, border_distance(p));
}

double RegionGrid2::clearance_interp(const Vec2& p, Vec2* grad) const {
  if (!in_bounds(p)) {
    if (grad) *grad = {0.0, 0.0};
    return 0.0;
  }
  ensure_distance();
  double fx = (p.x - origin_.x) / cell_ - 0.5;
  double fy = (p.y - origin_.y) / cell_ - 0.5;
  int i0 = std::clamp(int(std::floor(fx)), 0, nx_ - 2);
  int j0 = std::clamp(int(std::floor(fy)), 0, ny_ - 2);
  double tx = std::clamp(fx - i0, 0.0, 1.0);
  double ty = std::clamp(fy - j0, 0.0, 1.0);
  double f00 = dist_nonfree_[idx(i0, j0)];
  double f10 = dist_nonfree_[idx(i0 + 1, j0)];
  double f01 = dist_nonfree_[idx(i0, j0 + 1)];
  double f11 = dist_nonfree_[idx(i0 + 1, j0 + 1)];
  double v = f00 * (1 - tx) * (1 - ty) + f10 * tx * (1 - ty) +
             f01 * (1 - tx) * ty + f11 * tx * ty;
  if (grad) {
    grad->x = ((f10 - f00) * (1 - ty) + (f11 - f01) * ty) / cell_;
    grad->y = ((f01 - f00) * (1 - tx) + (f11 - f10) * tx) / cell_;
  }
  return std::min(v, border_distance(p));
}

Vec2 RegionGrid2::direction_to_set(const Vec2& p) const {
  int i, j;
  if (!cell_of(p, i, j)) return {0.0, 0.0};
  ensure_distance();
  int id = idx(i, j);
  if (cells_[id] == Cell::Free) {
    int f = feat_nonfree_[id];
    if (f < 0) return {0.0, 0.0};
    Vec2 d = cell_center(f % nx_, f / nx_) - p;
    return d.normalized();
  }
  // Inside the set: deeper means away from the nearest free cell.
  int f = feat_free_[id];
  if (f < 0) return {0.0, 0.0};
  Vec2 toward_free = (cell_center(f % nx_, f / nx_) - p).normalized();
  if (toward_free.norm2() < 0.25) toward_free = {1.0, 0.0};
  return -toward_free;
}

RegionGrid2 RegionGrid2::enlarge(double d) const {
  if (d < 0.0) throw std::invalid_argument("enlarge: d must be >= 0");
  ensure_distance();
  RegionGrid2 out = *this;
  for (int c = 0; c < nx_ * ny_; c++)
    if (out.cells_[c] == Cell::Free && dist_nonfree_[c] <= d + 1e-12)
      out.cells_[c] = Cell::Occupied;
  out.dirty_ = true;
  return out;
}

RegionGrid2 RegionGrid2::reduce(double d) const {
  if (d < 0.0) throw std::invalid_argument("reduce: d must be >= 0");
  ensure_distance();
  RegionGrid2 out = *this;
  for (int j = 0; j < ny_; j++)
    for (int i = 0; i < nx_; i++) {
      int c = idx(i, j);
      if (cells_[c] != Cell::Free) continue;
      double border = cell_ * (std::min(std::min(i, nx_ - 1 - i),
                                        std::min(j, ny_ - 1 - j)) + 0.5);
      if (std::min(double(dist_nonfree_[c]), border) < d - 1e-12)
        out.cells_[c] = Cell::Occupied;
    }
  out.dirty_ = true;
  return out;
}

namespace {

// Amanatides-Woo traversal; visitor returns true to continue.
template <typename F>
void walk_cells_2d(const Vec2& origin, double cell, int nx, int ny, Vec2 a,
                   Vec2 b, F&& visit) {
  auto cell_idx = [&](const Vec2& p, int& i, int& j) {
    i = std::clamp(int(std::floor((p.x - origin.x) / cell)), 0, nx - 1);
    j = std::clamp(int(std::floor((p.y - origin.y) / cell)), 0, ny - 1);
  };
  int i, j, ie, je;
  cell_idx(a, i, j);
  cell_idx(b, ie, je);
  if (!visit(i, j)) return;
  Vec2 d = b - a;
  double len = d.norm();
  if (len <= 0.0) return;
  int step_x = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  int step_y = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  double tdx = step_x != 0 ? cell / std::abs(d.x) : kInf;
  double tdy = step_y != 0 ? cell / std::abs(d.y) : kInf;
  auto first_t = [&](double p0, double dp, int ic, int step) {
    if (step == 0) return kInf;
    double boundary = ((step > 0) ? (ic + 1) : ic) * cell;
    return (boundary - p0) / dp;
  };
  double tmx = first_t(a.x - origin.x, d.x, i, step_x);
  double tmy = first_t(a.y - origin.y, d.y, j, step_y);
  int guard = 2 * (nx + ny) + 8;
  while ((i != ie || j != je) && guard-- > 0) {
    if (tmx <= tmy) {
      i += step_x;
      tmx += tdx;
    } else {
      j += step_y;
      tmy += tdy;
    }
    if (i < 0 || i >= nx || j < 0 || j >= ny) return;
    if (!visit(i, j)) return;
    if (tmx > 1.0 + 1e-12 && tmy > 1.0 + 1e-12) break;
  }
}

}  // namespace

bool RegionGrid2::segment_clear(const Vec2& a, const Vec2& b) const {
  if (!in_bounds(a) || !in_bounds(b)) return false;
  bool clear = true;
  auto check = [&](int i, int j) {
    if (cells_[idx(i, j)] != Cell::Free) {
      clear = false;
      return false;
    }
    return true;
  };
  Vec2 d = b - a;
  if (d.norm() <= 0.0) {
    int i, j;
    cell_of(a, i, j);
    check(i, j);
    return clear;
  }
  // Two traversals nudged to either side make edge/corner grazing inclusive,
  // so cells merely touched by the segment still count as crossed.
  Vec2 n = d.perp().normalized() * (1e-7 * cell_);
  for (const Vec2& off : {n, -n}) {
    if (!clear) break;
    walk_cells_2d(origin_, cell_, nx_, ny_, a + off, b + off, check);
  }
  return clear;
}

int RegionGrid2::count(Cell c) const {
  return int(std::count(cells_.begin(), cells_.end(), c));
}

double RegionGrid2::free_area() const {
  return count(Cell::Free) * cell_ * cell_;
}

// ---------------------------------------------------------------------------
// RegionGrid3
// ---------------------------------------------------------------------------

RegionGrid3::RegionGrid3(Vec3 origin, double cell_size, int nx, int ny, int nz,
                         Cell fill)
    : origin_(origin), cell_(cell_size), nx_(nx), ny_(ny), nz_(nz),
      cells_(size_t(nx) * ny * nz, fill) {
  if (cell_size <= 0.0) throw std::invalid_argument("cell_size must be > 0");
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw std::invalid_argument("grid dims must be > 0");
}

bool RegionGrid3::in_bounds(const Vec3& p) const {
  return p.x >= origin_.x && p.y >= origin_.y && p.z >= origin_.z &&
         p.x <= origin_.x + nx_ * cell_ && p.y <= origin_.y + ny_ * cell_ &&
         p.z <= origin_.z + nz_ * cell_;
}

bool RegionGrid3::cell_of(const Vec3& p, int& i, int& j, int& k) const {
  i = int(std::floor((p.x - origin_.x) / cell_));
  j = int(std::floor((p.y - origin_.y) / cell_));
  k = int(std::floor((p.z - origin_.z) / cell_));
  bool ok = i >= 0 && i < nx_ && j >= 0 && j < ny_ && k >= 0 && k < nz_;
  i = std::clamp(i, 0, nx_ - 1);
  j = std::clamp(j, 0, ny_ - 1);
  k = std::clamp(k, 0, nz_ - 1);
  return ok && in_bounds(p);
}

Cell RegionGrid3::at_point(const Vec3& p) const {
  int i, j, k;
  if (!cell_of(p, i, j, k)) return Cell::Unknown;
  return at(i, j, k);
}

void RegionGrid3::fill(Cell c) {
  std::fill(cells_.begin(), cells_.end(), c);
  dirty_ = true;
}

void RegionGrid3::rasterize_box(const Vec3& lo, const Vec3& hi, Cell value) {
  int i0 = std::max(0, int(std::floor((lo.x - origin_.x) / cell_)));
  int j0 = std::max(0, int(std::floor((lo.y - origin_.y) / cell_)));
  int k0 = std::max(0, int(std::floor((lo.z - origin_.z) / cell_)));
  int i1 = std::min(nx_ - 1, int(std::floor((hi.x - origin_.x) / cell_)));
  int j1 = std::min(ny_ - 1, int(std::floor((hi.y - origin_.y) / cell_)));
  int k1 = std::min(nz_ - 1, int(std::floor((hi.z - origin_.z) / cell_)));
  for (int k = k0; k <= k1; k++)
    for (int j = j0; j <= j1; j++)
      for (int i = i0; i <= i1; i++) {
        Vec3 c = cell_center(i, j, k);
        if (c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y &&
            c.z >= lo.z && c.z <= hi.z)
          cells_[idx(i, j, k)] = value;
      }
  dirty_ = true;
}

void RegionGrid3::rasterize_sphere(const Vec3& center, double radius, Cell value) {
  int i0 = std::max(0, int(std::floor((center.x - radius - origin_.x) / cell_)));
  int j0 = std::max(0, int(std::floor((center.y - radius - origin_.y) / cell_)));
  int k0 = std::max(0, int(std::floor((center.z - radius - origin_.z) / cell_)));
  int i1 = std::min(nx_ - 1, int(std::floor((center.x + radius - origin_.x) / cell_)));
  int j1 = std::min(ny_ - 1, int(std::floor((center.y + radius - origin_.y) / cell_)));
  int k1 = std::min(nz_ - 1, int(std::floor((center.z + radius - origin_.z) / cell_)));
  double r2 = radius * radius;
  for (int k = k0; k <= k1; k++)
    for (int j = j0; j <= j1; j++)
      for (int i = i0; i <= i1; i++)
        if ((cell_center(i, j, k) - center).norm2() <= r2)
          cells_[idx(i, j, k)] = value;
  dirty_ = true;
}

void RegionGrid3::rebuild_distance() const {
  const int n = nx_ * ny_ * nz_;
  std::vector<uint8_t> nonfree(n), freec(n);
  for (int c = 0; c < n; c++) {
    nonfree[c] = cells_[c] != Cell::Free;
    freec[c] = cells_[c] == Cell::Free;
  }
  Edt2Result a = edt3(nonfree, nx_, ny_, nz_, cell_);
  dist_nonfree_ = std::move(a.dist);
  feat_nonfree_ = std::move(a.feat);
  Edt2Result b = edt3(freec, nx_, ny_, nz_, cell_);
  dist_free_ = std::move(b.dist);
  feat_free_ = std::move(b.feat);
  dirty_ = false;
}

void RegionGrid3::ensure_distance() const {
  if (dirty_ || dist_nonfree_.empty()) rebuild_distance();
}

SetDistance3 RegionGrid3::distance_to_set(const Vec3& p) const {
  SetDistance3 out;
  int i, j, k;
  if (!cell_of(p, i, j, k)) {
    out.out_of_bounds = true;
    out.dist = 0.0;
    return out;
  }
  ensure_distance();
  int id = idx(i, j, k);
  if (feat_nonfree_[id] < 0) {
    out.has_target = false;
    out.dist = std::numeric_limits<double>::infinity();
    return out;
  }
  out.has_target = true;
  if (cells_[id] != Cell::Free) {
    out.dist = 0.0;
    out.nearest = p;
    return out;
  }
  int f = feat_nonfree_[id];
  int fk = f / (nx_ * ny_);
  int fj = (f / nx_) % ny_;
  int fi = f % nx_;
  out.nearest = cell_center(fi, fj, fk);
  out.dist = dist(p, out.nearest);
  return out;
}

double RegionGrid3::border_distance(const Vec3& p) const {
  double dx = std::min(p.x - origin_.x, origin_.x + nx_ * cell_ - p.x);
  double dy = std::min(p.y - origin_.y, origin_.y + ny_ * cell_ - p.y);
  double dz = std::min(p.z - origin_.z, origin_.z + nz_ * cell_ - p.z);
  return std::min({dx, dy, dz});
}

double RegionGrid3::clearance(const Vec3& p) const {
  SetDistance3 d = distance_to_set(p);
  if (d.out_of_bounds) return 0.0;
  return std::min(d.dist, border_distance(p));
}

Vec3 RegionGrid3::direction_to_set(const Vec3& p) const {
  int i, j, k;
  if (!cell_of(p, i, j, k)) return {0.0, 0.0, 0.0};
  ensure_distance();
  int id = idx(i, j, k);
  auto unpack = [&](int f) {
    int fk = f / (nx_ * ny_);
    int fj = (f / nx_) % ny_;
    int fi = f % nx_;
    return cell_center(fi, fj, fk);
  };
  if (cells_[id] == Cell::Free) {
    int f = feat_nonfree_[id];
    if (f < 0) return {0.0, 0.0, 0.0};
    return (unpack(f) - p).normalized();
  }
  int f = feat_free_[id];
  if (f < 0) return {0.0, 0.0, 0.0};
  Vec3 toward_free = (unpack(f) - p).normalized();
  if (toward_free.norm2() < 0.25) toward_free = {1.0, 0.0, 0.0};
  return -toward_free;
}

RegionGrid3 RegionGrid3::enlarge(double d) const {
  if (d < 0.0) throw std::invalid_argument("enlarge: d must be >= 0");
  ensure_distance();
  RegionGrid3 out = *this;
  for (int c = 0; c < nx_ * ny_ * nz_; c++)
    if (out.cells_[c] == Cell::Free && dist_nonfree_[c] <= d + 1e-12)
      out.cells_[c] = Cell::Occupied;
  out.dirty_ = true;
  return out;
}

RegionGrid3 RegionGrid3::reduce(double d) const {
  if (d < 0.0) throw std::invalid_argument("reduce: d must be >= 0");
  ensure_distance();
  RegionGrid3 out = *this;
  for (int k = 0; k < nz_; k++)
    for (int j = 0; j < ny_; j++)
      for (int i = 0; i < nx_; i++) {
        int c = idx(i, j, k);
        if (cells_[c] != Cell::Free) continue;
        int m = std::min({i, nx_ - 1 - i, j, ny_ - 1 - j, k, nz_ - 1 - k});
        double border = cell_ * (m + 0.5);
        if (std::min(double(dist_nonfree_[c]), border) < d - 1e-12)
          out.cells_[c] = Cell::Occupied;
      }
  out.dirty_ = true;
  return out;
}

bool RegionGrid3::segment_clear(const Vec3& a, const Vec3& b) const {
  if (!in_bounds(a) || !in_bounds(b)) return false;
  bool clear = true;
  auto check = [&](int i, int j, int k) {
    if (cells_[idx(i, j, k)] != Cell::Free) {
      clear = false;
      return false;
    }
    return true;
  };
  Vec3 d = b - a;
  if (d.norm() <= 0.0) {
    int i, j, k;
    cell_of(a, i, j, k);
    check(i, j, k);
    return clear;
  }
  // Offset traversals on a tiny frame around the segment, for inclusive
  // boundary semantics matching the 2D case.
  Vec3 u = d.normalized();
  Vec3 any = std::abs(u.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 n1 = u.cross(any).normalized() * (1e-7 * cell_);
  Vec3 n2 = u.cross(n1).normalized() * (1e-7 * cell_);
  const Vec3 offs[4] = {n1 + n2, n1 - n2, -n1 + n2, -n1 - n2};
  for (const Vec3& off : offs) {
    if (!clear) break;
    Vec3 p0 = a + off, p1 = b + off;
    int i, j, k, ie, je, ke;
    cell_of(p0, i, j, k);
    cell_of(p1, ie, je, ke);
    if (!check(i, j, k)) break;
    Vec3 dd = p1 - p0;
    int sx = dd.x > 0 ? 1 : (dd.x < 0 ? -1 : 0);
    int sy = dd.y > 0 ? 1 : (dd.y < 0 ? -1 : 0);
    int sz = dd.z > 0 ? 1 : (dd.z < 0 ? -1 : 0);
    double tdx = sx ? cell_ / std::abs(dd.x) : kInf;
    double tdy = sy ? cell_ / std::abs(dd.y) : kInf;
    double tdz = sz ? cell_ / std::abs(dd.z) : kInf;
    auto bdy = [&](double p, double o, int ic, int s, double dp) {
      if (!s) return kInf;
      double boundary = (s > 0 ? ic + 1 : ic) * cell_ + o;
      return (boundary - p) / dp;
    };
    double tmx = bdy(p0.x, origin_.x, i, sx, dd.x);
    double tmy = bdy(p0.y, origin_.y, j, sy, dd.y);
    double tmz = bdy(p0.z, origin_.z, k, sz, dd.z);
    int guard = 2 * (nx_ + ny_ + nz_) + 8;
    while ((i != ie || j != je || k != ke) && guard-- > 0 && clear) {
      if (tmx <= tmy && tmx <= tmz) {
        i += sx;
        tmx += tdx;
      } else if (tmy <= tmz) {
        j += sy;
        tmy += tdy;
      } else {
        k += sz;
        tmz += tdz;
      }
      if (i < 0 || i >= nx_ || j < 0 || j >= ny_ || k < 0 || k >= nz_) break;
      if (!check(i, j, k)) break;
    }
  }
  return clear;
}

int RegionGrid3::count(Cell c) const {
  return int(std::count(cells_.begin(), cells_.end(), c));
}

double RegionGrid3::free_volume() const {
  return count(Cell::Free) * cell_ * cell_ * cell_;
}

// ---------------------------------------------------------------------------
// Contour tracing (crack following, free region kept on the left)
// ---------------------------------------------------------------------------

std::vector<std::vector<Vec2>> grid_contours(const RegionGrid2& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  struct Edge {
    int fx, fy, tx, ty;  // corner coordinates
    bool used = false;
  };
  std::vector<Edge> edges;
  auto nonfree = [&](int i, int j) {
    if (i < 0 || i >= nx || j < 0 || j >= ny) return true;
    return grid.at(i, j) != Cell::Free;
  };
  for (int j = 0; j < ny; j++)
    for (int i = 0; i < nx; i++) {
      if (grid.at(i, j) != Cell::Free) continue;
      if (nonfree(i + 1, j)) edges.push_back({i + 1, j, i + 1, j + 1});
      if (nonfree(i - 1, j)) edges.push_back({i, j + 1, i, j});
      if (nonfree(i, j + 1)) edges.push_back({i + 1, j + 1, i, j + 1});
      if (nonfree(i, j - 1)) edges.push_back({i, j, i + 1, j});
    }
  // Corner -> outgoing edge ids.
  std::map<std::pair<int, int>, std::vector<int>> outgoing;
  for (size_t e = 0; e < edges.size(); e++)
    outgoing[{edges[e].fx, edges[e].fy}].push_back(int(e));

  std::vector<std::vector<Vec2>> loops;
  for (size_t start = 0; start < edges.size(); start++) {
    if (edges[start].used) continue;
    std::vector<Vec2> loop;
    int cur = int(start);
    int guard = int(edges.size()) + 4;
    while (guard-- > 0) {
      Edge& e = edges[cur];
      if (e.used) break;
      e.used = true;
      loop.push_back(grid.origin() +
                     Vec2{e.fx * grid.cell_size(), e.fy * grid.cell_size()});
      auto it = outgoing.find({e.tx, e.ty});
      if (it == outgoing.end()) break;
      // Prefer the sharpest left turn: keeps diagonally-touching free cells
      // in separate loops.
      Vec2 din{double(e.tx - e.fx), double(e.ty - e.fy)};
      int best = -1;
      double best_score = -kInf;
      for (int cand : it->second) {
        if (edges[cand].used) continue;
        Vec2 dout{double(edges[cand].tx - edges[cand].fx),
                  double(edges[cand].ty - edges[cand].fy)};
        double score = std::atan2(din.cross(dout), din.dot(dout));
        if (score > best_score) {
          best_score = score;
          best = cand;
        }
      }
      if (best < 0) break;
      cur = best;
    }
    if (loop.size() >= 4) {
      // Merge collinear runs.
      std::vector<Vec2> merged;
      size_t n = loop.size();
      for (size_t i = 0; i < n; i++) {
        Vec2 prev = loop[(i + n - 1) % n];
        Vec2 next = loop[(i + 1) % n];
        if (std::abs((loop[i] - prev).cross(next - loop[i])) > 1e-12)
          merged.push_back(loop[i]);
      }
      if (merged.size() >= 3) loops.push_back(std::move(merged));
    }
  }
  return loops;
}

std::vector<Vec2> smooth_closed_polyline(const std::vector<Vec2>& pts, int passes) {
  if (pts.size() < 3) return pts;
  std::vector<Vec2> cur = pts;
  std::vector<Vec2> next(cur.size());
  for (int p = 0; p < passes; p++) {
    size_t n = cur.size();
    for (size_t i = 0; i < n; i++)
      next[i] = cur[(i + n - 1) % n] * 0.25 + cur[i] * 0.5 + cur[(i + 1) % n] * 0.25;
    std::swap(cur, next);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Scenario validation
// ---------------------------------------------------------------------------

namespace {

double polygon_pair_distance(const std::vector<Vec2>& a,
                             const std::vector<Vec2>& b) {
  double best = kInf;
  for (size_t i = 0; i < a.size(); i++) {
    const Vec2& p0 = a[i];
    const Vec2& p1 = a[(i + 1) % a.size()];
    for (size_t j = 0; j < b.size(); j++) {
      const Vec2& q0 = b[j];
      const Vec2& q1 = b[(j + 1) % b.size()];
      if (segment_segment_intersect(p0, p1, q0, q1)) return 0.0;
      best = std::min(best, dist_point_segment(p0, q0, q1));
      best = std::min(best, dist_point_segment(q0, p0, p1));
    }
  }
  if (!a.empty() && point_in_polygon(a[0], b)) return 0.0;
  if (!b.empty() && point_in_polygon(b[0], a)) return 0.0;
  return best;
}

}  // namespace

std::vector<Violation> validate_scenario(const ScenarioCheckInput& in) {
  std::vector<Violation> out;

  // (i) pairwise disjoint d_s-enlargements.
  for (size_t i = 0; i < in.obstacles.size(); i++)
    for (size_t j = i + 1; j < in.obstacles.size(); j++) {
      double d = polygon_pair_distance(in.obstacles[i].vertices,
                                       in.obstacles[j].vertices);
      if (d <= 2.0 * in.d_s) {
        out.push_back({ViolationKind::EnlargementsOverlap,
                       "obstacles " + std::to_string(i) + " and " +
                           std::to_string(j) + " are " + std::to_string(d) +
                           " m apart, need > " + std::to_string(2.0 * in.d_s)});
      }
    }

  // (ii) initial circles inside the d_s-reduced free space.
  for (size_t r = 0; r < in.robot_positions.size(); r++) {
    Vec2 p = in.robot_positions[r];
    double th = r < in.robot_headings.size() ? in.robot_headings[r] : 0.0;
    Vec2 n{-std::sin(th), std::cos(th)};
    for (int side = 0; side < 2; side++) {
      Vec2 c = p + n * (side == 0 ? in.r_min : -in.r_min);
      bool bad = false;
      for (int s = 0; s < 64 && !bad; s++) {
        double a = 2.0 * M_PI * s / 64.0;
        Vec2 q = c + Vec2{in.r_min * std::cos(a), in.r_min * std::sin(a)};
        if (q.x - in.bounds.lo.x < in.d_s || in.bounds.hi.x - q.x < in.d_s ||
            q.y - in.bounds.lo.y < in.d_s || in.bounds.hi.y - q.y < in.d_s)
          bad = true;
        for (const auto& ob : in.obstacles)
          if (dist_point_polygon(q, ob.vertices) < in.d_s) bad = true;
      }
      if (bad)
        out.push_back({ViolationKind::InitialCircleUnsafe,
                       "robot " + std::to_string(r) +
                           (side == 0 ? " left" : " right") +
                           " initial circle leaves the reduced free space"});
    }
  }

  // (iii) sampled curvature of d_s-offset obstacle boundaries.
  for (size_t i = 0; i < in.obstacles.size(); i++) {
    const auto& ob = in.obstacles[i];
    double beta = in.v_r > 0.0 ? ob.velocity.norm() / in.v_r : 0.0;
    double r_eff = in.beta_mode ? in.r_min * (1.0 + beta) : in.r_min;
    if (r_eff <= 0.0) continue;
    Vec2 lo{kInf, kInf}, hi{-kInf, -kInf};
    for (const auto& v : ob.vertices) {
      lo.x = std::min(lo.x, v.x);
      lo.y = std::min(lo.y, v.y);
      hi.x = std::max(hi.x, v.x);
      hi.y = std::max(hi.y, v.y);
    }
    double margin = in.d_s * 2.0 + 4.0 * r_eff;
    double extent = std::max(hi.x - lo.x, hi.y - lo.y) + 2.0 * margin;
    double cell = std::max(in.d_s / 10.0, extent / 800.0);
    int nx = int(std::ceil((hi.x - lo.x + 2.0 * margin) / cell));
    int ny = int(std::ceil((hi.y - lo.y + 2.0 * margin) / cell));
    RegionGrid2 g(lo - Vec2{margin, margin}, cell, nx, ny, Cell::Free);
    g.rasterize_polygon(ob.vertices, Cell::Occupied);
    RegionGrid2 e = g.enlarge(in.d_s);
    auto loops = grid_contours(e);
    double worst_r = kInf;
    Vec2 worst_at;
    for (auto& loop : loops) {
      auto sm = smooth_closed_polyline(loop, 4);
      size_t n = sm.size();
      if (n < 8) continue;
      // Arc spacing for the triplet; coarse enough to ignore cell noise.
      int w = std::max<int>(2, int(std::round(std::min(r_eff, in.d_s) / cell / 2.0)));
      for (size_t k = 0; k < n; k++) {
        double rr = circumradius(sm[(k + n - w) % n], sm[k], sm[(k + w) % n]);
        if (rr < worst_r) {
          worst_r = rr;
          worst_at = sm[k];
        }
      }
    }
    if (worst_r < r_eff * 0.75) {
      out.push_back({ViolationKind::OffsetCurvatureTooHigh,
                     "obstacle " + std::to_string(i) +
                         " offset boundary radius " + std::to_string(worst_r) +
                         " < required " + std::to_string(r_eff) + " near (" +
                         std::to_string(worst_at.x) + ", " +
                         std::to_string(worst_at.y) + ")"});
    }
  }

  // (iv) obstacle speeds below V_max, and V_max below v_r.
  for (size_t i = 0; i < in.obstacles.size(); i++) {
    double sp = in.obstacles[i].velocity.norm();
    if (sp > in.v_max + 1e-12 && sp > 0.0)
      out.push_back({ViolationKind::ObstacleTooFast,
                     "obstacle " + std::to_string(i) + " speed " +
                         std::to_string(sp) + " exceeds V_max " +
                         std::to_string(in.v_max)});
  }
  if (in.v_max >= in.v_r && in.v_r > 0.0)
    out.push_back({ViolationKind::ObstacleTooFast,
                   "V_max " + std::to_string(in.v_max) + " must be < v_r " +
                       std::to_string(in.v_r)});
  return out;
}

}  // namespace mrnav::geom
