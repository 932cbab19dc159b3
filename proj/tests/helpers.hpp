#pragma once

#include <queue>
#include <vector>

#include "mrnav/geom.hpp"

namespace testutil {

using mrnav::geom::Cell;
using mrnav::geom::RegionGrid2;
using mrnav::geom::Vec2;

// Dense point-sampling oracle for segment clearance: samples the segment at
// a fraction of the cell size and checks the containing cells only.
inline bool segment_clear_sampled(const RegionGrid2& g, Vec2 a, Vec2 b,
                                  double step_frac = 0.05) {
  double len = dist(a, b);
  int n = std::max(2, int(std::ceil(len / (g.cell_size() * step_frac))));
  for (int i = 0; i <= n; i++) {
    Vec2 p = a + (b - a) * (double(i) / n);
    int ci, cj;
    if (!g.cell_of(p, ci, cj)) return false;
    if (g.at(ci, cj) != Cell::Free) return false;
  }
  return true;
}

// Connected components of the non-free set (4-connectivity flood fill).
inline int nonfree_components(const RegionGrid2& g) {
  std::vector<uint8_t> seen(g.nx() * g.ny(), 0);
  int comps = 0;
  for (int j = 0; j < g.ny(); j++)
    for (int i = 0; i < g.nx(); i++) {
      if (g.at(i, j) == Cell::Free || seen[j * g.nx() + i]) continue;
      comps++;
      std::queue<std::pair<int, int>> q;
      q.push({i, j});
      seen[j * g.nx() + i] = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; d++) {
          int nx = x + dx[d], ny = y + dy[d];
          if (nx < 0 || nx >= g.nx() || ny < 0 || ny >= g.ny()) continue;
          if (g.at(nx, ny) == Cell::Free || seen[ny * g.nx() + nx]) continue;
          seen[ny * g.nx() + nx] = 1;
          q.push({nx, ny});
        }
      }
    }
  return comps;
}

inline mrnav::geom::PolyObstacle rect_obstacle(double x0, double y0, double x1,
                                               double y1,
                                               Vec2 velocity = {0, 0}) {
  mrnav::geom::PolyObstacle o;
  o.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  o.velocity = velocity;
  return o;
}

}  // namespace testutil
