#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrnav/apf.hpp"
#include "mrnav/geom.hpp"
#include "mrnav/rng.hpp"
#include "mrnav/sensing.hpp"
#include "mrnav/vehicle.hpp"

namespace mrnav::prm3 {

using geom::RegionGrid3;
using geom::Vec3;
using sensing::ShrinkParams;
using vehicle::InitialTorus;
using vehicle::Vehicle3State;

struct Path3 {
  std::vector<Vec3> points;
  double spacing = 0.0;

  int size() const { return int(points.size()); }
  bool empty() const { return points.empty(); }
  // k-th plan point with the constant extension P*(k) = P*(n) for k > n.
  const Vec3& at_step(int k) const {
    return points[std::min<size_t>(k, points.size() - 1)];
  }
};

struct Prm3Params {
  int n_samples = 500;   // N_s
  int n_neighbors = 10;  // N_c < N_s
  double spacing = 0.0;  // L = v_r * delta
  double u_max = 0.0;    // U_M
  double v = 0.0;        // v_r
};

struct Prm3Graph {
  std::vector<Vec3> vertices;  // samples, then init, then goal
  int init = -1, goal = -1;
  struct Edge {
    int a, b;
    double len;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<std::pair<int, double>>> adj;  // (vertex, length)
};

// N uniform samples over the free cells, with intra-cell jitter.
std::vector<Vec3> sample_free(const RegionGrid3& region, int n, Rng& rng);

// A3-A5: nearest-neighbor edges gated by segment_clear; edges leaving the
// start additionally satisfy the initial-heading cone.
Prm3Graph connect_prm(const std::vector<Vec3>& samples, const Vec3& init,
                      const Vec3& init_dir, const Vec3& goal,
                      const Prm3Params& p, const RegionGrid3& region);

// Dijkstra over the roadmap; vertex id sequence from init to goal.
std::optional<std::vector<int>> shortest_prm_path(const Prm3Graph& g);

// Arc-length resampling at interval L; keeps the first point exactly.
Path3 resample_equal(const std::vector<Vec3>& verts, double spacing);

// hat-A(t,k) materialized as a grid (tests and audits). Heavier than the
// query below, which the relaxation uses.
RegionGrid3 valid_area(const RegionGrid3& area, int k, const ShrinkParams& p,
                       const std::vector<Path3>& other_plans);

// Clearance against hat-A(t,k) without materializing per-k grids:
// min(dist-to-A's-non-free - shrink(k), sphere distances).
class ValidAreaQuery {
 public:
  ValidAreaQuery(const RegionGrid3& area, const ShrinkParams& p,
                 std::vector<Path3> other_plans)
      : area_(area), p_(p), others_(std::move(other_plans)) {}

  double clearance(const Vec3& q, int k) const;
  Vec3 away(const Vec3& q, int k) const;  // unit push out of the constraint
  const ShrinkParams& shrink() const { return p_; }

 private:
  const RegionGrid3& area_;
  ShrinkParams p_;
  std::vector<Path3> others_;
};

struct Relax3Result {
  bool converged = false;
  int sweeps = 0;
};

// B1-B3 with the four 3D fields; p0 pinned, last point managed by the
// L_under / L_over rule, final point appended onto the target when needed.
Relax3Result relax3(Path3& path, const ValidAreaQuery& q, const InitialTorus& torus,
                    const Vec3& target, const apf::FieldGains& g);

struct Plan3Input {
  const RegionGrid3* area = nullptr;
  Vehicle3State state;
  Vec3 target;
  ShrinkParams shrink;
  Prm3Params params;
  apf::FieldGains gains;
  std::vector<Path3> other_plans;
  Path3 previous;  // last step's plan; empty forces a PRM seed
  Rng* rng = nullptr;
  int prm_attempts = 3;
};

struct Plan3Result {
  bool ok = false;
  Path3 path;
  bool used_prm = false;
  std::string failure;
};

// One planning step: reuse last plan when it still relaxes safely, otherwise
// seed from the probabilistic roadmap.
Plan3Result plan_step3(const Plan3Input& in);

}  // namespace mrnav::prm3
