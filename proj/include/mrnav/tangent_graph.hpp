#pragma once

#include <string>
#include <vector>

#include "mrnav/apf.hpp"
#include "mrnav/geom.hpp"
#include "mrnav/sensing.hpp"
#include "mrnav/vehicle.hpp"

namespace mrnav::tangent_graph {

using geom::Circle2;
using geom::RegionGrid2;
using geom::Vec2;
using vehicle::UnicycleState;

// Closed boundary loops of the d_s-reduced area. curves[0] is the outer
// curve C0 (largest absolute area); `smoothed` is the copy used for tangency
// tests and candidate geometry (within half a cell of the traced loops).
struct BoundaryCurves {
  std::vector<std::vector<Vec2>> curves;
  std::vector<std::vector<Vec2>> smoothed;
  double cell = 0.0;  // grid resolution the curves were traced at
};

BoundaryCurves extract_boundary_curves(const RegionGrid2& reduced);

enum class VertexType { Target, Start, A, APrime, B, BPrime, S, V };

struct Vertex {
  VertexType type = VertexType::A;
  Vec2 pos;
  int host_curve = -1;       // index into curves, -1 when not on a curve
  double host_param = 0.0;   // arc length along the smoothed curve
  int host_circle = -1;      // 0 = left, 1 = right
  double travel_param = 0.0; // arc angle from p0 in the circle's travel sense
  int link = -1;             // far end of this vertex's tangent segment
};

struct GraphG {
  std::vector<Vertex> vertices;
  BoundaryCurves curves;
  Circle2 circle_left, circle_right;
  Vec2 start;
  Vec2 target;
  double r_min = 0.0;
  int start_vertex = -1;
  int target_vertex = -1;
  std::vector<std::vector<int>> curve_order;  // vertex ids per curve, by param
  std::vector<int> circle_order[2];           // vertex ids per circle, by travel
  bool tangent_conflict = false;  // a point served two tangent lines
};

// Typed vertices of the graph: target tangents (A/A'), initial-circle exits
// (B/B'), the backward-ray S points on C0, and circle-curve intersections V.
std::vector<Vertex> classify_points(const BoundaryCurves& curves,
                                    const Vec2& target,
                                    const UnicycleState& pose, double r_min,
                                    bool* conflict = nullptr);

GraphG build_graph(const BoundaryCurves& curves, std::vector<Vertex> vertices,
                   const UnicycleState& pose, const Vec2& target, double r_min);

struct Candidate {
  enum class Status { Growing, Completed, Abandoned };
  Status status = Status::Growing;
  std::vector<Vec2> points;       // geometric polyline from p0
  std::vector<int> trace;         // visited vertex ids (identity for dedup)
  double raw_length() const { return geom::polyline_length(points); }
};

struct GenerateOptions {
  int candidate_cap = 64;
  int hop_cap = 128;
};

struct GenerateResult {
  std::vector<Candidate> candidates;
  bool truncated = false;
};

// Worklist expansion of the six generation rules.
GenerateResult generate_candidates(const GraphG& graph,
                                   const GenerateOptions& opt = {});

// ---------------------------------------------------------------------------
// End-to-end planning step for the receding-horizon navigator.
// ---------------------------------------------------------------------------

struct PlanInput {
  const RegionGrid2* area = nullptr;  // fused unoccupied area A(t)
  UnicycleState pose;
  Vec2 target;
  double r_min = 0.0;
  double spacing = 0.0;  // L = v_r * delta
  sensing::ShrinkParams shrink;
  apf::FieldGains gains;
  bool fast_mode = false;
  int candidate_cap = 64;
};

struct PlanResult {
  bool ok = false;
  apf::PathPolyline path;
  std::vector<Candidate> candidates;
  int chosen = -1;
  std::string failure;
};

// reduce -> curves -> graph -> candidates -> relax (apf) -> shortest.
PlanResult plan_path(const PlanInput& in);

// Relax one candidate polyline in the Ch.3 field set; exposed for tests.
struct AdjustResult {
  bool ok = false;
  apf::PathPolyline path;
};
AdjustResult adjust_candidate(const Candidate& cand, const PlanInput& in);

// Plain-text edge list for debugging plots.
std::string graph_debug_dump(const GraphG& g);

}  // namespace mrnav::tangent_graph
