#pragma once

#include <array>
#include <string>
#include <vector>

#include "cvnav/geometry.hpp"

namespace cvnav {

// Offline SE(2) smoother: Pose2 nodes, five factor families, solved by
// Levenberg-Marquardt on the damped normal equations.

enum class FactorKind { kOriginPrior, kOdometry, kNonHolonomic, kFixPrior, kLoopClosure };

struct Factor {
  FactorKind kind = FactorKind::kOriginPrior;
  int i = 0;
  int j = -1;  // -1 for unary factors
  // priors: measured pose (x, y, theta); between-like: (d_fwd, d_lat, d_theta)
  std::array<double, 3> measurement{};
  // per-channel sigmas; 0 marks a channel carrying no information
  std::array<double, 3> sigma{};
};

struct GraphNode {
  int index = 0;
  Pose2 initial;
};

struct FactorGraph {
  std::vector<GraphNode> nodes;
  std::vector<Factor> factors;
};

struct LoopClosureCandidate {
  int i = 0;
  int j = 0;             // j > i, both fix nodes
  double chord = 0.0;    // m, straight-line separation of the two fixes
  double path_length = 0.0;  // m, odometry path length from i to j
};

enum class VetReason { kNone, kChord, kGap, kRatio };

struct VetResult {
  bool accepted = false;
  VetReason reason = VetReason::kNone;  // first failed condition
};

/// Three-condition loop vetting: chord <= 50 m, frame gap >= 30,
/// path-to-chord ratio >= 5 (zero chord with nonzero path counts as +inf).
/// Rejection names the first failed condition in the order chord, gap, ratio.
VetResult vet_loop_closure(const LoopClosureCandidate& c);

/// Loop edge sigma: max(sqrt(s_i^2 + s_j^2), 0.5); never more confident than
/// the per-fix forward uncertainty at either endpoint.
double loop_sigma(double sigma_fwd_i, double sigma_fwd_j);

// An accepted fix feeding the graph: which node it lands on, the global pose
// it implies, and the body-frame sigmas the filter used.
struct FixObservation {
  int node = 0;
  Pose2 pose;
  double sigma_fwd_w = 1.5;
  double sigma_lat_w = 3.0;
};

/// Assembles the full graph: one origin prior, odometry and non-holonomic
/// factors between consecutive nodes, a prior per accepted fix, and a loop
/// closure per vetted fix pair (50 m spatial prune, then the three-condition
/// test). odometry[k] takes node k to node k+1 with isotropic translation
/// sigma odo_sigma[k] and heading sigma 0.05 rad.
FactorGraph build_graph(const std::vector<Pose2>& node_initials,
                        const std::vector<BodyIncrement>& odometry,
                        const std::vector<double>& odo_sigma,
                        const std::vector<FixObservation>& fixes, const Pose2& origin);

// Residual and analytic Jacobian rows of one factor at a linearisation
// point. Rows beyond `dim` and jacobian_j of unary factors are zero.
struct FactorLinearization {
  int dim = 0;
  bool binary = false;
  std::array<double, 3> residual{};
  std::array<std::array<double, 3>, 3> jacobian_i{};  // d residual / d (xi, yi, thetai)
  std::array<std::array<double, 3>, 3> jacobian_j{};
  std::array<double, 3> weight{};  // 1/sigma per active channel
};

FactorLinearization linearize_factor(const Factor& f, const Pose2& ti, const Pose2& tj);

struct OptimizeReport {
  std::vector<Pose2> estimates;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;  // relative tolerance reached before the cap
  std::vector<double> accepted_costs;
};

/// Levenberg-Marquardt, at most 100 iterations, stopping when the relative
/// cost decrease between accepted iterations falls below 1e-5. Hitting the
/// cap is a valid stop; a graph without any prior factor is an error.
OptimizeReport optimize(const FactorGraph& g);

/// Debug dump, one line per factor:
///   PRIOR idx x y theta sigma
///   BETWEEN i j dfwd dlat dtheta sigma
///   NONHOL i j sigma
///   LOOP i j dfwd dlat dtheta sigma
std::string dump_graph(const FactorGraph& g);

/// Fixture loader for the dump format. Nodes are created for every index
/// mentioned, initialised to identity; callers overwrite initials as needed.
FactorGraph load_graph_dump(const std::string& text);

}  // namespace cvnav
