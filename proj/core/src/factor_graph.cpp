#include "cvnav/factor_graph.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cvnav {

namespace {

struct RelPose {
  double fwd, lat, theta;  // between(T_i, T_j) as an increment
  double ci, si;           // cos/sin of theta_i
  double dx, dy;
};

RelPose relative(const Pose2& a, const Pose2& b) {
  RelPose r;
  r.ci = std::cos(a.theta);
  r.si = std::sin(a.theta);
  r.dx = b.x - a.x;
  r.dy = b.y - a.y;
  r.fwd = r.ci * r.dx + r.si * r.dy;
  r.lat = -r.si * r.dx + r.ci * r.dy;
  r.theta = wrap_angle(b.theta - a.theta);
  return r;
}

}  // namespace

FactorLinearization linearize_factor(const Factor& f, const Pose2& ti, const Pose2& tj) {
  FactorLinearization out;
  switch (f.kind) {
    case FactorKind::kOriginPrior:
    case FactorKind::kFixPrior: {
      out.dim = 3;
      out.binary = false;
      out.residual = {ti.x - f.measurement[0], ti.y - f.measurement[1],
               wrap_angle(ti.theta - f.measurement[2])};
      for (int k = 0; k < 3; ++k) {
        out.jacobian_i[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = 1.0;
        out.weight[static_cast<std::size_t>(k)] = 1.0 / f.sigma[static_cast<std::size_t>(k)];
      }
      return out;
    }
    case FactorKind::kOdometry:
    case FactorKind::kLoopClosure: {
      const RelPose rel = relative(ti, tj);
      const double cp = std::cos(rel.theta);
      const double sp = std::sin(rel.theta);
      const double u = f.measurement[0] - rel.fwd;
      const double v = f.measurement[1] - rel.lat;
      const double r1 = cp * u + sp * v;
      const double r2 = -sp * u + cp * v;
      const double r3 = wrap_angle(f.measurement[2] - rel.theta);

      out.dim = 3;
      out.binary = true;
      out.residual = {r1, r2, r3};
      auto rotate = [&](double a, double b) {
        return std::array<double, 2>{cp * a + sp * b, -sp * a + cp * b};
      };
      const auto cxi = rotate(rel.ci, -rel.si);
      const auto cyi = rotate(rel.si, rel.ci);
      const auto cti = rotate(-rel.lat, rel.fwd);
      out.jacobian_i[0] = {cxi[0], cyi[0], cti[0] - r2};
      out.jacobian_i[1] = {cxi[1], cyi[1], cti[1] + r1};
      out.jacobian_i[2] = {0.0, 0.0, 1.0};
      const auto cxj = rotate(-rel.ci, rel.si);
      const auto cyj = rotate(-rel.si, -rel.ci);
      out.jacobian_j[0] = {cxj[0], cyj[0], r2};
      out.jacobian_j[1] = {cxj[1], cyj[1], -r1};
      out.jacobian_j[2] = {0.0, 0.0, -1.0};
      for (int k = 0; k < 3; ++k) {
        out.weight[static_cast<std::size_t>(k)] = 1.0 / f.sigma[static_cast<std::size_t>(k)];
      }
      return out;
    }
    case FactorKind::kNonHolonomic: {
      // lateral channel of the between-increment, measurement zero; forward
      // and heading carry no information
      const RelPose rel = relative(ti, tj);
      out.dim = 1;
      out.binary = true;
      out.residual = {rel.lat, 0.0, 0.0};
      out.jacobian_i[0] = {rel.si, -rel.ci, -rel.fwd};
      out.jacobian_j[0] = {-rel.si, rel.ci, 0.0};
      out.weight[0] = 1.0 / f.sigma[1];
      return out;
    }
  }
  throw std::logic_error("linearize_factor: unknown factor kind");
}

namespace {

double total_cost(const FactorGraph& g, const std::vector<Pose2>& x) {
  double cost = 0.0;
  for (const Factor& f : g.factors) {
    const Pose2& ti = x[static_cast<std::size_t>(f.i)];
    const Pose2& tj = f.j >= 0 ? x[static_cast<std::size_t>(f.j)] : ti;
    const FactorLinearization b = linearize_factor(f, ti, tj);
    for (int k = 0; k < b.dim; ++k) {
      const double wr = b.residual[static_cast<std::size_t>(k)] * b.weight[static_cast<std::size_t>(k)];
      cost += wr * wr;
    }
  }
  return cost;
}

void validate_graph(const FactorGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  if (n == 0) {
    throw std::invalid_argument("optimize: empty graph");
  }
  bool has_prior = false;
  for (const Factor& f : g.factors) {
    if (f.i < 0 || f.i >= n || (f.j >= 0 && f.j >= n)) {
      throw std::invalid_argument("optimize: factor references a missing node");
    }
    if (f.kind == FactorKind::kOriginPrior || f.kind == FactorKind::kFixPrior) {
      has_prior = true;
    }
  }
  if (!has_prior) {
    throw std::invalid_argument("optimize: no prior factor; the gauge is unconstrained");
  }
}

}  // namespace

VetResult vet_loop_closure(const LoopClosureCandidate& c) {
  if (c.j <= c.i) {
    throw std::invalid_argument("vet_loop_closure: requires j > i");
  }
  if (c.chord < 0.0 || c.path_length < 0.0) {
    throw std::invalid_argument("vet_loop_closure: negative geometry");
  }
  if (c.chord > 50.0) {
    return {false, VetReason::kChord};
  }
  if (c.j - c.i < 30) {
    return {false, VetReason::kGap};
  }
  const double ratio = c.chord == 0.0
                           ? (c.path_length > 0.0 ? std::numeric_limits<double>::infinity() : 0.0)
                           : c.path_length / c.chord;
  if (!(ratio >= 5.0)) {
    return {false, VetReason::kRatio};
  }
  return {true, VetReason::kNone};
}

double loop_sigma(double sigma_fwd_i, double sigma_fwd_j) {
  if (!(sigma_fwd_i > 0.0) || !(sigma_fwd_j > 0.0)) {
    throw std::invalid_argument("loop_sigma: sigmas must be > 0");
  }
  return std::max(std::hypot(sigma_fwd_i, sigma_fwd_j), 0.5);
}

FactorGraph build_graph(const std::vector<Pose2>& node_initials,
                        const std::vector<BodyIncrement>& odometry,
                        const std::vector<double>& odo_sigma,
                        const std::vector<FixObservation>& fixes, const Pose2& origin) {
  const std::size_t n = node_initials.size();
  if (n == 0) {
    throw std::invalid_argument("build_graph: need at least one node");
  }
  if (odometry.size() != n - 1 || odo_sigma.size() != n - 1) {
    throw std::invalid_argument("build_graph: need exactly one odometry increment per edge");
  }

  FactorGraph g;
  g.nodes.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    g.nodes.push_back({static_cast<int>(k), node_initials[k]});
  }

  Factor op;
  op.kind = FactorKind::kOriginPrior;
  op.i = 0;
  op.measurement = {origin.x, origin.y, origin.theta};
  op.sigma = {0.01, 0.01, 0.01};
  g.factors.push_back(op);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(odo_sigma[k] > 0.0)) {
      throw std::invalid_argument("build_graph: odometry sigma must be > 0");
    }
    Factor fo;
    fo.kind = FactorKind::kOdometry;
    fo.i = static_cast<int>(k);
    fo.j = static_cast<int>(k + 1);
    fo.measurement = {odometry[k].d_fwd, odometry[k].d_lat, odometry[k].d_theta};
    fo.sigma = {odo_sigma[k], odo_sigma[k], 0.05};
    g.factors.push_back(fo);

    Factor fn;
    fn.kind = FactorKind::kNonHolonomic;
    fn.i = fo.i;
    fn.j = fo.j;
    fn.sigma = {0.0, 1.0, 0.0};
    g.factors.push_back(fn);
  }

  for (const FixObservation& fx : fixes) {
    if (fx.node < 0 || fx.node >= static_cast<int>(n)) {
      throw std::invalid_argument("build_graph: fix node out of range");
    }
    if (!(fx.sigma_fwd_w > 0.0) || !(fx.sigma_lat_w > 0.0)) {
      throw std::invalid_argument("build_graph: fix sigmas must be > 0");
    }
    Factor ff;
    ff.kind = FactorKind::kFixPrior;
    ff.i = fx.node;
    ff.measurement = {fx.pose.x, fx.pose.y, fx.pose.theta};
    const double s = 0.5 * (fx.sigma_fwd_w + fx.sigma_lat_w);
    ff.sigma = {s, s, s};
    g.factors.push_back(ff);
  }

  // loop closures between accepted-fix nodes: coarse 50 m spatial hash,
  // then the three-condition vetting
  std::vector<double> prefix(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    prefix[k + 1] = prefix[k] + std::hypot(odometry[k].d_fwd, odometry[k].d_lat);
  }

  std::vector<FixObservation> sorted = fixes;
  std::sort(sorted.begin(), sorted.end(),
            [](const FixObservation& a, const FixObservation& b) { return a.node < b.node; });

  constexpr double kCell = 50.0;
  std::map<std::pair<long, long>, std::vector<std::size_t>> grid;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    grid[{static_cast<long>(std::floor(sorted[k].pose.x / kCell)),
          static_cast<long>(std::floor(sorted[k].pose.y / kCell))}]
        .push_back(k);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [cell, members] : grid) {
    for (long ddx = -1; ddx <= 1; ++ddx) {
      for (long ddy = -1; ddy <= 1; ++ddy) {
        const auto it = grid.find({cell.first + ddx, cell.second + ddy});
        if (it == grid.end()) {
          continue;
        }
        for (const std::size_t a : members) {
          for (const std::size_t b : it->second) {
            if (sorted[a].node < sorted[b].node) {
              pairs.emplace_back(a, b);
            }
          }
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  for (const auto& [a, b] : pairs) {
    const FixObservation& fi = sorted[a];
    const FixObservation& fj = sorted[b];
    LoopClosureCandidate cand;
    cand.i = fi.node;
    cand.j = fj.node;
    cand.chord = std::hypot(fi.pose.x - fj.pose.x, fi.pose.y - fj.pose.y);
    cand.path_length = prefix[static_cast<std::size_t>(fj.node)] -
                       prefix[static_cast<std::size_t>(fi.node)];
    if (!vet_loop_closure(cand).accepted) {
      continue;
    }
    const BodyIncrement meas = between(fi.pose, fj.pose);
    Factor fl;
    fl.kind = FactorKind::kLoopClosure;
    fl.i = fi.node;
    fl.j = fj.node;
    fl.measurement = {meas.d_fwd, meas.d_lat, meas.d_theta};
    const double s = loop_sigma(fi.sigma_fwd_w, fj.sigma_fwd_w);
    fl.sigma = {s, s, s};
    g.factors.push_back(fl);
  }

  return g;
}

OptimizeReport optimize(const FactorGraph& g) {
  validate_graph(g);
  const int n = static_cast<int>(g.nodes.size());
  const int dim = 3 * n;

  std::vector<Pose2> x;
  x.reserve(g.nodes.size());
  for (const GraphNode& node : g.nodes) {
    x.push_back(node.initial);
  }

  OptimizeReport report;
  double cost = total_cost(g, x);
  report.initial_cost = cost;
  report.accepted_costs.push_back(cost);

  Eigen::SparseMatrix<double> h(dim, dim);
  Eigen::VectorXd grad(dim);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_analyzed = false;
  bool rebuild = true;

  auto assemble = [&]() {
    triplets.clear();
    grad.setZero();
    for (int k = 0; k < dim; ++k) {
      triplets.emplace_back(k, k, 0.0);  // keep the full diagonal in the pattern
    }
    for (const Factor& f : g.factors) {
      const Pose2& ti = x[static_cast<std::size_t>(f.i)];
      const Pose2& tj = f.j >= 0 ? x[static_cast<std::size_t>(f.j)] : ti;
      const FactorLinearization b = linearize_factor(f, ti, tj);
      const int bi = 3 * f.i;
      const int bj = 3 * f.j;
      for (int k = 0; k < b.dim; ++k) {
        const double w2 = b.weight[static_cast<std::size_t>(k)] *
                          b.weight[static_cast<std::size_t>(k)];
        const auto& ri = b.jacobian_i[static_cast<std::size_t>(k)];
        const auto& rj = b.jacobian_j[static_cast<std::size_t>(k)];
        const double res = b.residual[static_cast<std::size_t>(k)];
        for (int a = 0; a < 3; ++a) {
          if (ri[static_cast<std::size_t>(a)] != 0.0) {
            grad(bi + a) -= w2 * ri[static_cast<std::size_t>(a)] * res;
          }
          for (int c = 0; c < 3; ++c) {
            const double hii = w2 * ri[static_cast<std::size_t>(a)] * ri[static_cast<std::size_t>(c)];
            if (hii != 0.0) {
              triplets.emplace_back(bi + a, bi + c, hii);
            }
          }
        }
        if (b.binary) {
          for (int a = 0; a < 3; ++a) {
            if (rj[static_cast<std::size_t>(a)] != 0.0) {
              grad(bj + a) -= w2 * rj[static_cast<std::size_t>(a)] * res;
            }
            for (int c = 0; c < 3; ++c) {
              const double hij = w2 * ri[static_cast<std::size_t>(a)] * rj[static_cast<std::size_t>(c)];
              const double hjj = w2 * rj[static_cast<std::size_t>(a)] * rj[static_cast<std::size_t>(c)];
              if (hij != 0.0) {
                triplets.emplace_back(bi + a, bj + c, hij);
                triplets.emplace_back(bj + c, bi + a, hij);
              }
              if (hjj != 0.0) {
                triplets.emplace_back(bj + a, bj + c, hjj);
              }
            }
          }
        }
      }
    }
    h.setFromTriplets(triplets.begin(), triplets.end());
  };

  double lambda = 1e-4;
  constexpr int kMaxIterations = 100;
  constexpr double kRelTol = 1e-5;

  for (int it = 0; it < kMaxIterations; ++it) {
    report.iterations = it + 1;
    if (rebuild) {
      assemble();
      rebuild = false;
    }

    Eigen::SparseMatrix<double> damped = h;
    for (int k = 0; k < dim; ++k) {
      const double d = h.coeff(k, k);
      damped.coeffRef(k, k) = d + lambda * std::max(d, 1e-12);
    }
    if (!pattern_analyzed) {
      solver.analyzePattern(damped);
      pattern_analyzed = true;
    }
    solver.factorize(damped);
    if (solver.info() != Eigen::Success) {
      lambda *= 10.0;
      if (lambda > 1e12) {
        break;
      }
      continue;
    }
    const Eigen::VectorXd delta = solver.solve(grad);

    std::vector<Pose2> trial = x;
    for (int k = 0; k < n; ++k) {
      trial[static_cast<std::size_t>(k)] =
          Pose2(x[static_cast<std::size_t>(k)].x + delta(3 * k),
                x[static_cast<std::size_t>(k)].y + delta(3 * k + 1),
                x[static_cast<std::size_t>(k)].theta + delta(3 * k + 2));
    }
    const double trial_cost = total_cost(g, trial);
    if (trial_cost < cost) {
      const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
      x = std::move(trial);
      cost = trial_cost;
      report.accepted_costs.push_back(cost);
      lambda = std::max(lambda * 0.1, 1e-12);
      rebuild = true;
      if (rel < kRelTol) {
        report.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        break;
      }
    }
  }

  report.final_cost = cost;
  report.estimates = std::move(x);
  return report;
}

std::string dump_graph(const FactorGraph& g) {
  std::ostringstream os;
  char buf[256];
  for (const Factor& f : g.factors) {
    switch (f.kind) {
      case FactorKind::kOriginPrior:
      case FactorKind::kFixPrior:
        std::snprintf(buf, sizeof(buf), "PRIOR %d %.17g %.17g %.17g %.17g\n", f.i,
                      f.measurement[0], f.measurement[1], f.measurement[2], f.sigma[0]);
        break;
      case FactorKind::kOdometry:
        std::snprintf(buf, sizeof(buf), "BETWEEN %d %d %.17g %.17g %.17g %.17g\n", f.i, f.j,
                      f.measurement[0], f.measurement[1], f.measurement[2], f.sigma[0]);
        break;
      case FactorKind::kNonHolonomic:
        std::snprintf(buf, sizeof(buf), "NONHOL %d %d %.17g\n", f.i, f.j, f.sigma[1]);
        break;
      case FactorKind::kLoopClosure:
        std::snprintf(buf, sizeof(buf), "LOOP %d %d %.17g %.17g %.17g %.17g\n", f.i, f.j,
                      f.measurement[0], f.measurement[1], f.measurement[2], f.sigma[0]);
        break;
    }
    os << buf;
  }
  return os.str();
}

FactorGraph load_graph_dump(const std::string& text) {
  FactorGraph g;
  std::istringstream is(text);
  std::string tag;
  int max_node = -1;
  while (is >> tag) {
    Factor f;
    if (tag == "PRIOR") {
      f.kind = FactorKind::kFixPrior;
      double s;
      is >> f.i >> f.measurement[0] >> f.measurement[1] >> f.measurement[2] >> s;
      f.sigma = {s, s, s};
      if (f.i == 0 && std::abs(s - 0.01) < 1e-12) {
        f.kind = FactorKind::kOriginPrior;
      }
    } else if (tag == "BETWEEN") {
      f.kind = FactorKind::kOdometry;
      double s;
      is >> f.i >> f.j >> f.measurement[0] >> f.measurement[1] >> f.measurement[2] >> s;
      f.sigma = {s, s, 0.05};
    } else if (tag == "NONHOL") {
      f.kind = FactorKind::kNonHolonomic;
      double s;
      is >> f.i >> f.j >> s;
      f.sigma = {0.0, s, 0.0};
    } else if (tag == "LOOP") {
      f.kind = FactorKind::kLoopClosure;
      double s;
      is >> f.i >> f.j >> f.measurement[0] >> f.measurement[1] >> f.measurement[2] >> s;
      f.sigma = {s, s, s};
    } else {
      throw std::invalid_argument("load_graph_dump: unknown record '" + tag + "'");
    }
    if (!is) {
      throw std::invalid_argument("load_graph_dump: malformed record");
    }
    g.factors.push_back(f);
    max_node = std::max({max_node, f.i, f.j});
  }
  for (int k = 0; k <= max_node; ++k) {
    g.nodes.push_back({k, Pose2()});
  }
  return g;
}

}  // namespace cvnav
