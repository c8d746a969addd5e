#include "cvnav/ukf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace cvnav {

namespace {

constexpr int kDim = 3;
constexpr int kNumSigma = 2 * kDim + 1;

Eigen::Matrix3d to_eigen(const UkfState& s) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      m(r, c) = s.c(r, c);
    }
  }
  return m;
}

void from_eigen(const Eigen::Matrix3d& m, UkfState& s) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      s.c(r, c) = m(r, c);
    }
  }
}

// Cholesky with escalating jitter: 1e-12 * I, x10 per retry up to 1e-6.
Eigen::Matrix3d cholesky_with_jitter(const Eigen::Matrix3d& p) {
  Eigen::Matrix3d sym = 0.5 * (p + p.transpose());
  Eigen::LLT<Eigen::Matrix3d> llt(sym);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  for (double jitter = 1e-12; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    llt.compute(sym + jitter * Eigen::Matrix3d::Identity());
    if (llt.info() == Eigen::Success) {
      return llt.matrixL();
    }
  }
  throw NumericalError("ukf: covariance is not positive definite after jitter escalation");
}

struct SigmaWeights {
  double scale;  // sqrt(n + lambda)
  std::array<double, kNumSigma> wm;
  std::array<double, kNumSigma> wc;
};

SigmaWeights van_der_merwe_weights(const SigmaParams& p) {
  p.validate();
  const double n = static_cast<double>(kDim);
  const double lambda = p.alpha * p.alpha * (n + p.kappa) - n;
  SigmaWeights w{};
  w.scale = std::sqrt(n + lambda);
  w.wm[0] = lambda / (n + lambda);
  w.wc[0] = w.wm[0] + 1.0 - p.alpha * p.alpha + p.beta;
  for (int i = 1; i < kNumSigma; ++i) {
    w.wm[static_cast<std::size_t>(i)] = 0.5 / (n + lambda);
    w.wc[static_cast<std::size_t>(i)] = 0.5 / (n + lambda);
  }
  return w;
}

// 2n+1 sigma points; the angle channel is perturbed additively and wrapped.
std::array<Pose2, kNumSigma> sigma_points(const Pose2& mean, const Eigen::Matrix3d& cov,
                                          double scale) {
  const Eigen::Matrix3d l = cholesky_with_jitter(cov);
  std::array<Pose2, kNumSigma> pts;
  pts[0] = mean;
  for (int j = 0; j < kDim; ++j) {
    const Eigen::Vector3d col = scale * l.col(j);
    pts[static_cast<std::size_t>(1 + j)] =
        Pose2(mean.x + col(0), mean.y + col(1), mean.theta + col(2));
    pts[static_cast<std::size_t>(1 + kDim + j)] =
        Pose2(mean.x - col(0), mean.y - col(1), mean.theta - col(2));
  }
  return pts;
}

Eigen::Vector3d residual(const Pose2& p, const Pose2& mean) {
  return {p.x - mean.x, p.y - mean.y, wrap_angle(p.theta - mean.theta)};
}

}  // namespace

ProcessNoise process_noise_from_eps(double eps_imu) {
  if (eps_imu < 0.0 || !std::isfinite(eps_imu)) {
    throw std::invalid_argument("process_noise_from_eps: eps_imu must be finite and >= 0");
  }
  ProcessNoise q;
  q.sigma_fwd = std::max(1.0, 2.0 * eps_imu);
  q.sigma_lat = std::max(1.5, 0.3 * eps_imu);
  q.sigma_theta = 0.05;
  return q;
}

MeasurementNoise measurement_noise_from_weight(double w) {
  if (!(w > 0.0)) {
    throw std::invalid_argument("measurement_noise_from_weight: weight must be > 0");
  }
  MeasurementNoise r;
  r.sigma_fwd_w = std::clamp(1.5 / w, 0.5, 8.0);
  r.sigma_lat_w = std::clamp(3.0 / w, 1.0, 12.0);
  return r;
}

UkfState make_initial_state(const Pose2& origin) {
  UkfState s;
  s.mean = origin;
  s.c(0, 0) = 0.01 * 0.01;
  s.c(1, 1) = 0.01 * 0.01;
  s.c(2, 2) = 0.05 * 0.05;
  return s;
}

UkfState predict(const UkfState& state, const BodyIncrement& inc, const ProcessNoise& q,
                 const SigmaParams& params, double q_scale) {
  if (q_scale < 0.0) {
    throw std::invalid_argument("predict: q_scale must be >= 0");
  }
  const SigmaWeights w = van_der_merwe_weights(params);
  const Eigen::Matrix3d cov = to_eigen(state);
  auto pts = sigma_points(state.mean, cov, w.scale);
  for (auto& p : pts) {
    p = compose(p, inc);
  }

  UkfState out;
  // the increment is deterministic, so the mean advances by exactly the
  // motion model; sigma points carry the covariance only
  out.mean = compose(state.mean, inc);

  Eigen::Matrix3d p_new = Eigen::Matrix3d::Zero();
  for (int i = 0; i < kNumSigma; ++i) {
    const Eigen::Vector3d d = residual(pts[static_cast<std::size_t>(i)], out.mean);
    p_new += w.wc[static_cast<std::size_t>(i)] * d * d.transpose();
  }

  // process noise is a body-frame quantity; rotate its (fwd, lat) block by
  // the propagated mean heading
  const double c = std::cos(out.mean.theta);
  const double s = std::sin(out.mean.theta);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  rot(0, 0) = c;
  rot(0, 1) = -s;
  rot(1, 0) = s;
  rot(1, 1) = c;
  Eigen::Matrix3d qm = Eigen::Matrix3d::Zero();
  qm(0, 0) = q.sigma_fwd * q.sigma_fwd;
  qm(1, 1) = q.sigma_lat * q.sigma_lat;
  qm(2, 2) = q.sigma_theta * q.sigma_theta;
  p_new += q_scale * rot * qm * rot.transpose();

  p_new = 0.5 * (p_new + p_new.transpose()).eval();
  from_eigen(p_new, out);
  return out;
}

namespace {

UkfState unscented_position_update(const UkfState& state, double zx, double zy,
                                   const Eigen::Matrix2d& r_world, const SigmaParams& params) {
  if (!std::isfinite(zx) || !std::isfinite(zy)) {
    throw std::invalid_argument("update_position: non-finite measurement");
  }
  const SigmaWeights w = van_der_merwe_weights(params);
  const Eigen::Matrix3d cov = to_eigen(state);
  const auto pts = sigma_points(state.mean, cov, w.scale);

  Eigen::Vector2d z_pred = Eigen::Vector2d::Zero();
  for (int i = 0; i < kNumSigma; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    z_pred += w.wm[static_cast<std::size_t>(i)] * Eigen::Vector2d(p.x, p.y);
  }

  Eigen::Matrix2d s_innov = r_world;
  Eigen::Matrix<double, 3, 2> cross = Eigen::Matrix<double, 3, 2>::Zero();
  for (int i = 0; i < kNumSigma; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    const Eigen::Vector2d dz = Eigen::Vector2d(p.x, p.y) - z_pred;
    const Eigen::Vector3d dx = residual(p, state.mean);
    s_innov += w.wc[static_cast<std::size_t>(i)] * dz * dz.transpose();
    cross += w.wc[static_cast<std::size_t>(i)] * dx * dz.transpose();
  }

  const double det = s_innov(0, 0) * s_innov(1, 1) - s_innov(0, 1) * s_innov(1, 0);
  if (!(std::abs(det) > 1e-300)) {
    throw NumericalError("ukf: innovation covariance is singular");
  }
  Eigen::Matrix2d s_inv;
  s_inv << s_innov(1, 1), -s_innov(0, 1), -s_innov(1, 0), s_innov(0, 0);
  s_inv /= det;
  const Eigen::Matrix<double, 3, 2> gain = cross * s_inv;

  const Eigen::Vector2d innov(zx - z_pred(0), zy - z_pred(1));
  const Eigen::Vector3d corr = gain * innov;

  UkfState out;
  out.mean = Pose2(state.mean.x + corr(0), state.mean.y + corr(1),
                   state.mean.theta + corr(2));
  Eigen::Matrix3d p_new = cov - gain * s_innov * gain.transpose();
  p_new = 0.5 * (p_new + p_new.transpose()).eval();
  from_eigen(p_new, out);
  return out;
}

}  // namespace

UkfState update_position(const UkfState& state, double zx, double zy,
                         const MeasurementNoise& r, double theta_meas,
                         const SigmaParams& params) {
  if (r.sigma_fwd_w < 0.5 || r.sigma_fwd_w > 8.0 || r.sigma_lat_w < 1.0 ||
      r.sigma_lat_w > 12.0) {
    throw std::invalid_argument("update_position: measurement noise outside clip ranges");
  }
  const double c = std::cos(theta_meas);
  const double s = std::sin(theta_meas);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  Eigen::Matrix2d body = Eigen::Matrix2d::Zero();
  body(0, 0) = r.sigma_fwd_w * r.sigma_fwd_w;
  body(1, 1) = r.sigma_lat_w * r.sigma_lat_w;
  const Eigen::Matrix2d r_world = rot * body * rot.transpose();
  return unscented_position_update(state, zx, zy, r_world, params);
}

UkfState update_position_world_cov(const UkfState& state, double zx, double zy,
                                   const std::array<double, 4>& r_world,
                                   const SigmaParams& params) {
  Eigen::Matrix2d r;
  r << r_world[0], r_world[1], r_world[2], r_world[3];
  return unscented_position_update(state, zx, zy, r, params);
}

}  // namespace cvnav
