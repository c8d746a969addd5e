#pragma once

#include <array>
#include <stdexcept>

#include "cvnav/geometry.hpp"

namespace cvnav {

/// Thrown when covariance conditioning is beyond repair (Cholesky fails after
/// jitter escalation, or the innovation covariance is singular).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SigmaParams {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;

  void validate() const {
    if (!(alpha > 0.0)) {
      throw std::invalid_argument("SigmaParams: alpha must be > 0");
    }
  }
};

// Body-frame process noise per fusion interval. sigma_fwd/sigma_lat scale
// with the drift envelope; sigma_theta is constant.
struct ProcessNoise {
  double sigma_fwd = 1.0;    // m, >= 1.0
  double sigma_lat = 1.5;    // m, >= 1.5
  double sigma_theta = 0.05;  // rad
};

/// sigma_fwd = max(1.0, 2.0*eps), sigma_lat = max(1.5, 0.3*eps), sigma_theta = 0.05.
ProcessNoise process_noise_from_eps(double eps_imu);

// Body-frame measurement noise, inverse-weight scaled and clipped.
struct MeasurementNoise {
  double sigma_fwd_w = 1.5;  // m, in [0.5, 8.0]
  double sigma_lat_w = 3.0;  // m, in [1.0, 12.0]
};

/// sigma_fwd_w = clip(1.5/w, 0.5, 8.0), sigma_lat_w = clip(3.0/w, 1.0, 12.0).
/// Throws on w <= 0.
MeasurementNoise measurement_noise_from_weight(double w);

// 3-state filter on (x, y, theta). Covariance is row-major 3x3, symmetric
// positive semi-definite; angle statistics are wrap-aware throughout.
struct UkfState {
  Pose2 mean;
  std::array<double, 9> cov{};  // row-major

  double& c(int r, int col) { return cov[static_cast<std::size_t>(r * 3 + col)]; }
  double c(int r, int col) const { return cov[static_cast<std::size_t>(r * 3 + col)]; }
};

/// Start-up state: near-exact origin prior, cov = diag(0.01^2, 0.01^2, 0.05^2).
UkfState make_initial_state(const Pose2& origin);

/// Sigma-point covariance propagation through the body-frame motion model.
/// The mean is advanced deterministically by the (noise-free) increment;
/// process noise is added in the body frame of the propagated mean, scaled
/// by q_scale (the fraction of the fusion interval this step covers).
UkfState predict(const UkfState& state, const BodyIncrement& inc, const ProcessNoise& q,
                 const SigmaParams& params, double q_scale = 1.0);

/// Position-only unscented update. The measurement covariance is built in the
/// body frame from r and rotated into the world by theta_meas (the compass
/// heading at the localised frame, not the posterior heading).
UkfState update_position(const UkfState& state, double zx, double zy,
                         const MeasurementNoise& r, double theta_meas,
                         const SigmaParams& params);

/// Same update with an explicit world-frame 2x2 measurement covariance
/// (row-major). Bypasses the clip-range validation; used by noise ablations.
UkfState update_position_world_cov(const UkfState& state, double zx, double zy,
                                   const std::array<double, 4>& r_world,
                                   const SigmaParams& params);

}  // namespace cvnav
