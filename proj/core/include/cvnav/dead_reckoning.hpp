#pragma once

#include <cstdint>

#include "cvnav/geometry.hpp"

namespace cvnav {

// One inertial step. Heading is the platform's compass-aided absolute yaw;
// the raw yaw rate is carried for calibration and diagnostics only.
struct ImuSample {
  double yaw_rate = 0.0;     // rad/s about vertical
  double accel_fwd = 0.0;    // m/s^2 body-forward specific force
  double speed = 0.0;        // m/s scalar forward speed
  double heading_abs = 0.0;  // rad, absolute ENU yaw at the end of the step
  double dt = 0.0;           // s, > 0

  void validate() const;
};

struct ImuCalibration {
  double sigma_omega = 0.002;    // rad/sqrt(s) gyroscope angle random walk
  double accel_hp_cutoff = 0.5;  // Hz high-pass cutoff for the accel residual

  void validate() const;
};

// Whether forward displacement comes from the speed channel or from
// integrating the forward accelerometer (platforms without odometry).
enum class SpeedSource { kSpeedChannel, kAccelIntegration };

// Accumulated cross-/along-track drift estimates and the composite scalar
// that gates matcher inference and scales process noise.
struct ErrorEnvelope {
  double eps_cross = 0.0;  // m
  double eps_along = 0.0;  // m
  double eps_imu = 0.0;    // m, max(eps_cross, eps_along, 0.03 * d_div)
  double d_div = 0.0;      // m, chord between filter position and preintegrator
};

// Dead-reckons body-frame motion at sensor rate and tracks the quantities
// the drift model needs: distance and time since the last anchor plus the
// high-pass-filtered forward-accelerometer residual window.
//
// Single-owner mutable accumulator; one instance per pipeline thread.
class Preintegrator {
 public:
  Preintegrator(const Pose2& start, double hp_cutoff_hz,
                SpeedSource speed_source = SpeedSource::kSpeedChannel);

  /// Advances the pose by (speed*dt, 0, d_heading); heading is applied at the
  /// start of the step. Throws std::invalid_argument on a non-finite sample.
  void integrate(const ImuSample& s);

  /// Resets only the position channel; heading and velocity are preserved.
  /// Distance, elapsed time and the accel residual window restart from zero.
  void reset_position_anchor(double x, double y);

  const Pose2& position() const { return position_; }
  double distance() const { return distance_; }
  double elapsed() const { return elapsed_; }
  double velocity() const { return velocity_; }

  /// Unbiased standard deviation of the residual window; 0 with < 2 samples.
  double accel_residual_std() const;

  /// Body increment applied by the most recent integrate() call.
  const BodyIncrement& last_increment() const { return last_increment_; }

 private:
  Pose2 position_;
  double distance_ = 0.0;
  double elapsed_ = 0.0;
  double velocity_ = 0.0;
  double last_heading_;
  BodyIncrement last_increment_;
  SpeedSource speed_source_;

  // single-pole discrete high-pass y[k] = a*(y[k-1] + x[k] - x[k-1])
  double hp_cutoff_hz_;
  double hp_prev_input_ = 0.0;
  double hp_prev_output_ = 0.0;
  bool hp_primed_ = false;

  // Welford accumulator over the residual window since the anchor
  std::uint64_t window_count_ = 0;
  double window_mean_ = 0.0;
  double window_m2_ = 0.0;
};

/// Gyro-driven cross-track drift estimate: 3 * distance * sigma_omega * sqrt(T).
/// The leading 3 is a deliberate three-sigma inflation.
double cross_track_error(const ImuCalibration& cal, double distance, double elapsed);

/// Accelerometer-driven along-track drift estimate: 0.5 * std(residual) * T^2.
double along_track_error(const Preintegrator& pre);

/// Full envelope against the filter's current position estimate.
ErrorEnvelope composite_error(const Preintegrator& pre, const ImuCalibration& cal,
                              const Pose2& filter_position);

}  // namespace cvnav
