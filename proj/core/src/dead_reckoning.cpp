#include "cvnav/dead_reckoning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvnav {

void ImuSample::validate() const {
  if (!std::isfinite(yaw_rate) || !std::isfinite(accel_fwd) || !std::isfinite(speed) ||
      !std::isfinite(heading_abs) || !std::isfinite(dt)) {
    throw std::invalid_argument("ImuSample: non-finite field");
  }
  if (dt <= 0.0) {
    throw std::invalid_argument("ImuSample: dt must be > 0");
  }
}

void ImuCalibration::validate() const {
  if (!(sigma_omega > 0.0) || !(accel_hp_cutoff > 0.0)) {
    throw std::invalid_argument("ImuCalibration: sigma_omega and accel_hp_cutoff must be > 0");
  }
}

Preintegrator::Preintegrator(const Pose2& start, double hp_cutoff_hz, SpeedSource speed_source)
    : position_(start),
      last_heading_(start.theta),
      speed_source_(speed_source),
      hp_cutoff_hz_(hp_cutoff_hz) {
  if (!(hp_cutoff_hz > 0.0)) {
    throw std::invalid_argument("Preintegrator: hp cutoff must be > 0");
  }
}

void Preintegrator::integrate(const ImuSample& s) {
  s.validate();

  double speed = s.speed;
  if (speed_source_ == SpeedSource::kAccelIntegration) {
    speed = velocity_;  // displacement uses the speed at the step start
    velocity_ += s.accel_fwd * s.dt;
  } else {
    velocity_ = s.speed;
  }

  const double d_heading = wrap_angle(s.heading_abs - last_heading_);
  last_increment_ = BodyIncrement(speed * s.dt, 0.0, d_heading);
  position_ = compose(position_, last_increment_);
  distance_ += std::abs(speed) * s.dt;
  elapsed_ += s.dt;
  last_heading_ = s.heading_abs;

  // high-pass the forward accelerometer; the filter state survives anchor
  // resets, only the window statistics restart
  const double alpha = 1.0 / (1.0 + 2.0 * std::numbers::pi * hp_cutoff_hz_ * s.dt);
  double residual = 0.0;
  if (hp_primed_) {
    residual = alpha * (hp_prev_output_ + s.accel_fwd - hp_prev_input_);
  }
  hp_prev_input_ = s.accel_fwd;
  hp_prev_output_ = residual;
  hp_primed_ = true;

  ++window_count_;
  const double delta = residual - window_mean_;
  window_mean_ += delta / static_cast<double>(window_count_);
  window_m2_ += delta * (residual - window_mean_);
}

void Preintegrator::reset_position_anchor(double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw std::invalid_argument("reset_position_anchor: non-finite position");
  }
  position_ = Pose2(x, y, position_.theta);
  distance_ = 0.0;
  elapsed_ = 0.0;
  window_count_ = 0;
  window_mean_ = 0.0;
  window_m2_ = 0.0;
}

double Preintegrator::accel_residual_std() const {
  if (window_count_ < 2) {
    return 0.0;
  }
  return std::sqrt(window_m2_ / static_cast<double>(window_count_ - 1));
}

double cross_track_error(const ImuCalibration& cal, double distance, double elapsed) {
  cal.validate();
  if (distance < 0.0 || elapsed < 0.0) {
    throw std::invalid_argument("cross_track_error: negative distance or time");
  }
  return 3.0 * distance * cal.sigma_omega * std::sqrt(elapsed);
}

double along_track_error(const Preintegrator& pre) {
  return 0.5 * pre.accel_residual_std() * pre.elapsed() * pre.elapsed();
}

ErrorEnvelope composite_error(const Preintegrator& pre, const ImuCalibration& cal,
                              const Pose2& filter_position) {
  ErrorEnvelope env;
  env.eps_cross = cross_track_error(cal, pre.distance(), pre.elapsed());
  env.eps_along = along_track_error(pre);
  env.d_div = std::hypot(filter_position.x - pre.position().x,
                         filter_position.y - pre.position().y);
  env.eps_imu = std::max({env.eps_cross, env.eps_along, 0.03 * env.d_div});
  return env;
}

}  // namespace cvnav
