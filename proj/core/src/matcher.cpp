#include "cvnav/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvnav {

namespace {
constexpr double kMinWeight = 1e-3;  // keeps 1/w finite
}

Pose2 fix_to_global(const CropQuery& q, const CvglFix& f) {
  f.validate();
  // tile frame -> body frame: image-up is forward, image-right is -lateral
  const double fwd = f.ty;
  const double lat = -f.tx;
  const double c = std::cos(q.heading);
  const double s = std::sin(q.heading);
  return Pose2(q.center_x + c * fwd - s * lat,
               q.center_y + s * fwd + c * lat,
               q.heading + yaw_residual(f.rotation));
}

CvglFix fix_from_global(const CropQuery& q, const Pose2& global, double weight) {
  const double dx = global.x - q.center_x;
  const double dy = global.y - q.center_y;
  const double c = std::cos(q.heading);
  const double s = std::sin(q.heading);
  const double fwd = c * dx + s * dy;
  const double lat = -s * dx + c * dy;
  CvglFix f;
  f.tx = -lat;
  f.ty = fwd;
  f.rotation = Rot2::from_angle(wrap_angle(global.theta - q.heading));
  f.weight = weight;
  f.validate();
  return f;
}

void SimMatcherConfig::validate() const {
  if (!(capture_radius > 0.0)) {
    throw std::invalid_argument("SimMatcherConfig: capture_radius must be > 0");
  }
  if (!(sigma_fwd_true > 0.0) || !(sigma_lat_true > 0.0)) {
    throw std::invalid_argument("SimMatcherConfig: noise sigmas must be > 0");
  }
  if (weight_decay < 0.0) {
    throw std::invalid_argument("SimMatcherConfig: weight_decay must be >= 0");
  }
  if (symmetry_fail_prob < 0.0 || symmetry_fail_prob > 1.0) {
    throw std::invalid_argument("SimMatcherConfig: symmetry_fail_prob must be in [0, 1]");
  }
}

SimulatedMatcher::SimulatedMatcher(const SimMatcherConfig& cfg)
    : cfg_(cfg),
      noise_rng_(mix_seed(cfg.rng_seed, 0x6d61746368ull)),
      fail_rng_(mix_seed(cfg.rng_seed, 0x6661696cull)) {
  cfg_.validate();
}

std::optional<CvglFix> SimulatedMatcher::query(const CropQuery& q,
                                               const std::optional<Pose2>& truth) {
  if (!truth) {
    throw std::invalid_argument("SimulatedMatcher: query requires the true pose");
  }
  const double off_x = truth->x - q.center_x;
  const double off_y = truth->y - q.center_y;
  const double offset = std::hypot(off_x, off_y);
  if (offset > cfg_.capture_radius) {
    return std::nullopt;  // failed match; no RNG draws consumed
  }

  // anisotropic noise in the true body frame
  const double n_fwd = cfg_.sigma_fwd_true * noise_rng_.gaussian();
  const double n_lat = cfg_.sigma_lat_true * noise_rng_.gaussian();
  const double ct = std::cos(truth->theta);
  const double st = std::sin(truth->theta);
  double est_x = truth->x + ct * n_fwd - st * n_lat;
  double est_y = truth->y + st * n_fwd + ct * n_lat;
  double psi_res = wrap_angle(truth->theta - q.heading);

  const double u = fail_rng_.uniform();
  if (u < cfg_.symmetry_fail_prob) {
    // lock onto a rotated copy of the structure: pose rotated about the
    // tile center, weight undiminished
    const int branch = std::min(2, static_cast<int>(u / cfg_.symmetry_fail_prob * 3.0));
    const double half_pi = 0.5 * std::numbers::pi;
    const double sym = branch == 0 ? half_pi : (branch == 1 ? -half_pi : std::numbers::pi);
    const double cs = std::cos(sym);
    const double ss = std::sin(sym);
    const double rx = est_x - q.center_x;
    const double ry = est_y - q.center_y;
    est_x = q.center_x + cs * rx - ss * ry;
    est_y = q.center_y + ss * rx + cs * ry;
    psi_res = wrap_angle(psi_res + sym);
  }

  const double w =
      std::clamp(std::exp(-cfg_.weight_decay * offset), kMinWeight, 1.0);
  return fix_from_global(q, Pose2(est_x, est_y, wrap_angle(q.heading + psi_res)), w);
}

void FixReplaySource::insert(int frame_index, const CvglFix& fix) {
  fix.validate();
  fixes_[frame_index] = fix;
}

std::optional<CvglFix> FixReplaySource::query(const CropQuery& q,
                                              const std::optional<Pose2>& /*truth*/) {
  const auto it = fixes_.find(q.frame_index);
  if (it == fixes_.end()) {
    return std::nullopt;
  }
  return it->second;
}

}  // namespace cvnav
