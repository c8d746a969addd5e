#include "cvnav/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvnav {

void TriggerConfig::validate() const {
  const bool ok = error_threshold > 0.0 && time_threshold > 0.0 && fwd_bias_coeff > 0.0 &&
                  fwd_bias_cap > 0.0 && cross_coeff > 0.0 && cross_cap > 0.0 && yaw_gate > 0.0;
  if (!ok) {
    throw std::invalid_argument("TriggerConfig: all fields must be > 0");
  }
}

bool should_trigger(const TriggerConfig& cfg, double eps_imu, const TriggerState& st) {
  if (!std::isfinite(eps_imu) || !std::isfinite(st.time_since_fix)) {
    throw std::invalid_argument("should_trigger: non-finite input");
  }
  return eps_imu >= cfg.error_threshold || st.time_since_fix > cfg.time_threshold;
}

double forward_bias(const TriggerConfig& cfg, double eps_imu) {
  if (eps_imu < 0.0) {
    throw std::invalid_argument("forward_bias: eps_imu must be >= 0");
  }
  return std::min(cfg.fwd_bias_coeff * eps_imu, cfg.fwd_bias_cap);
}

std::array<std::pair<double, double>, 5> five_point_offsets(const TriggerConfig& cfg,
                                                            double eps_imu) {
  if (eps_imu < 0.0) {
    throw std::invalid_argument("five_point_offsets: eps_imu must be >= 0");
  }
  const double d = std::min(cfg.cross_coeff * eps_imu, cfg.cross_cap);
  return {{{-d, 0.0}, {0.0, 0.0}, {d, 0.0}, {0.0, -d}, {0.0, d}}};
}

std::optional<SearchResult> multicrop_search(const TriggerConfig& cfg,
                                             MeasurementSource& source,
                                             const Pose2& filter_pose, double eps_imu,
                                             int frame_index,
                                             const std::optional<Pose2>& truth) {
  const double bias = forward_bias(cfg, eps_imu);
  const Pose2 centre = compose(filter_pose, BodyIncrement(bias, 0.0, 0.0));
  const auto offsets = five_point_offsets(cfg, eps_imu);

  std::array<std::optional<CvglFix>, 5> hits;
  std::array<CropQuery, 5> queries;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const Pose2 at = compose(centre, BodyIncrement(offsets[i].first, offsets[i].second, 0.0));
    queries[i] = CropQuery(at.x, at.y, filter_pose.theta, frame_index);
    hits[i] = source.query(queries[i], truth);
  }

  // ties resolve centre, forward, back, left, right
  constexpr std::array<std::size_t, 5> kPriority = {1, 2, 0, 4, 3};
  std::optional<std::size_t> best;
  for (const std::size_t i : kPriority) {
    if (hits[i] && (!best || hits[i]->weight > hits[*best]->weight)) {
      best = i;
    }
  }
  if (!best) {
    return std::nullopt;
  }
  return SearchResult{*hits[*best], queries[*best]};
}

GateDecision yaw_gate(const TriggerConfig& cfg, const CvglFix& fix) {
  fix.validate();
  return std::abs(yaw_residual(fix.rotation)) <= cfg.yaw_gate ? GateDecision::kAccepted
                                                              : GateDecision::kRejected;
}

}  // namespace cvnav
