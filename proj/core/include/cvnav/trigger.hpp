#pragma once

#include <array>
#include <optional>
#include <utility>

#include "cvnav/matcher.hpp"

namespace cvnav {

struct TriggerConfig {
  double error_threshold = 1.0;  // m, error trigger fires at eps >= threshold
  double time_threshold = 2.0;   // s, time trigger fires at t > threshold
  double fwd_bias_coeff = 0.4;
  double fwd_bias_cap = 15.0;    // m
  double cross_coeff = 0.5;
  double cross_cap = 10.0;       // m
  double yaw_gate = 0.35;        // rad

  void validate() const;
};

// Wall-clock time since the last search outcome. Reset on accepted fixes and
// on yaw-gate rejections alike, so a bad scene cannot re-fire the time
// trigger immediately.
struct TriggerState {
  double time_since_fix = 0.0;

  void advance(double dt) { time_since_fix += dt; }
  void reset() { time_since_fix = 0.0; }
};

/// Dual trigger: fires on eps_imu >= error_threshold or
/// time_since_fix > time_threshold.
bool should_trigger(const TriggerConfig& cfg, double eps_imu, const TriggerState& st);

/// Search-centre shift along the heading: min(fwd_bias_coeff * eps, cap).
double forward_bias(const TriggerConfig& cfg, double eps_imu);

/// Five body-frame (fwd, lat) offsets in fixed order
/// [back, centre, forward, right, left] with d = min(cross_coeff * eps, cap).
std::array<std::pair<double, double>, 5> five_point_offsets(const TriggerConfig& cfg,
                                                            double eps_imu);

struct SearchResult {
  CvglFix fix;
  CropQuery query;
};

/// Queries the source at the five offsets around the forward-biased centre
/// and returns the highest-weight hit. Always issues exactly five queries.
/// Ties are broken centre / forward / back / left / right.
std::optional<SearchResult> multicrop_search(const TriggerConfig& cfg,
                                             MeasurementSource& source,
                                             const Pose2& filter_pose, double eps_imu,
                                             int frame_index,
                                             const std::optional<Pose2>& truth);

enum class GateDecision { kAccepted, kRejected };

/// Heading consistency check: accepted iff |yaw_residual| <= yaw_gate.
/// On rejection the caller must reset the trigger clock as if a fix had
/// been processed.
GateDecision yaw_gate(const TriggerConfig& cfg, const CvglFix& fix);

}  // namespace cvnav
