#pragma once

#include <optional>
#include <vector>

#include "cvnav/geometry.hpp"

namespace cvnav {

struct TimedPose {
  double t = 0.0;
  Pose2 pose;
};

struct TrajectoryMetrics {
  double ate_rmse = 0.0;                    // m
  double drift_rate = 0.0;                  // m/km
  std::optional<double> steady_state_rmse;  // m; absent with < 3 accepted fixes
  double fixes_per_km = 0.0;
  double trajectory_length_km = 0.0;
};

/// Rigidly transforms est so its first pose coincides with truth's first pose.
std::vector<TimedPose> align_first_pose(const std::vector<TimedPose>& est,
                                        const std::vector<TimedPose>& truth);

/// Per-frame position error without any alignment (both series absolute).
std::vector<double> position_errors(const std::vector<TimedPose>& est,
                                    const std::vector<TimedPose>& truth);

/// RMSE of per-frame position error after rigid first-pose alignment.
double ate_rmse(const std::vector<TimedPose>& est, const std::vector<TimedPose>& truth);

/// RMSE restricted to frames strictly after the third accepted fix.
/// fix_frames holds the series indices of accepted fixes, ascending.
std::optional<double> steady_state_rmse(const std::vector<TimedPose>& est,
                                        const std::vector<TimedPose>& truth,
                                        const std::vector<int>& fix_frames);

double drift_rate(double ate, double length_km);
double fixes_per_km(int accepted_count, double length_km);

/// Path length of a pose series, in km.
double trajectory_length_km(const std::vector<TimedPose>& series);

TrajectoryMetrics compute_metrics(const std::vector<TimedPose>& est,
                                  const std::vector<TimedPose>& truth,
                                  const std::vector<int>& fix_frames);

/// Nearest-timestamp association for series at different rates. Gaps larger
/// than max_gap are an error. Returns (est', truth') of equal length.
std::pair<std::vector<TimedPose>, std::vector<TimedPose>> associate_by_time(
    const std::vector<TimedPose>& est, const std::vector<TimedPose>& truth, double max_gap);

}  // namespace cvnav
