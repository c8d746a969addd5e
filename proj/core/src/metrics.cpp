#include "cvnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvnav {

namespace {

double rmse(const std::vector<double>& errors) {
  double acc = 0.0;
  for (const double e : errors) {
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

}  // namespace

std::vector<TimedPose> align_first_pose(const std::vector<TimedPose>& est,
                                        const std::vector<TimedPose>& truth) {
  if (est.empty() || est.size() != truth.size()) {
    throw std::invalid_argument("align_first_pose: series must be non-empty and equal length");
  }
  // T = truth0 * est0^-1 maps the estimate frame so est0 lands on truth0
  const Pose2& e0 = est.front().pose;
  const Pose2& t0 = truth.front().pose;
  const double dtheta = wrap_angle(t0.theta - e0.theta);
  const double c = std::cos(dtheta);
  const double s = std::sin(dtheta);
  std::vector<TimedPose> out;
  out.reserve(est.size());
  for (const TimedPose& tp : est) {
    const double rx = tp.pose.x - e0.x;
    const double ry = tp.pose.y - e0.y;
    out.push_back({tp.t, Pose2(t0.x + c * rx - s * ry, t0.y + s * rx + c * ry,
                               tp.pose.theta + dtheta)});
  }
  return out;
}

std::vector<double> position_errors(const std::vector<TimedPose>& est,
                                    const std::vector<TimedPose>& truth) {
  if (est.empty() || est.size() != truth.size()) {
    throw std::invalid_argument("position_errors: series must be non-empty and equal length");
  }
  std::vector<double> errors(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    errors[i] = std::hypot(est[i].pose.x - truth[i].pose.x, est[i].pose.y - truth[i].pose.y);
  }
  return errors;
}

double ate_rmse(const std::vector<TimedPose>& est, const std::vector<TimedPose>& truth) {
  return rmse(position_errors(align_first_pose(est, truth), truth));
}

std::optional<double> steady_state_rmse(const std::vector<TimedPose>& est,
                                        const std::vector<TimedPose>& truth,
                                        const std::vector<int>& fix_frames) {
  if (fix_frames.size() < 3) {
    return std::nullopt;
  }
  const int third = fix_frames[2];
  const auto errors = position_errors(est, truth);
  std::vector<double> tail;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (static_cast<int>(i) > third) {
      tail.push_back(errors[i]);
    }
  }
  if (tail.empty()) {
    return std::nullopt;
  }
  return rmse(tail);
}

double drift_rate(double ate, double length_km) {
  if (!(length_km > 0.0)) {
    throw std::invalid_argument("drift_rate: trajectory length must be > 0");
  }
  return ate / length_km;
}

double fixes_per_km(int accepted_count, double length_km) {
  if (!(length_km > 0.0)) {
    throw std::invalid_argument("fixes_per_km: trajectory length must be > 0");
  }
  return static_cast<double>(accepted_count) / length_km;
}

double trajectory_length_km(const std::vector<TimedPose>& series) {
  double len = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    len += std::hypot(series[i].pose.x - series[i - 1].pose.x,
                      series[i].pose.y - series[i - 1].pose.y);
  }
  return len / 1000.0;
}

TrajectoryMetrics compute_metrics(const std::vector<TimedPose>& est,
                                  const std::vector<TimedPose>& truth,
                                  const std::vector<int>& fix_frames) {
  TrajectoryMetrics m;
  m.ate_rmse = ate_rmse(est, truth);
  m.trajectory_length_km = trajectory_length_km(truth);
  m.drift_rate = drift_rate(m.ate_rmse, m.trajectory_length_km);
  m.steady_state_rmse = steady_state_rmse(est, truth, fix_frames);
  m.fixes_per_km = fixes_per_km(static_cast<int>(fix_frames.size()), m.trajectory_length_km);
  return m;
}

std::pair<std::vector<TimedPose>, std::vector<TimedPose>> associate_by_time(
    const std::vector<TimedPose>& est, const std::vector<TimedPose>& truth, double max_gap) {
  if (est.empty() || truth.empty()) {
    throw std::invalid_argument("associate_by_time: empty series");
  }
  std::vector<TimedPose> ea;
  std::vector<TimedPose> ta;
  ea.reserve(est.size());
  ta.reserve(est.size());
  std::size_t j = 0;
  for (const TimedPose& e : est) {
    while (j + 1 < truth.size() &&
           std::abs(truth[j + 1].t - e.t) <= std::abs(truth[j].t - e.t)) {
      ++j;
    }
    if (std::abs(truth[j].t - e.t) > max_gap) {
      throw std::invalid_argument("associate_by_time: timestamp gap exceeds limit");
    }
    ea.push_back(e);
    ta.push_back(truth[j]);
  }
  return {std::move(ea), std::move(ta)};
}

}  // namespace cvnav
