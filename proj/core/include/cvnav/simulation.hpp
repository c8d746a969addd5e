#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvnav/dead_reckoning.hpp"
#include "cvnav/factor_graph.hpp"
#include "cvnav/matcher.hpp"
#include "cvnav/metrics.hpp"
#include "cvnav/trigger.hpp"
#include "cvnav/ukf.hpp"

namespace cvnav {

// Synthetic ground truth plus noisy sensor streams, the end-to-end pipeline
// (dead-reckon -> trigger -> search -> gate -> filter -> graph), and the
// Monte Carlo driver for ablation studies.

struct ScenarioConfig {
  std::vector<std::array<double, 2>> waypoints;
  std::vector<double> speed_profile;  // m/s; one entry per segment, or one for all
  double imu_rate = 100.0;            // Hz
  double camera_rate = 10.0;          // Hz; must divide imu_rate
  double gyro_noise = 0.002;          // rad/sqrt(s) angle random walk
  double accel_bias_walk = 0.01;      // m/s^2/sqrt(s)
  double heading_noise = 0.005;       // rad white noise per compass sample
  double accel_noise = 0.01;          // m/s^2 white noise per accel sample
  double speed_noise = 0.0;           // m/s white noise per speed sample
  std::uint64_t seed = 0;
  SpeedSource speed_source = SpeedSource::kSpeedChannel;

  void validate() const;
};

struct TruthSample {
  double t = 0.0;
  Pose2 pose;
  double speed = 0.0;
  double yaw_rate = 0.0;
  double accel_fwd = 0.0;
};

/// Constant-speed piecewise path through the waypoints with circular-arc
/// corner blending (radius min(10 m, half the shorter adjacent segment)),
/// sampled at imu_rate. Heading is the path tangent.
std::vector<TruthSample> generate_trajectory(const ScenarioConfig& cfg);

struct ImuStream {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double initial_heading = 0.0;    // measured compass heading at start-up
  std::vector<double> t;           // sample start times
  std::vector<ImuSample> samples;  // sample k covers [t[k], t[k] + dt)
};

/// Noisy sensor stream: yaw rate with white gyro noise, compass heading with
/// the integrated gyro walk plus per-sample white noise, accelerometer with a
/// random-walk bias, speed from the true profile (white noise optional).
ImuStream synthesize_imu(const std::vector<TruthSample>& truth, const ScenarioConfig& cfg);

struct PipelineConfig {
  ImuCalibration calibration;
  TriggerConfig trigger;
  SigmaParams sigma_params;
  // Process noise sigmas describe one fusion interval; each IMU step adds
  // Q * (dt / q_time_constant) so the budget accrues over that interval.
  double q_time_constant = 2.0;  // s
  bool smooth = true;

  void validate() const;
};

struct AblationFlags {
  bool no_yaw_gate = false;
  bool single_crop = false;
  bool isotropic_noise = false;
  bool no_forward_bias = false;
  bool ukf_only = false;        // skip the pose-graph smoother
  bool disable_matcher = false; // never issue searches (dead-reckoning only)
};

enum class TriggerCause { kError, kTime };

struct TriggerEvent {
  int frame = 0;
  TriggerCause cause = TriggerCause::kError;
  double eps_imu = 0.0;
  double true_error = -1.0;  // m; -1 when ground truth is unavailable
};

enum class FixOutcome { kAccepted, kYawRejected, kAllMiss };

struct FixEvent {
  int frame = 0;
  FixOutcome outcome = FixOutcome::kAccepted;
  double weight = 0.0;
  Pose2 global;           // pose implied by the fix (accepted/rejected only)
  CvglFix fix;            // raw matcher return, relative to the winning crop
  CropQuery query;        // winning crop
  CropQuery centre_query; // centre crop; fixes are exported in this frame
};

struct RunResult {
  std::vector<double> t;  // shared frame timestamps
  std::vector<TimedPose> truth;       // empty on replay without ground truth
  std::vector<TimedPose> imu_only;
  std::vector<TimedPose> ukf_online;
  std::vector<TimedPose> smoothed;
  std::vector<TriggerEvent> triggers;
  std::vector<FixEvent> fixes;        // one entry per search outcome
  std::vector<int> accepted_frames;   // ascending series indices
  double trajectory_length_km = 0.0;  // truth length; estimate length on replay
};

/// Full simulated run: synthesizes sensors, runs the online pipeline and the
/// offline smoother, and records all four trajectory series at camera rate.
RunResult run_pipeline(const ScenarioConfig& scenario, const PipelineConfig& pipeline,
                       const SimMatcherConfig& matcher, const AblationFlags& flags = {});

/// Same pipeline fed from a recorded IMU stream and an external measurement
/// source (e.g. replayed fixes). Ground-truth-dependent outputs are empty.
RunResult run_replay(const ImuStream& stream, MeasurementSource& source,
                     const PipelineConfig& pipeline, double camera_rate,
                     const AblationFlags& flags = {});

struct AblationConfigResult {
  std::string name;
  std::vector<double> ate_by_seed;  // ordered by seed index
  double median_ate = 0.0;
  double p25_ate = 0.0;
  double p75_ate = 0.0;
};

/// Runs the named flag configurations over n_seeds seeds (scenario.seed + i).
/// The reported ATE uses the smoothed trajectory except for configurations
/// with ukf_only set, which report the online filter trajectory.
std::vector<AblationConfigResult> monte_carlo(
    const ScenarioConfig& scenario, const PipelineConfig& pipeline,
    const SimMatcherConfig& matcher,
    const std::vector<std::pair<std::string, AblationFlags>>& configs, int n_seeds,
    int n_workers = 0);

/// The standard ablation matrix: full, no_yaw_gate, single_crop,
/// isotropic_noise, no_fwd_bias, ukf_only.
std::vector<std::pair<std::string, AblationFlags>> standard_ablation_matrix();

}  // namespace cvnav
