#pragma once

#include <string>
#include <vector>

#include "cvnav/matcher.hpp"
#include "cvnav/metrics.hpp"
#include "cvnav/simulation.hpp"

namespace cvnav {

// Trajectory CSV: header "t,x,y,theta", one row per frame, fixed 12 decimal
// places so metrics survive a round-trip.
void write_trajectory_csv(const std::string& path, const std::vector<TimedPose>& series);
std::vector<TimedPose> read_trajectory_csv(const std::string& path);

// IMU log, JSONL, one record per line:
//   {"t": s, "yaw_rate": rad/s, "accel_fwd": m/s2, "speed": m/s,
//    "heading": rad, "dt": s}
void write_imu_jsonl(const std::string& path, const ImuStream& stream);
ImuStream read_imu_jsonl(const std::string& path);

// Fix replay log, JSONL: {"frame": int, "r": [r00,r01,r10,r11],
// "t": [tx,ty], "w": float}. Missing frames mean no fix was available.
void write_fix_jsonl(const std::string& path,
                     const std::vector<std::pair<int, CvglFix>>& fixes);
FixReplaySource read_fix_jsonl(const std::string& path);

// Plain key-value scenario/pipeline config file with [scenario], [trigger],
// [matcher] and [pipeline] sections; keys mirror the config struct fields.
struct SimulationSetup {
  ScenarioConfig scenario;
  PipelineConfig pipeline;
  SimMatcherConfig matcher;
};

SimulationSetup parse_config_text(const std::string& text);
SimulationSetup read_config_file(const std::string& path);
std::string format_config(const SimulationSetup& setup);

}  // namespace cvnav
