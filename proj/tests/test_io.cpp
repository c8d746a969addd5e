#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "cvnav/io.hpp"
#include "cvnav/rng.hpp"

using namespace cvnav;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cvnav_test_" + std::to_string(std::rand()) + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("trajectory CSV round-trips metrics to 1e-9") {
  TempDir dir;
  Rng rng(3);
  std::vector<TimedPose> series;
  for (int i = 0; i < 500; ++i) {
    series.push_back({0.1 * i, Pose2(1000.0 * rng.uniform(), 1000.0 * rng.uniform(),
                                     (rng.uniform() - 0.5) * 6.0)});
  }
  const std::string path = dir.file("traj.csv");
  write_trajectory_csv(path, series);
  const auto loaded = read_trajectory_csv(path);
  REQUIRE(loaded.size() == series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    CHECK(std::abs(loaded[i].t - series[i].t) < 1e-9);
    CHECK(std::abs(loaded[i].pose.x - series[i].pose.x) < 1e-9);
    CHECK(std::abs(loaded[i].pose.y - series[i].pose.y) < 1e-9);
    CHECK(std::abs(loaded[i].pose.theta - series[i].pose.theta) < 1e-9);
  }
}

TEST_CASE("trajectory CSV header is mandatory") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  std::ofstream(path) << "1,2,3,4\n";
  CHECK_THROWS(read_trajectory_csv(path));
}

TEST_CASE("IMU JSONL round-trips bit-exactly") {
  TempDir dir;
  Rng rng(5);
  ImuStream stream;
  stream.origin_x = 12.25;
  stream.origin_y = -3.5;
  stream.initial_heading = 0.62831853071795862;
  for (int i = 0; i < 200; ++i) {
    ImuSample s;
    s.yaw_rate = rng.gaussian() * 0.3;
    s.accel_fwd = rng.gaussian();
    s.speed = 5.0 + rng.uniform();
    s.heading_abs = rng.gaussian();
    s.dt = 0.01;
    stream.samples.push_back(s);
    stream.t.push_back(i * 0.01);
  }
  const std::string path = dir.file("imu.jsonl");
  write_imu_jsonl(path, stream);
  const ImuStream loaded = read_imu_jsonl(path);
  REQUIRE(loaded.samples.size() == stream.samples.size());
  CHECK(loaded.origin_x == stream.origin_x);
  CHECK(loaded.initial_heading == stream.initial_heading);
  for (std::size_t i = 0; i < stream.samples.size(); ++i) {
    CHECK(loaded.samples[i].yaw_rate == stream.samples[i].yaw_rate);
    CHECK(loaded.samples[i].accel_fwd == stream.samples[i].accel_fwd);
    CHECK(loaded.samples[i].speed == stream.samples[i].speed);
    CHECK(loaded.samples[i].heading_abs == stream.samples[i].heading_abs);
    CHECK(loaded.samples[i].dt == stream.samples[i].dt);
    CHECK(loaded.t[i] == stream.t[i]);
  }
}

TEST_CASE("IMU JSONL uses the pinned field names") {
  TempDir dir;
  ImuStream stream;
  ImuSample s;
  s.yaw_rate = 0.1;
  s.accel_fwd = 0.2;
  s.speed = 3.0;
  s.heading_abs = 0.5;
  s.dt = 0.01;
  stream.samples.push_back(s);
  stream.t.push_back(0.0);
  const std::string path = dir.file("imu.jsonl");
  write_imu_jsonl(path, stream);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  for (const char* key : {"\"t\"", "\"yaw_rate\"", "\"accel_fwd\"", "\"speed\"",
                          "\"heading\"", "\"dt\""}) {
    CHECK(line.find(key) != std::string::npos);
  }
}

TEST_CASE("fix JSONL round-trips and missing frames stay missing") {
  TempDir dir;
  std::vector<std::pair<int, CvglFix>> fixes;
  CvglFix f;
  f.rotation = Rot2::from_angle(0.2);
  f.tx = 1.5;
  f.ty = -0.75;
  f.weight = 0.875;
  fixes.push_back({3, f});
  f.rotation = Rot2::from_angle(-1.9);
  f.weight = 0.125;
  fixes.push_back({9, f});

  const std::string path = dir.file("fixes.jsonl");
  write_fix_jsonl(path, fixes);
  FixReplaySource src = read_fix_jsonl(path);
  CHECK(src.size() == 2);
  const auto got = src.query(CropQuery(0, 0, 0, 3), std::nullopt);
  REQUIRE(got.has_value());
  CHECK(got->tx == 1.5);
  CHECK(got->ty == -0.75);
  CHECK(got->weight == 0.875);
  CHECK(yaw_residual(got->rotation) == doctest::Approx(0.2));
  CHECK_FALSE(src.query(CropQuery(0, 0, 0, 4), std::nullopt).has_value());
}

TEST_CASE("config file parsing with sections") {
  const std::string text = R"(# reference scenario
[scenario]
waypoints = 0,0; 400,0; 400,300
speed_profile = 8.0
imu_rate = 100
camera_rate = 10
gyro_noise = 0.002
heading_noise = 0.01
seed = 7

[trigger]
error_threshold = 1.5
time_threshold = 2.5
yaw_gate = 0.35

[matcher]
capture_radius = 20
weight_decay = 0.1

[pipeline]
sigma_omega = 0.002
q_time_constant = 2.0
)";
  const SimulationSetup setup = parse_config_text(text);
  CHECK(setup.scenario.waypoints.size() == 3);
  CHECK(setup.scenario.waypoints[1][0] == doctest::Approx(400.0));
  CHECK(setup.scenario.speed_profile[0] == doctest::Approx(8.0));
  CHECK(setup.scenario.seed == 7);
  CHECK(setup.pipeline.trigger.error_threshold == doctest::Approx(1.5));
  CHECK(setup.pipeline.trigger.time_threshold == doctest::Approx(2.5));
  CHECK(setup.matcher.weight_decay == doctest::Approx(0.1));
  CHECK(setup.pipeline.calibration.sigma_omega == doctest::Approx(0.002));

  // the seven trigger scalars are all reachable from the [trigger] section
  const std::string trig = R"(
[scenario]
waypoints = 0,0; 10,0
speed_profile = 5
[trigger]
error_threshold = 2
time_threshold = 3
fwd_bias_coeff = 0.5
fwd_bias_cap = 12
cross_coeff = 0.6
cross_cap = 9
yaw_gate = 0.3
)";
  const SimulationSetup ts = parse_config_text(trig);
  CHECK(ts.pipeline.trigger.fwd_bias_coeff == doctest::Approx(0.5));
  CHECK(ts.pipeline.trigger.fwd_bias_cap == doctest::Approx(12.0));
  CHECK(ts.pipeline.trigger.cross_coeff == doctest::Approx(0.6));
  CHECK(ts.pipeline.trigger.cross_cap == doctest::Approx(9.0));
  CHECK(ts.pipeline.trigger.yaw_gate == doctest::Approx(0.3));
}

TEST_CASE("config errors name the offending field") {
  CHECK_THROWS_WITH_AS(parse_config_text("[scenario]\nspeed_profile = 5\n"),
                       doctest::Contains("waypoints"), std::runtime_error);
  const std::string bad = "[scenario]\nwaypoints = 0,0; 1\nspeed_profile = 5\n";
  CHECK_THROWS_AS(parse_config_text(bad), std::runtime_error);
}

TEST_CASE("format_config round-trips") {
  SimulationSetup setup;
  setup.scenario.waypoints = {{0, 0}, {250, 0}, {250, 250}};
  setup.scenario.speed_profile = {7.5};
  setup.scenario.seed = 42;
  setup.matcher.weight_decay = 0.2;
  setup.pipeline.trigger.error_threshold = 3.0;
  const SimulationSetup back = parse_config_text(format_config(setup));
  CHECK(back.scenario.waypoints.size() == 3);
  CHECK(back.scenario.seed == 42);
  CHECK(back.matcher.weight_decay == doctest::Approx(0.2));
  CHECK(back.pipeline.trigger.error_threshold == doctest::Approx(3.0));
}
