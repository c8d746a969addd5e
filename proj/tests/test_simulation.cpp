#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cvnav/rng.hpp"
#include "cvnav/simulation.hpp"

using namespace cvnav;
using std::numbers::pi;

namespace {

ScenarioConfig straight_line(double length = 100.0, double speed = 10.0) {
  ScenarioConfig cfg;
  cfg.waypoints = {{0.0, 0.0}, {length, 0.0}};
  cfg.speed_profile = {speed};
  cfg.gyro_noise = 0.0;
  cfg.accel_bias_walk = 0.0;
  cfg.heading_noise = 0.0;
  cfg.accel_noise = 0.0;
  return cfg;
}

ScenarioConfig square_loop(double side = 200.0) {
  ScenarioConfig cfg;
  cfg.waypoints = {{0, 0}, {side, 0}, {side, side}, {0, side}, {0, 0}, {side, 0}};
  cfg.speed_profile = {8.0};
  return cfg;
}

PipelineConfig default_pipeline(double sigma_omega = 0.002) {
  PipelineConfig pl;
  pl.calibration.sigma_omega = sigma_omega;
  return pl;
}

}  // namespace

TEST_CASE("straight trajectory sample count and geometry") {
  const auto truth = generate_trajectory(straight_line(100.0, 10.0));
  CHECK(truth.size() == 1000);
  for (const auto& s : truth) {
    CHECK(s.pose.y == doctest::Approx(0.0));
    CHECK(s.pose.theta == doctest::Approx(0.0));
    CHECK(s.yaw_rate == doctest::Approx(0.0));
    CHECK(s.speed == doctest::Approx(10.0));
  }
  CHECK(truth.back().pose.x == doctest::Approx(99.9).epsilon(1e-9));
}

TEST_CASE("square loop headings sweep all four cardinal directions") {
  const auto truth = generate_trajectory(square_loop());
  bool east = false, north = false, west = false, south = false;
  for (const auto& s : truth) {
    if (std::abs(wrap_angle(s.pose.theta - 0.0)) < 0.05) east = true;
    if (std::abs(wrap_angle(s.pose.theta - pi / 2)) < 0.05) north = true;
    if (std::abs(std::abs(s.pose.theta) - pi) < 0.05) west = true;
    if (std::abs(wrap_angle(s.pose.theta + pi / 2)) < 0.05) south = true;
  }
  CHECK(east);
  CHECK(north);
  CHECK(west);
  CHECK(south);
}

TEST_CASE("trajectory sampling is continuous across corners") {
  const auto truth = generate_trajectory(square_loop());
  const double dt = 1.0 / 100.0;
  for (std::size_t i = 1; i < truth.size(); ++i) {
    const double step = std::hypot(truth[i].pose.x - truth[i - 1].pose.x,
                                   truth[i].pose.y - truth[i - 1].pose.y);
    CHECK(step < 8.0 * dt * 1.2);
    CHECK(step > 8.0 * dt * 0.8);
  }
}

TEST_CASE("coincident waypoints are rejected") {
  ScenarioConfig cfg = straight_line();
  cfg.waypoints = {{0, 0}, {0, 0}, {10, 0}};
  CHECK_THROWS_AS(generate_trajectory(cfg), std::invalid_argument);
  cfg = straight_line();
  cfg.speed_profile = {};
  CHECK_THROWS_AS(generate_trajectory(cfg), std::invalid_argument);
  cfg = straight_line();
  cfg.camera_rate = 33.0;  // does not divide 100
  CHECK_THROWS_AS(generate_trajectory(cfg), std::invalid_argument);
}

TEST_CASE("noiseless dead reckoning reproduces truth within 0.1% of distance") {
  ScenarioConfig cfg = square_loop();
  cfg.gyro_noise = 0.0;
  cfg.accel_bias_walk = 0.0;
  cfg.heading_noise = 0.0;
  cfg.accel_noise = 0.0;
  const auto truth = generate_trajectory(cfg);
  const ImuStream stream = synthesize_imu(truth, cfg);

  Preintegrator pre(Pose2(stream.origin_x, stream.origin_y, stream.initial_heading), 0.5);
  for (const auto& s : stream.samples) {
    pre.integrate(s);
  }
  const auto& last = truth.back();
  const double travelled = 8.0 * last.t;
  const double err = std::hypot(pre.position().x - last.pose.x,
                                pre.position().y - last.pose.y);
  CHECK(err < 0.001 * travelled);
}

TEST_CASE("gyro-noise-only heading error variance follows the random walk") {
  ScenarioConfig cfg = straight_line(400.0, 10.0);
  cfg.gyro_noise = 0.01;
  double sum_sq = 0.0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto truth = generate_trajectory(cfg);
    const ImuStream stream = synthesize_imu(truth, cfg);
    const std::size_t last = stream.samples.size() - 1;
    const double t_end = stream.t[last] + stream.samples[last].dt;
    const double err =
        wrap_angle(stream.samples[last].heading_abs - truth[last + 1].pose.theta);
    sum_sq += err * err / t_end;
  }
  const double var_rate = sum_sq / seeds;  // should be ~ gyro_noise^2
  CHECK(var_rate == doctest::Approx(0.01 * 0.01).epsilon(0.20));
}

TEST_CASE("accelerometer bias walk double-integrates with log-log slope 2") {
  ScenarioConfig cfg = straight_line(3000.0, 10.0);
  cfg.accel_bias_walk = 0.01;
  cfg.speed_source = SpeedSource::kAccelIntegration;
  cfg.gyro_noise = 0.0;
  cfg.heading_noise = 0.0;
  cfg.accel_noise = 0.0;

  // median absolute along-track error at two horizons across seeds
  const int seeds = 60;
  std::vector<double> err_t1, err_t2;
  const double t1 = 30.0, t2 = 120.0;
  for (int seed = 0; seed < seeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto truth = generate_trajectory(cfg);
    const ImuStream stream = synthesize_imu(truth, cfg);
    Preintegrator pre(Pose2(0, 0, 0), 0.5, SpeedSource::kAccelIntegration);
    // start from the true speed so only the bias walk drives the error
    ImuSample warm = stream.samples[0];
    double e1 = 0.0, e2 = 0.0;
    Preintegrator dr(Pose2(stream.origin_x, stream.origin_y, stream.initial_heading), 0.5,
                     SpeedSource::kAccelIntegration);
    // inject the initial speed by a synthetic strong first step
    warm.accel_fwd = truth[0].speed / warm.dt;
    dr.integrate(warm);
    for (std::size_t k = 1; k < stream.samples.size(); ++k) {
      dr.integrate(stream.samples[k]);
      const double t = stream.t[k] + stream.samples[k].dt;
      if (std::abs(t - t1) < 5e-3) {
        e1 = std::abs(dr.position().x - truth[k + 1].pose.x);
      }
      if (std::abs(t - t2) < 5e-3) {
        e2 = std::abs(dr.position().x - truth[k + 1].pose.x);
      }
    }
    err_t1.push_back(e1);
    err_t2.push_back(e2);
  }
  std::sort(err_t1.begin(), err_t1.end());
  std::sort(err_t2.begin(), err_t2.end());
  const double m1 = err_t1[seeds / 2];
  const double m2 = err_t2[seeds / 2];
  const double slope = std::log(m2 / m1) / std::log(t2 / t1);
  CHECK(slope > 1.8);
  CHECK(slope < 2.7);  // T^2.5 for a bias random walk; rectangle rule shaves a little
}

TEST_CASE("noiseless end-to-end run tracks truth to below 0.1 m") {
  ScenarioConfig cfg = square_loop();
  cfg.gyro_noise = 0.0;
  cfg.accel_bias_walk = 0.0;
  cfg.heading_noise = 0.0;
  cfg.accel_noise = 0.0;
  SimMatcherConfig mc;
  mc.sigma_fwd_true = 1e-9;
  mc.sigma_lat_true = 1e-9;
  mc.weight_decay = 0.0;
  const RunResult rr = run_pipeline(cfg, default_pipeline(), mc);
  CHECK(ate_rmse(rr.ukf_online, rr.truth) < 0.1);
  CHECK(rr.accepted_frames.size() > 10);
}

TEST_CASE("matcher disabled leaves the filter on the dead-reckoned path") {
  ScenarioConfig cfg = square_loop();
  cfg.gyro_noise = 0.005;
  cfg.heading_noise = 0.02;
  AblationFlags flags;
  flags.disable_matcher = true;
  const RunResult rr = run_pipeline(cfg, default_pipeline(0.005), SimMatcherConfig{}, flags);
  REQUIRE(rr.ukf_online.size() == rr.imu_only.size());
  for (std::size_t i = 0; i < rr.ukf_online.size(); ++i) {
    CHECK(std::abs(rr.ukf_online[i].pose.x - rr.imu_only[i].pose.x) < 1e-6);
    CHECK(std::abs(rr.ukf_online[i].pose.y - rr.imu_only[i].pose.y) < 1e-6);
  }
  CHECK(rr.fixes.empty());
  CHECK(rr.triggers.empty());
}

TEST_CASE("fixed seeds reproduce bit-identical runs") {
  ScenarioConfig cfg = square_loop();
  cfg.seed = 1234;
  cfg.gyro_noise = 0.01;
  cfg.heading_noise = 0.05;
  SimMatcherConfig mc;
  mc.symmetry_fail_prob = 0.2;
  const RunResult a = run_pipeline(cfg, default_pipeline(0.01), mc);
  const RunResult b = run_pipeline(cfg, default_pipeline(0.01), mc);
  REQUIRE(a.ukf_online.size() == b.ukf_online.size());
  for (std::size_t i = 0; i < a.ukf_online.size(); ++i) {
    CHECK(a.ukf_online[i].pose.x == b.ukf_online[i].pose.x);
    CHECK(a.ukf_online[i].pose.y == b.ukf_online[i].pose.y);
    CHECK(a.ukf_online[i].pose.theta == b.ukf_online[i].pose.theta);
  }
  REQUIRE(a.smoothed.size() == b.smoothed.size());
  for (std::size_t i = 0; i < a.smoothed.size(); ++i) {
    CHECK(a.smoothed[i].pose.x == b.smoothed[i].pose.x);
    CHECK(a.smoothed[i].pose.y == b.smoothed[i].pose.y);
  }
  REQUIRE(a.fixes.size() == b.fixes.size());
  CHECK(a.accepted_frames == b.accepted_frames);
}

TEST_CASE("run result series share timestamps and fixes are a subset of triggers") {
  ScenarioConfig cfg = square_loop();
  cfg.seed = 5;
  const RunResult rr = run_pipeline(cfg, default_pipeline(), SimMatcherConfig{});
  REQUIRE(rr.truth.size() == rr.t.size());
  REQUIRE(rr.imu_only.size() == rr.t.size());
  REQUIRE(rr.ukf_online.size() == rr.t.size());
  REQUIRE(rr.smoothed.size() == rr.t.size());
  for (std::size_t i = 0; i < rr.t.size(); ++i) {
    CHECK(rr.truth[i].t == rr.t[i]);
    CHECK(rr.smoothed[i].t == rr.t[i]);
  }
  // every fix event frame must appear among trigger event frames
  std::vector<int> trigger_frames;
  for (const auto& ev : rr.triggers) {
    trigger_frames.push_back(ev.frame);
  }
  for (const auto& fe : rr.fixes) {
    CHECK(std::find(trigger_frames.begin(), trigger_frames.end(), fe.frame) !=
          trigger_frames.end());
  }
}

TEST_CASE("smoothed trajectory is competitive with the online filter") {
  ScenarioConfig cfg = square_loop(250.0);
  cfg.seed = 21;
  cfg.gyro_noise = 0.01;
  cfg.heading_noise = 0.1;
  SimMatcherConfig mc;
  mc.sigma_fwd_true = 1.0;
  mc.sigma_lat_true = 3.0;
  mc.weight_decay = 0.3;
  const RunResult rr = run_pipeline(cfg, default_pipeline(0.01), mc);
  const double ukf_ate = ate_rmse(rr.ukf_online, rr.truth);
  const double smooth_ate = ate_rmse(rr.smoothed, rr.truth);
  CHECK(smooth_ate < ukf_ate * 1.5);  // the smoother must not wreck the estimate
}

TEST_CASE("monte carlo aggregates per configuration") {
  ScenarioConfig cfg = square_loop(150.0);
  cfg.seed = 100;
  cfg.gyro_noise = 0.01;
  cfg.heading_noise = 0.1;
  SimMatcherConfig mc;
  mc.symmetry_fail_prob = 0.15;
  mc.weight_decay = 0.3;
  std::vector<std::pair<std::string, AblationFlags>> configs = {{"full", {}}};
  AblationFlags uo;
  uo.ukf_only = true;
  configs.push_back({"ukf_only", uo});
  const auto rows = monte_carlo(cfg, default_pipeline(0.01), mc, configs, 6, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ate_by_seed.size() == 6);
  CHECK(rows[0].median_ate > 0.0);
  CHECK(rows[0].p25_ate <= rows[0].median_ate);
  CHECK(rows[0].median_ate <= rows[0].p75_ate);

  // deterministic across invocations
  const auto again = monte_carlo(cfg, default_pipeline(0.01), mc, configs, 6, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t s = 0; s < rows[i].ate_by_seed.size(); ++s) {
      CHECK(rows[i].ate_by_seed[s] == again[i].ate_by_seed[s]);
    }
  }
}
