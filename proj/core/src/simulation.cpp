#include "cvnav/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "cvnav/rng.hpp"
#include "cvnav/savitzky_golay.hpp"

namespace cvnav {

namespace {

constexpr double kEps = 1e-9;

struct PathPrimitive {
  bool is_arc = false;
  // line
  double ax = 0, ay = 0, dirx = 1, diry = 0;
  // arc
  double cx = 0, cy = 0, radius = 0, phi0 = 0, turn_sign = 1;
  double length = 0;
  double speed = 1;

  Pose2 pose_at(double s) const {
    if (!is_arc) {
      return Pose2(ax + dirx * s, ay + diry * s, std::atan2(diry, dirx));
    }
    const double phi = phi0 + turn_sign * s / radius;
    return Pose2(cx + radius * std::cos(phi), cy + radius * std::sin(phi),
                 phi + turn_sign * 0.5 * std::numbers::pi);
  }

  double yaw_rate_at() const { return is_arc ? turn_sign * speed / radius : 0.0; }
};

}  // namespace

void ScenarioConfig::validate() const {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("scenario: need at least two waypoints");
  }
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (std::hypot(waypoints[i][0] - waypoints[i - 1][0],
                   waypoints[i][1] - waypoints[i - 1][1]) < 1e-9) {
      throw std::invalid_argument("scenario: coincident consecutive waypoints");
    }
  }
  const std::size_t segs = waypoints.size() - 1;
  if (speed_profile.empty() || (speed_profile.size() != 1 && speed_profile.size() != segs)) {
    throw std::invalid_argument(
        "scenario: speed_profile needs one entry, or one per segment");
  }
  for (const double v : speed_profile) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("scenario: speeds must be > 0");
    }
  }
  if (!(camera_rate > 0.0) || imu_rate < camera_rate) {
    throw std::invalid_argument("scenario: need imu_rate >= camera_rate > 0");
  }
  const double ratio = imu_rate / camera_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("scenario: imu_rate must be an integer multiple of camera_rate");
  }
  if (gyro_noise < 0 || accel_bias_walk < 0 || heading_noise < 0 || accel_noise < 0 ||
      speed_noise < 0) {
    throw std::invalid_argument("scenario: noise densities must be >= 0");
  }
}

void PipelineConfig::validate() const {
  calibration.validate();
  trigger.validate();
  sigma_params.validate();
  if (!(q_time_constant > 0.0)) {
    throw std::invalid_argument("pipeline: q_time_constant must be > 0");
  }
}

std::vector<TruthSample> generate_trajectory(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto& wp = cfg.waypoints;
  const std::size_t nseg = wp.size() - 1;
  auto seg_speed = [&](std::size_t k) {
    return cfg.speed_profile.size() == 1 ? cfg.speed_profile[0] : cfg.speed_profile[k];
  };

  std::vector<double> seg_len(nseg), seg_hx(nseg), seg_hy(nseg);
  for (std::size_t k = 0; k < nseg; ++k) {
    const double dx = wp[k + 1][0] - wp[k][0];
    const double dy = wp[k + 1][1] - wp[k][1];
    seg_len[k] = std::hypot(dx, dy);
    seg_hx[k] = dx / seg_len[k];
    seg_hy[k] = dy / seg_len[k];
  }

  // corner fillets: tangent length consumed at the end of the incoming and
  // the start of the outgoing segment
  std::vector<double> cut_end(nseg, 0.0), cut_start(nseg, 0.0);
  struct Corner {
    bool blend = false;
    double radius = 0, turn = 0, tangent = 0;
  };
  std::vector<Corner> corners(wp.size());
  for (std::size_t k = 1; k + 1 < wp.size(); ++k) {
    const double h_in = std::atan2(seg_hy[k - 1], seg_hx[k - 1]);
    const double h_out = std::atan2(seg_hy[k], seg_hx[k]);
    const double turn = wrap_angle(h_out - h_in);
    if (std::abs(turn) < 1e-9) {
      continue;
    }
    const double avail = 0.5 * std::min(seg_len[k - 1], seg_len[k]);
    double radius = std::min(10.0, avail);
    const double tan_half = std::tan(0.5 * std::abs(turn));
    if (tan_half < 1e-12) {
      continue;
    }
    double tangent = radius * tan_half;
    if (tangent > avail) {
      tangent = avail;
      radius = avail / tan_half;
    }
    if (radius < 1e-6) {
      continue;  // near-U-turn; fall back to a sharp corner
    }
    corners[k] = {true, radius, turn, tangent};
    cut_end[k - 1] = tangent;
    cut_start[k] = tangent;
  }

  std::vector<PathPrimitive> prims;
  for (std::size_t k = 0; k < nseg; ++k) {
    const double usable = seg_len[k] - cut_start[k] - cut_end[k];
    if (usable > kEps) {
      PathPrimitive p;
      p.is_arc = false;
      p.ax = wp[k][0] + seg_hx[k] * cut_start[k];
      p.ay = wp[k][1] + seg_hy[k] * cut_start[k];
      p.dirx = seg_hx[k];
      p.diry = seg_hy[k];
      p.length = usable;
      p.speed = seg_speed(k);
      prims.push_back(p);
    }
    const std::size_t corner = k + 1;
    if (corner + 1 <= nseg && corners[corner].blend) {
      const Corner& c = corners[corner];
      PathPrimitive a;
      a.is_arc = true;
      a.radius = c.radius;
      a.turn_sign = c.turn > 0 ? 1.0 : -1.0;
      const double sx = wp[corner][0] - seg_hx[k] * c.tangent;
      const double sy = wp[corner][1] - seg_hy[k] * c.tangent;
      // arc centre sits on the inside of the turn, perpendicular to travel
      const double px = -seg_hy[k] * a.turn_sign;
      const double py = seg_hx[k] * a.turn_sign;
      a.cx = sx + px * c.radius;
      a.cy = sy + py * c.radius;
      a.phi0 = std::atan2(sy - a.cy, sx - a.cx);
      a.length = c.radius * std::abs(c.turn);
      a.speed = seg_speed(k);  // arc inherits the incoming segment's speed
      prims.push_back(a);
    }
  }

  double total_len = 0.0;
  for (const auto& p : prims) {
    total_len += p.length;
  }

  const double dt = 1.0 / cfg.imu_rate;
  std::vector<TruthSample> out;
  out.reserve(static_cast<std::size_t>(total_len / (seg_speed(0) * dt)) + 16);
  std::size_t pi = 0;
  double s_in = 0.0;
  double s_total = 0.0;
  std::size_t k = 0;
  while (s_total < total_len - kEps) {
    const PathPrimitive& p = prims[pi];
    TruthSample ts;
    ts.t = static_cast<double>(k) * dt;
    ts.pose = p.pose_at(s_in);
    ts.speed = p.speed;
    ts.yaw_rate = p.yaw_rate_at();
    out.push_back(ts);
    ++k;

    double step = p.speed * dt;
    s_total += step;
    s_in += step;
    while (pi + 1 < prims.size() && s_in >= prims[pi].length - kEps) {
      s_in -= prims[pi].length;
      ++pi;
    }
  }
  if (out.size() < 2) {
    throw std::invalid_argument("scenario: trajectory too short for the sample rate");
  }
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    out[i].accel_fwd = (out[i + 1].speed - out[i].speed) / dt;
  }
  return out;
}

ImuStream synthesize_imu(const std::vector<TruthSample>& truth, const ScenarioConfig& cfg) {
  if (truth.size() < 2) {
    throw std::invalid_argument("synthesize_imu: need at least two truth samples");
  }
  Rng rng(mix_seed(cfg.seed, 0x696d75ull));  // imu noise stream
  const double dt = 1.0 / cfg.imu_rate;
  const double sqrt_dt = std::sqrt(dt);

  ImuStream stream;
  stream.origin_x = truth[0].pose.x;
  stream.origin_y = truth[0].pose.y;
  stream.initial_heading = wrap_angle(truth[0].pose.theta + cfg.heading_noise * rng.gaussian());

  double gyro_walk = 0.0;
  double accel_bias = 0.0;
  stream.t.reserve(truth.size() - 1);
  stream.samples.reserve(truth.size() - 1);
  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    const double n_gyro = rng.gaussian();
    gyro_walk += cfg.gyro_noise * sqrt_dt * n_gyro;
    accel_bias += cfg.accel_bias_walk * sqrt_dt * rng.gaussian();

    ImuSample s;
    s.dt = dt;
    s.yaw_rate = truth[k].yaw_rate + (cfg.gyro_noise / sqrt_dt) * n_gyro;
    s.accel_fwd = truth[k].accel_fwd + accel_bias + cfg.accel_noise * rng.gaussian();
    // compass-aided heading at the end of the step: truth plus the
    // accumulated gyro walk plus white noise
    s.heading_abs =
        wrap_angle(truth[k + 1].pose.theta + gyro_walk + cfg.heading_noise * rng.gaussian());
    s.speed = truth[k].speed + cfg.speed_noise * rng.gaussian();
    stream.t.push_back(truth[k].t);
    stream.samples.push_back(s);
  }
  return stream;
}

namespace {

struct CoreConfig {
  const PipelineConfig& pipeline;
  const AblationFlags& flags;
  double camera_rate;
  SpeedSource speed_source;
};

RunResult run_core(const ImuStream& stream, const std::vector<TruthSample>* truth,
                   MeasurementSource& source, const CoreConfig& cc) {
  cc.pipeline.validate();
  const auto& pl = cc.pipeline;
  const auto& flags = cc.flags;

  const double dt0 = stream.samples.front().dt;
  const double ratio = 1.0 / (dt0 * cc.camera_rate);
  const int steps_per_frame = static_cast<int>(std::round(ratio));
  if (steps_per_frame < 1 || std::abs(ratio - steps_per_frame) > 1e-6) {
    throw std::invalid_argument("run: IMU rate must be an integer multiple of the camera rate");
  }

  const Pose2 origin(stream.origin_x, stream.origin_y, stream.initial_heading);
  Preintegrator pre(origin, pl.calibration.accel_hp_cutoff, cc.speed_source);
  Preintegrator dead_reckoner(origin, pl.calibration.accel_hp_cutoff, cc.speed_source);
  UkfState ukf = make_initial_state(origin);
  TriggerState trig;

  RunResult rr;
  rr.t.push_back(stream.t.front());
  if (truth) {
    rr.truth.push_back({stream.t.front(), (*truth)[0].pose});
  }
  rr.imu_only.push_back({stream.t.front(), origin});
  rr.ukf_online.push_back({stream.t.front(), origin});

  std::vector<Pose2> node_initials{origin};
  std::vector<BodyIncrement> odometry;
  std::vector<double> odo_sigma;
  std::vector<FixObservation> fix_obs;

  TriggerConfig search_cfg = pl.trigger;
  if (flags.no_forward_bias) {
    search_cfg.fwd_bias_coeff = 0.0;  // ablation bypass; not a valid user config
  }

  Pose2 frame_rel;  // relative motion accumulated since the last node
  const std::size_t n = stream.samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    const ImuSample& s = stream.samples[k];
    pre.integrate(s);
    dead_reckoner.integrate(s);
    const BodyIncrement inc = pre.last_increment();

    const ErrorEnvelope env = composite_error(pre, pl.calibration, ukf.mean);
    const ProcessNoise q = process_noise_from_eps(env.eps_imu);
    try {
      ukf = predict(ukf, inc, q, pl.sigma_params, s.dt / pl.q_time_constant);
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(k) + ": " + e.what());
    }
    frame_rel = compose(frame_rel, inc);
    trig.advance(s.dt);

    if ((k + 1) % static_cast<std::size_t>(steps_per_frame) != 0) {
      continue;
    }
    const int frame = static_cast<int>((k + 1) / static_cast<std::size_t>(steps_per_frame));
    const double t_frame = stream.t[k] + s.dt;
    std::optional<Pose2> truth_now;
    if (truth) {
      truth_now = (*truth)[k + 1].pose;
    }

    if (!flags.disable_matcher && should_trigger(pl.trigger, env.eps_imu, trig)) {
      TriggerEvent ev;
      ev.frame = frame;
      ev.cause = env.eps_imu >= pl.trigger.error_threshold ? TriggerCause::kError
                                                           : TriggerCause::kTime;
      ev.eps_imu = env.eps_imu;
      if (truth_now) {
        ev.true_error = std::hypot(truth_now->x - ukf.mean.x, truth_now->y - ukf.mean.y);
      }
      rr.triggers.push_back(ev);

      // the query tile is oriented by the compass heading at this frame
      const Pose2 search_pose(ukf.mean.x, ukf.mean.y, s.heading_abs);
      const double bias = forward_bias(search_cfg, env.eps_imu);
      const Pose2 centre = compose(search_pose, BodyIncrement(bias, 0.0, 0.0));
      const CropQuery centre_query(centre.x, centre.y, search_pose.theta, frame);
      std::optional<SearchResult> result;
      if (flags.single_crop) {
        if (auto fix = source.query(centre_query, truth_now)) {
          result = SearchResult{*fix, centre_query};
        }
      } else {
        result = multicrop_search(search_cfg, source, search_pose, env.eps_imu, frame, truth_now);
      }

      if (!result) {
        FixEvent fe;
        fe.frame = frame;
        fe.outcome = FixOutcome::kAllMiss;
        fe.centre_query = centre_query;
        rr.fixes.push_back(fe);
        trig.reset();  // re-arm on the error channel rather than thrash the clock
      } else {
        const Pose2 global = fix_to_global(result->query, result->fix);
        FixEvent fe;
        fe.frame = frame;
        fe.weight = result->fix.weight;
        fe.global = global;
        fe.fix = result->fix;
        fe.query = result->query;
        fe.centre_query = centre_query;
        const bool accepted = flags.no_yaw_gate ||
                              yaw_gate(pl.trigger, result->fix) == GateDecision::kAccepted;
        if (!accepted) {
          fe.outcome = FixOutcome::kYawRejected;
          rr.fixes.push_back(fe);
          trig.reset();
        } else {
          const MeasurementNoise r = measurement_noise_from_weight(result->fix.weight);
          try {
            if (flags.isotropic_noise) {
              const double m = 0.5 * (r.sigma_fwd_w + r.sigma_lat_w);
              ukf = update_position_world_cov(ukf, global.x, global.y,
                                              {m * m, 0.0, 0.0, m * m}, pl.sigma_params);
            } else {
              ukf = update_position(ukf, global.x, global.y, r, s.heading_abs,
                                    pl.sigma_params);
            }
          } catch (const NumericalError& e) {
            throw NumericalError("frame " + std::to_string(frame) + ": " + e.what());
          }
          pre.reset_position_anchor(ukf.mean.x, ukf.mean.y);
          trig.reset();
          fe.outcome = FixOutcome::kAccepted;
          rr.fixes.push_back(fe);
          rr.accepted_frames.push_back(frame);
          FixObservation obs;
          obs.node = frame;
          obs.pose = global;
          obs.sigma_fwd_w = r.sigma_fwd_w;
          obs.sigma_lat_w = r.sigma_lat_w;
          fix_obs.push_back(obs);
        }
      }
    }

    rr.t.push_back(t_frame);
    if (truth) {
      rr.truth.push_back({t_frame, truth_now.value()});
    }
    rr.imu_only.push_back({t_frame, dead_reckoner.position()});
    rr.ukf_online.push_back({t_frame, ukf.mean});
    node_initials.push_back(ukf.mean);
    odometry.emplace_back(frame_rel.x, frame_rel.y, frame_rel.theta);
    odo_sigma.push_back(0.5 * (q.sigma_fwd + q.sigma_lat));
    frame_rel = Pose2();
  }

  if (pl.smooth && !flags.ukf_only) {
    const FactorGraph graph =
        build_graph(node_initials, odometry, odo_sigma, fix_obs, origin);
    const OptimizeReport rep = optimize(graph);
    std::vector<double> xs(rep.estimates.size()), ys(rep.estimates.size());
    for (std::size_t i = 0; i < rep.estimates.size(); ++i) {
      xs[i] = rep.estimates[i].x;
      ys[i] = rep.estimates[i].y;
    }
    const auto sx = savgol_smooth(xs, 15, 3);
    const auto sy = savgol_smooth(ys, 15, 3);
    rr.smoothed.reserve(rep.estimates.size());
    for (std::size_t i = 0; i < rep.estimates.size(); ++i) {
      rr.smoothed.push_back({rr.t[i], Pose2(sx[i], sy[i], rep.estimates[i].theta)});
    }
  } else {
    rr.smoothed = rr.ukf_online;
  }

  rr.trajectory_length_km =
      trajectory_length_km(truth ? rr.truth : rr.ukf_online);
  return rr;
}

}  // namespace

RunResult run_pipeline(const ScenarioConfig& scenario, const PipelineConfig& pipeline,
                       const SimMatcherConfig& matcher, const AblationFlags& flags) {
  scenario.validate();
  const std::vector<TruthSample> truth = generate_trajectory(scenario);
  const ImuStream stream = synthesize_imu(truth, scenario);

  SimMatcherConfig mc = matcher;
  mc.rng_seed = mix_seed(scenario.seed, 0x6376676cull);  // matcher noise stream
  SimulatedMatcher source(mc);

  CoreConfig cc{pipeline, flags, scenario.camera_rate, scenario.speed_source};
  return run_core(stream, &truth, source, cc);
}

RunResult run_replay(const ImuStream& stream, MeasurementSource& source,
                     const PipelineConfig& pipeline, double camera_rate,
                     const AblationFlags& flags) {
  if (stream.samples.empty()) {
    throw std::invalid_argument("run_replay: empty IMU stream");
  }
  CoreConfig cc{pipeline, flags, camera_rate, SpeedSource::kSpeedChannel};
  return run_core(stream, nullptr, source, cc);
}

std::vector<std::pair<std::string, AblationFlags>> standard_ablation_matrix() {
  std::vector<std::pair<std::string, AblationFlags>> rows;
  rows.push_back({"full", {}});
  AblationFlags f;
  f.no_yaw_gate = true;
  rows.push_back({"no_yaw_gate", f});
  f = {};
  f.single_crop = true;
  rows.push_back({"single_crop", f});
  f = {};
  f.isotropic_noise = true;
  rows.push_back({"isotropic", f});
  f = {};
  f.no_forward_bias = true;
  rows.push_back({"no_fwd_bias", f});
  f = {};
  f.ukf_only = true;
  rows.push_back({"ukf_only", f});
  return rows;
}

std::vector<AblationConfigResult> monte_carlo(
    const ScenarioConfig& scenario, const PipelineConfig& pipeline,
    const SimMatcherConfig& matcher,
    const std::vector<std::pair<std::string, AblationFlags>>& configs, int n_seeds,
    int n_workers) {
  if (n_seeds < 1) {
    throw std::invalid_argument("monte_carlo: need at least one seed");
  }
  if (n_workers <= 0) {
    n_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  std::vector<AblationConfigResult> results(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    results[c].name = configs[c].first;
    results[c].ate_by_seed.assign(static_cast<std::size_t>(n_seeds), 0.0);
  }

  std::atomic<int> next_seed{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const int i = next_seed.fetch_add(1);
      if (i >= n_seeds) {
        return;
      }
      try {
        ScenarioConfig sc = scenario;
        sc.seed = scenario.seed + static_cast<std::uint64_t>(i);
        for (std::size_t c = 0; c < configs.size(); ++c) {
          const RunResult rr = run_pipeline(sc, pipeline, matcher, configs[c].second);
          const auto& series = configs[c].second.ukf_only ? rr.ukf_online : rr.smoothed;
          results[c].ate_by_seed[static_cast<std::size_t>(i)] = ate_rmse(series, rr.truth);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  const int spawn = std::min(n_workers, n_seeds);
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int i = 0; i < spawn; ++i) {
    pool.emplace_back(worker);
  }
  for (auto& th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }

  auto percentile = [](std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  for (auto& r : results) {
    r.median_ate = percentile(r.ate_by_seed, 0.5);
    r.p25_ate = percentile(r.ate_by_seed, 0.25);
    r.p75_ate = percentile(r.ate_by_seed, 0.75);
  }
  return results;
}

}  // namespace cvnav
