#include "cvnav/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cvnav {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path);
  }
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  return out;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const std::vector<TimedPose>& series) {
  auto out = open_output(path);
  out << "t,x,y,theta\n";
  char buf[160];
  for (const TimedPose& tp : series) {
    std::snprintf(buf, sizeof(buf), "%.12f,%.12f,%.12f,%.12f\n", tp.t, tp.pose.x, tp.pose.y,
                  tp.pose.theta);
    out << buf;
  }
}

std::vector<TimedPose> read_trajectory_csv(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,y,theta", 0) != 0) {
    throw std::runtime_error(path + ": missing 't,x,y,theta' header");
  }
  std::vector<TimedPose> series;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    double t, x, y, theta;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &x, &y, &theta) != 4) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    series.push_back({t, Pose2(x, y, theta)});
  }
  return series;
}

void write_imu_jsonl(const std::string& path, const ImuStream& stream) {
  auto out = open_output(path);
  // header record carries the start-up anchor; readers skip unknown keys
  json head;
  head["origin"] = {stream.origin_x, stream.origin_y};
  head["initial_heading"] = stream.initial_heading;
  out << head.dump() << "\n";
  for (std::size_t k = 0; k < stream.samples.size(); ++k) {
    const ImuSample& s = stream.samples[k];
    json rec;
    rec["t"] = stream.t[k];
    rec["yaw_rate"] = s.yaw_rate;
    rec["accel_fwd"] = s.accel_fwd;
    rec["speed"] = s.speed;
    rec["heading"] = s.heading_abs;
    rec["dt"] = s.dt;
    out << rec.dump() << "\n";
  }
}

ImuStream read_imu_jsonl(const std::string& path) {
  auto in = open_input(path);
  ImuStream stream;
  std::string line;
  bool saw_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.contains("origin")) {
      stream.origin_x = rec["origin"][0].get<double>();
      stream.origin_y = rec["origin"][1].get<double>();
      stream.initial_heading = rec["initial_heading"].get<double>();
      saw_header = true;
      continue;
    }
    ImuSample s;
    s.yaw_rate = rec.at("yaw_rate").get<double>();
    s.accel_fwd = rec.at("accel_fwd").get<double>();
    s.speed = rec.at("speed").get<double>();
    s.heading_abs = rec.at("heading").get<double>();
    s.dt = rec.at("dt").get<double>();
    s.validate();
    stream.t.push_back(rec.at("t").get<double>());
    stream.samples.push_back(s);
  }
  if (stream.samples.empty()) {
    throw std::runtime_error(path + ": no IMU records");
  }
  if (!saw_header) {
    stream.initial_heading = stream.samples.front().heading_abs;
  }
  return stream;
}

void write_fix_jsonl(const std::string& path,
                     const std::vector<std::pair<int, CvglFix>>& fixes) {
  auto out = open_output(path);
  for (const auto& [frame, fix] : fixes) {
    json rec;
    rec["frame"] = frame;
    rec["r"] = {fix.rotation.r00, fix.rotation.r01, fix.rotation.r10, fix.rotation.r11};
    rec["t"] = {fix.tx, fix.ty};
    rec["w"] = fix.weight;
    out << rec.dump() << "\n";
  }
}

FixReplaySource read_fix_jsonl(const std::string& path) {
  auto in = open_input(path);
  FixReplaySource source;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto& r = rec.at("r");
    const auto& t = rec.at("t");
    CvglFix fix;
    fix.rotation = Rot2(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                        r[3].get<double>());
    fix.tx = t[0].get<double>();
    fix.ty = t[1].get<double>();
    fix.weight = rec.at("w").get<double>();
    source.insert(rec.at("frame").get<int>(), fix);
  }
  return source;
}

namespace {

struct ConfigMap {
  // section -> key -> raw value
  std::map<std::string, std::map<std::string, std::string>> values;

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = values.find(sec);
    return s != values.end() && s->second.count(key) > 0;
  }
  std::string raw(const std::string& sec, const std::string& key) const {
    return values.at(sec).at(key);
  }
  double number(const std::string& sec, const std::string& key) const {
    const std::string v = raw(sec, key);
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == 0) {
      throw std::runtime_error("config: field '" + sec + "." + key + "' is not a number");
    }
    return x;
  }
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) {
    return "";
  }
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

ConfigMap parse_sections(const std::string& text) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string line;
  std::string section = "scenario";
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.values[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::vector<double> parse_number_list(const std::string& raw) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(raw);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(std::stod(item));
    }
  }
  return out;
}

// waypoints look like "0,0; 100,0; 100,50"
std::vector<std::array<double, 2>> parse_waypoints(const std::string& raw) {
  std::vector<std::array<double, 2>> pts;
  std::string chunk;
  std::istringstream is(raw);
  while (std::getline(is, chunk, ';')) {
    chunk = trim(chunk);
    if (chunk.empty()) {
      continue;
    }
    const auto nums = parse_number_list(chunk);
    if (nums.size() != 2) {
      throw std::runtime_error("config: waypoint '" + chunk + "' is not 'x,y'");
    }
    pts.push_back({nums[0], nums[1]});
  }
  return pts;
}

}  // namespace

SimulationSetup parse_config_text(const std::string& text) {
  const ConfigMap cfg = parse_sections(text);
  SimulationSetup setup;

  if (!cfg.has("scenario", "waypoints")) {
    throw std::runtime_error("config: missing required field 'scenario.waypoints'");
  }
  setup.scenario.waypoints = parse_waypoints(cfg.raw("scenario", "waypoints"));
  if (cfg.has("scenario", "speed_profile")) {
    setup.scenario.speed_profile = parse_number_list(cfg.raw("scenario", "speed_profile"));
  }
  auto num = [&](const char* sec, const char* key, double& field) {
    if (cfg.has(sec, key)) {
      field = cfg.number(sec, key);
    }
  };
  num("scenario", "imu_rate", setup.scenario.imu_rate);
  num("scenario", "camera_rate", setup.scenario.camera_rate);
  num("scenario", "gyro_noise", setup.scenario.gyro_noise);
  num("scenario", "accel_bias_walk", setup.scenario.accel_bias_walk);
  num("scenario", "heading_noise", setup.scenario.heading_noise);
  num("scenario", "accel_noise", setup.scenario.accel_noise);
  num("scenario", "speed_noise", setup.scenario.speed_noise);
  if (cfg.has("scenario", "seed")) {
    setup.scenario.seed = static_cast<std::uint64_t>(cfg.number("scenario", "seed"));
  }
  if (cfg.has("scenario", "speed_source")) {
    const std::string v = cfg.raw("scenario", "speed_source");
    if (v == "speed_channel") {
      setup.scenario.speed_source = SpeedSource::kSpeedChannel;
    } else if (v == "accel_integration") {
      setup.scenario.speed_source = SpeedSource::kAccelIntegration;
    } else {
      throw std::runtime_error("config: scenario.speed_source must be "
                               "'speed_channel' or 'accel_integration'");
    }
  }

  num("trigger", "error_threshold", setup.pipeline.trigger.error_threshold);
  num("trigger", "time_threshold", setup.pipeline.trigger.time_threshold);
  num("trigger", "fwd_bias_coeff", setup.pipeline.trigger.fwd_bias_coeff);
  num("trigger", "fwd_bias_cap", setup.pipeline.trigger.fwd_bias_cap);
  num("trigger", "cross_coeff", setup.pipeline.trigger.cross_coeff);
  num("trigger", "cross_cap", setup.pipeline.trigger.cross_cap);
  num("trigger", "yaw_gate", setup.pipeline.trigger.yaw_gate);

  num("matcher", "capture_radius", setup.matcher.capture_radius);
  num("matcher", "sigma_fwd_true", setup.matcher.sigma_fwd_true);
  num("matcher", "sigma_lat_true", setup.matcher.sigma_lat_true);
  num("matcher", "weight_decay", setup.matcher.weight_decay);
  num("matcher", "symmetry_fail_prob", setup.matcher.symmetry_fail_prob);

  num("pipeline", "sigma_omega", setup.pipeline.calibration.sigma_omega);
  num("pipeline", "accel_hp_cutoff", setup.pipeline.calibration.accel_hp_cutoff);
  num("pipeline", "q_time_constant", setup.pipeline.q_time_constant);

  setup.scenario.validate();
  setup.pipeline.validate();
  setup.matcher.validate();
  return setup;
}

SimulationSetup read_config_file(const std::string& path) {
  auto in = open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string format_config(const SimulationSetup& setup) {
  std::ostringstream os;
  os << "[scenario]\nwaypoints = ";
  for (std::size_t i = 0; i < setup.scenario.waypoints.size(); ++i) {
    if (i > 0) {
      os << "; ";
    }
    os << setup.scenario.waypoints[i][0] << "," << setup.scenario.waypoints[i][1];
  }
  os << "\nspeed_profile = ";
  for (std::size_t i = 0; i < setup.scenario.speed_profile.size(); ++i) {
    if (i > 0) {
      os << ", ";
    }
    os << setup.scenario.speed_profile[i];
  }
  os << "\nimu_rate = " << setup.scenario.imu_rate
     << "\ncamera_rate = " << setup.scenario.camera_rate
     << "\ngyro_noise = " << setup.scenario.gyro_noise
     << "\naccel_bias_walk = " << setup.scenario.accel_bias_walk
     << "\nheading_noise = " << setup.scenario.heading_noise
     << "\naccel_noise = " << setup.scenario.accel_noise
     << "\nspeed_noise = " << setup.scenario.speed_noise
     << "\nseed = " << setup.scenario.seed << "\n\n[trigger]\nerror_threshold = "
     << setup.pipeline.trigger.error_threshold
     << "\ntime_threshold = " << setup.pipeline.trigger.time_threshold
     << "\nfwd_bias_coeff = " << setup.pipeline.trigger.fwd_bias_coeff
     << "\nfwd_bias_cap = " << setup.pipeline.trigger.fwd_bias_cap
     << "\ncross_coeff = " << setup.pipeline.trigger.cross_coeff
     << "\ncross_cap = " << setup.pipeline.trigger.cross_cap
     << "\nyaw_gate = " << setup.pipeline.trigger.yaw_gate << "\n\n[matcher]\ncapture_radius = "
     << setup.matcher.capture_radius << "\nsigma_fwd_true = " << setup.matcher.sigma_fwd_true
     << "\nsigma_lat_true = " << setup.matcher.sigma_lat_true
     << "\nweight_decay = " << setup.matcher.weight_decay
     << "\nsymmetry_fail_prob = " << setup.matcher.symmetry_fail_prob
     << "\n\n[pipeline]\nsigma_omega = " << setup.pipeline.calibration.sigma_omega
     << "\naccel_hp_cutoff = " << setup.pipeline.calibration.accel_hp_cutoff
     << "\nq_time_constant = " << setup.pipeline.q_time_constant << "\n";
  return os.str();
}

}  // namespace cvnav
