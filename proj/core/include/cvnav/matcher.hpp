#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>

#include "cvnav/geometry.hpp"
#include "cvnav/rng.hpp"

namespace cvnav {

// Contract with the cross-view matcher: a crop query goes in, a fix
// (rotation, tile-frame translation, confidence weight) comes out.
//
// Tile convention: the satellite crop is rotated so the query heading points
// image-up. Translations are expressed in that rotated tile frame with +y
// image-up (along heading) and +x image-right (vehicle right). The
// fix_to_global round-trip below is the normative definition of the pairing.

struct CropQuery {
  double center_x = 0.0;  // m east, local frame
  double center_y = 0.0;  // m north
  double heading = 0.0;   // rad ENU yaw used to orient the tile, wrapped
  int frame_index = 0;

  CropQuery() = default;
  CropQuery(double cx, double cy, double heading_enu, int frame)
      : center_x(cx), center_y(cy), heading(wrap_angle(heading_enu)), frame_index(frame) {
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
      throw std::invalid_argument("CropQuery: non-finite center");
    }
  }
};

struct CvglFix {
  Rot2 rotation;      // heading residual relative to the query heading
  double tx = 0.0;    // m, tile frame, image-right
  double ty = 0.0;    // m, tile frame, image-up
  double weight = 1.0;  // (0, 1]

  void validate() const {
    if (!std::isfinite(tx) || !std::isfinite(ty)) {
      throw std::invalid_argument("CvglFix: non-finite translation");
    }
    if (!(weight > 0.0) || weight > 1.0) {
      throw std::invalid_argument("CvglFix: weight must lie in (0, 1]");
    }
  }
};

/// Global pose implied by a fix: tile translation rotated into the world and
/// added to the query center; heading = query heading + encoded residual.
Pose2 fix_to_global(const CropQuery& q, const CvglFix& f);

/// Inverse of fix_to_global; used when recording fixes for later replay.
CvglFix fix_from_global(const CropQuery& q, const Pose2& global, double weight);

class MeasurementSource {
 public:
  virtual ~MeasurementSource() = default;

  /// Returns a fix or nothing (failed match / no data for the frame).
  /// Simulated sources require the true pose; replay sources ignore it.
  virtual std::optional<CvglFix> query(const CropQuery& q,
                                       const std::optional<Pose2>& truth) = 0;
};

struct SimMatcherConfig {
  double capture_radius = 20.0;    // m, max query-center-to-truth offset
  double sigma_fwd_true = 1.0;     // m, fix noise along the true heading
  double sigma_lat_true = 2.0;     // m, fix noise across the true heading
  double weight_decay = 0.05;      // 1/m, w = exp(-decay * offset)
  double symmetry_fail_prob = 0.0; // chance of a confident 90/180-degree lock
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Stand-in for the neural matcher. Inside the capture radius it returns the
// true pose plus anisotropic noise, weighted by the query-center offset.
// With probability symmetry_fail_prob it instead locks onto a rotated copy
// of the scene: the pose implied by the fix is rotated about the tile center
// by +-pi/2 or pi and the weight is left undiminished.
class SimulatedMatcher : public MeasurementSource {
 public:
  explicit SimulatedMatcher(const SimMatcherConfig& cfg);

  std::optional<CvglFix> query(const CropQuery& q,
                               const std::optional<Pose2>& truth) override;

  const SimMatcherConfig& config() const { return cfg_; }

 private:
  SimMatcherConfig cfg_;
  Rng noise_rng_;
  Rng fail_rng_;
};

// Replays fixes recorded per frame index. The stored fix is interpreted
// relative to the centre crop of the frame's search; a missing frame means
// no fix was available.
class FixReplaySource : public MeasurementSource {
 public:
  FixReplaySource() = default;

  void insert(int frame_index, const CvglFix& fix);
  bool contains(int frame_index) const { return fixes_.count(frame_index) > 0; }
  std::size_t size() const { return fixes_.size(); }

  std::optional<CvglFix> query(const CropQuery& q,
                               const std::optional<Pose2>& truth) override;

 private:
  std::unordered_map<int, CvglFix> fixes_;
};

}  // namespace cvnav
