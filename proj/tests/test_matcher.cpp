#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cvnav/matcher.hpp"

using namespace cvnav;
using std::numbers::pi;

namespace {

SimMatcherConfig noiseless() {
  SimMatcherConfig cfg;
  cfg.sigma_fwd_true = 1e-12;
  cfg.sigma_lat_true = 1e-12;
  cfg.weight_decay = 0.0;
  cfg.symmetry_fail_prob = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("perfect match at the query centre") {
  SimulatedMatcher m(noiseless());
  const CropQuery q(10.0, 20.0, 0.3, 0);
  const Pose2 truth(10.0, 20.0, 0.3);
  const auto fix = m.query(q, truth);
  REQUIRE(fix.has_value());
  CHECK(fix->tx == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fix->ty == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fix->weight == doctest::Approx(1.0));
  CHECK(yaw_residual(fix->rotation) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("outside the capture radius returns nothing") {
  SimulatedMatcher m(noiseless());
  const CropQuery q(0.0, 0.0, 0.0, 0);
  CHECK_FALSE(m.query(q, Pose2(25.0, 0.0, 0.0)).has_value());
  CHECK(m.query(q, Pose2(19.99, 0.0, 0.0)).has_value());
}

TEST_CASE("forced symmetry failure rotates the residual, keeps the weight") {
  SimMatcherConfig cfg = noiseless();
  cfg.symmetry_fail_prob = 1.0;
  SimulatedMatcher m(cfg);
  const CropQuery q(0.0, 0.0, 0.0, 0);
  for (int i = 0; i < 50; ++i) {
    const auto fix = m.query(q, Pose2(0.0, 0.0, 0.0));
    REQUIRE(fix.has_value());
    const double res = std::abs(yaw_residual(fix->rotation));
    const bool quarter = std::abs(res - pi / 2) < 1e-9;
    const bool half = std::abs(res - pi) < 1e-9;
    CHECK((quarter || half));
    CHECK(fix->weight == doctest::Approx(1.0));
    // truth at the tile centre: rotating about the centre moves nothing
    CHECK(fix->tx == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fix->ty == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("symmetry failure rotates the implied position about the tile centre") {
  SimMatcherConfig cfg = noiseless();
  cfg.symmetry_fail_prob = 1.0;
  SimulatedMatcher m(cfg);
  const CropQuery q(0.0, 0.0, 0.0, 0);
  const Pose2 truth(3.0, 0.0, 0.0);
  const auto fix = m.query(q, truth);
  REQUIRE(fix.has_value());
  const Pose2 implied = fix_to_global(q, *fix);
  // offset magnitude from the centre is preserved, direction rotated
  CHECK(std::hypot(implied.x, implied.y) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::hypot(implied.x - truth.x, implied.y - truth.y) > 2.0);
}

TEST_CASE("fix_to_global round-trips the simulated generation") {
  SimulatedMatcher exact(noiseless());
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Pose2 truth((rng.uniform() - 0.5) * 100, (rng.uniform() - 0.5) * 100,
                      (rng.uniform() - 0.5) * 6);
    const CropQuery q(truth.x + (rng.uniform() - 0.5) * 20,
                      truth.y + (rng.uniform() - 0.5) * 20, (rng.uniform() - 0.5) * 6, i);
    const auto fix = exact.query(q, truth);
    if (!fix) {
      continue;
    }
    const Pose2 implied = fix_to_global(q, *fix);
    CHECK(implied.x == doctest::Approx(truth.x).epsilon(1e-9));
    CHECK(implied.y == doctest::Approx(truth.y).epsilon(1e-9));
    CHECK(wrap_angle(implied.theta - truth.theta) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("fix_to_global tile convention") {
  // centred fix: identity rotation keeps the query pose
  CvglFix f;
  const Pose2 centred = fix_to_global(CropQuery(5, 6, 0.7, 0), f);
  CHECK(centred.x == doctest::Approx(5.0));
  CHECK(centred.y == doctest::Approx(6.0));
  CHECK(centred.theta == doctest::Approx(0.7));

  // image-up translation moves along the heading
  CvglFix fwd;
  fwd.ty = 3.0;
  const Pose2 east = fix_to_global(CropQuery(0, 0, 0.0, 0), fwd);
  CHECK(east.x == doctest::Approx(3.0));
  CHECK(east.y == doctest::Approx(0.0).epsilon(1e-12));
  const Pose2 north = fix_to_global(CropQuery(0, 0, pi / 2, 0), fwd);
  CHECK(north.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(north.y == doctest::Approx(3.0));
}

TEST_CASE("weight is non-increasing in the centre offset") {
  SimMatcherConfig cfg = noiseless();
  cfg.weight_decay = 0.1;
  double last = 2.0;
  for (double off = 0.0; off <= 19.0; off += 1.0) {
    SimulatedMatcher m(cfg);
    const auto fix = m.query(CropQuery(0, 0, 0, 0), Pose2(off, 0, 0));
    REQUIRE(fix.has_value());
    CHECK(fix->weight <= last + 1e-12);
    last = fix->weight;
  }
}

TEST_CASE("weight stays in (0, 1] even at extreme decay") {
  SimMatcherConfig cfg = noiseless();
  cfg.weight_decay = 10.0;
  SimulatedMatcher m(cfg);
  const auto fix = m.query(CropQuery(0, 0, 0, 0), Pose2(19.0, 0, 0));
  REQUIRE(fix.has_value());
  CHECK(fix->weight >= 1e-3);
  CHECK(fix->weight <= 1.0);
}

TEST_CASE("identical seeds and query sequences give identical fixes") {
  SimMatcherConfig cfg;
  cfg.sigma_fwd_true = 1.0;
  cfg.sigma_lat_true = 2.0;
  cfg.weight_decay = 0.05;
  cfg.symmetry_fail_prob = 0.3;
  cfg.rng_seed = 99;
  SimulatedMatcher a(cfg);
  SimulatedMatcher b(cfg);
  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    const Pose2 truth((rng.uniform() - 0.5) * 40, (rng.uniform() - 0.5) * 40,
                      (rng.uniform() - 0.5) * 6);
    const CropQuery q(truth.x + (rng.uniform() - 0.5) * 30,
                      truth.y + (rng.uniform() - 0.5) * 30, 0.0, i);
    const auto fa = a.query(q, truth);
    const auto fb = b.query(q, truth);
    REQUIRE(fa.has_value() == fb.has_value());
    if (fa) {
      CHECK(fa->tx == fb->tx);
      CHECK(fa->ty == fb->ty);
      CHECK(fa->weight == fb->weight);
      CHECK(fa->rotation.r00 == fb->rotation.r00);
    }
  }
}

TEST_CASE("simulated source requires truth") {
  SimulatedMatcher m(noiseless());
  CHECK_THROWS_AS(m.query(CropQuery(0, 0, 0, 0), std::nullopt), std::invalid_argument);
}

TEST_CASE("replay source returns stored fixes or nothing") {
  FixReplaySource src;
  CvglFix f;
  f.tx = 1.0;
  f.ty = -2.0;
  f.weight = 0.7;
  src.insert(12, f);
  CHECK_FALSE(src.query(CropQuery(0, 0, 0, 11), std::nullopt).has_value());
  const auto got = src.query(CropQuery(0, 0, 0, 12), std::nullopt);
  REQUIRE(got.has_value());
  CHECK(got->tx == doctest::Approx(1.0));
  CHECK(got->weight == doctest::Approx(0.7));
}

TEST_CASE("config validation") {
  SimMatcherConfig bad;
  bad.capture_radius = 0.0;
  CHECK_THROWS_AS(SimulatedMatcher{bad}, std::invalid_argument);
  bad = SimMatcherConfig{};
  bad.symmetry_fail_prob = 1.5;
  CHECK_THROWS_AS(SimulatedMatcher{bad}, std::invalid_argument);
  CvglFix f;
  f.weight = 0.0;
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
}
