#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvnav/rng.hpp"
#include "cvnav/savitzky_golay.hpp"

using namespace cvnav;

namespace {

// independent oracle: the central convolution coefficients from the
// least-squares normal equations on the window offsets
std::vector<double> central_coefficients(int window, int order) {
  const int half = window / 2;
  Eigen::MatrixXd v(window, order + 1);
  for (int i = 0; i < window; ++i) {
    double p = 1.0;
    for (int j = 0; j <= order; ++j) {
      v(i, j) = p;
      p *= static_cast<double>(i - half);
    }
  }
  const Eigen::MatrixXd m = (v.transpose() * v).inverse() * v.transpose();
  std::vector<double> c(static_cast<std::size_t>(window));
  for (int k = 0; k < window; ++k) {
    c[static_cast<std::size_t>(k)] = m(0, k);  // row evaluating at offset 0
  }
  return c;
}

}  // namespace

TEST_CASE("constant series pass through unchanged") {
  std::vector<double> xs(60, 4.2);
  const auto out = savgol_smooth(xs);
  for (const double v : out) {
    CHECK(v == doctest::Approx(4.2).epsilon(1e-12));
  }
}

TEST_CASE("polynomials of degree <= 3 are reproduced exactly") {
  std::vector<double> xs(100);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double t = static_cast<double>(i) * 0.1;
    xs[i] = 0.3 - 1.2 * t + 0.7 * t * t - 0.05 * t * t * t;
  }
  const auto out = savgol_smooth(xs, 15, 3);
  for (std::size_t i = 7; i + 7 < xs.size(); ++i) {
    CHECK(out[i] == doctest::Approx(xs[i]).epsilon(1e-9));
  }
}

TEST_CASE("degree-4 polynomials are altered (order-3 fit cannot carry them)") {
  std::vector<double> xs(60);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double t = static_cast<double>(i) - 30.0;
    xs[i] = t * t * t * t;
  }
  const auto out = savgol_smooth(xs, 15, 3);
  double max_dev = 0.0;
  for (std::size_t i = 7; i + 7 < xs.size(); ++i) {
    max_dev = std::max(max_dev, std::abs(out[i] - xs[i]));
  }
  CHECK(max_dev > 1.0);
}

TEST_CASE("central impulse is attenuated by the centre coefficient") {
  const auto coeffs = central_coefficients(15, 3);
  CHECK(coeffs[7] < 1.0);
  CHECK(coeffs[7] > 0.0);

  std::vector<double> xs(61, 0.0);
  xs[30] = 1.0;
  const auto out = savgol_smooth(xs, 15, 3);
  CHECK(out[30] == doctest::Approx(coeffs[7]).epsilon(1e-9));

  // a cubic plus the impulse: the cubic passes, the impulse is scaled
  std::vector<double> cubic(61);
  for (std::size_t i = 0; i < cubic.size(); ++i) {
    const double t = static_cast<double>(i) - 30.0;
    cubic[i] = 2.0 + 0.1 * t - 0.01 * t * t + 0.001 * t * t * t;
  }
  std::vector<double> mixed = cubic;
  mixed[30] += 1.0;
  const auto smoothed = savgol_smooth(mixed, 15, 3);
  CHECK(smoothed[30] - cubic[30] == doctest::Approx(coeffs[7]).epsilon(1e-6));
}

TEST_CASE("the implementation matches the oracle coefficients on white noise") {
  Rng rng(3);
  std::vector<double> xs(40);
  for (auto& v : xs) {
    v = rng.gaussian();
  }
  const auto coeffs = central_coefficients(15, 3);
  const auto out = savgol_smooth(xs, 15, 3);
  for (std::size_t i = 7; i + 7 < xs.size(); ++i) {
    double expect = 0.0;
    for (int k = 0; k < 15; ++k) {
      expect += coeffs[static_cast<std::size_t>(k)] * xs[i - 7 + static_cast<std::size_t>(k)];
    }
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("series shorter than the window are unchanged") {
  std::vector<double> xs{1.0, 5.0, -2.0, 0.5};
  CHECK(savgol_smooth(xs, 15, 3) == xs);
}

TEST_CASE("output length equals input length at boundaries") {
  std::vector<double> xs(23, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = static_cast<double>(i);
  }
  const auto out = savgol_smooth(xs, 15, 3);
  CHECK(out.size() == xs.size());
  // a straight line is degree 1: boundaries reproduce it exactly too
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(out[i] == doctest::Approx(xs[i]).epsilon(1e-9));
  }
}

TEST_CASE("even windows and excessive orders are rejected") {
  std::vector<double> xs(30, 1.0);
  CHECK_THROWS_AS(savgol_smooth(xs, 14, 3), std::invalid_argument);
  CHECK_THROWS_AS(savgol_smooth(xs, 15, 15), std::invalid_argument);
  CHECK_THROWS_AS(savgol_smooth(xs, -1, 0), std::invalid_argument);
}
