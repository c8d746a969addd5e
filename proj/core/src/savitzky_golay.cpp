#include "cvnav/savitzky_golay.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace cvnav {

std::vector<double> savgol_smooth(const std::vector<double>& xs, int window, int order) {
  if (window <= 0 || window % 2 == 0) {
    throw std::invalid_argument("savgol_smooth: window must be odd and positive");
  }
  if (order < 0 || order >= window) {
    throw std::invalid_argument("savgol_smooth: order must satisfy 0 <= order < window");
  }
  const int n = static_cast<int>(xs.size());
  if (n < window) {
    return xs;
  }

  const int half = window / 2;
  // projection matrix mapping window samples to fitted polynomial values at
  // every in-window offset: P = V (V^T V)^-1 V^T with Vandermonde V on
  // offsets -half..half
  Eigen::MatrixXd v(window, order + 1);
  for (int i = 0; i < window; ++i) {
    double p = 1.0;
    for (int j = 0; j <= order; ++j) {
      v(i, j) = p;
      p *= static_cast<double>(i - half);
    }
  }
  const Eigen::MatrixXd proj = v * (v.transpose() * v).ldlt().solve(v.transpose());

  std::vector<double> out(xs.size());
  auto fit_window = [&](int start, int eval_offset) {
    double acc = 0.0;
    for (int k = 0; k < window; ++k) {
      acc += proj(eval_offset, k) * xs[static_cast<std::size_t>(start + k)];
    }
    return acc;
  };

  for (int i = 0; i < half; ++i) {
    out[static_cast<std::size_t>(i)] = fit_window(0, i);
  }
  for (int i = half; i < n - half; ++i) {
    out[static_cast<std::size_t>(i)] = fit_window(i - half, half);
  }
  for (int i = n - half; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = fit_window(n - window, i - (n - window));
  }
  return out;
}

}  // namespace cvnav
