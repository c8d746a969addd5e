#pragma once

#include <vector>

namespace cvnav {

/// Savitzky-Golay smoothing: each interior sample is replaced by the value of
/// an order-`order` least-squares polynomial fitted over the centred window.
/// The first and last half-windows are filled by evaluating the boundary
/// window's fit at the off-centre positions, so output length equals input
/// length. Series shorter than the window are returned unchanged.
/// Throws on even window or order >= window.
std::vector<double> savgol_smooth(const std::vector<double>& xs, int window = 15,
                                  int order = 3);

}  // namespace cvnav
