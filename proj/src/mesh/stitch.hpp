#pragma once

// Triangulation of the band between two vertex rows. Shared by the builtin
// generators and the surgery code.

#include "eigenglue/mesh.hpp"

#include <numbers>
#include <vector>

namespace eigenglue::mesh::detail {

// Band between two closed rings. `lower` is traversed so that the band lies on
// its left; angles are increasing along each ring (unwrapped internally).
// Emitted faces contain lower[i+1] -> lower[i] and upper[j] -> upper[j+1].
// Ties advance the lower ring first, so equal-angle rings become quads split
// along lower[i+1]-upper[i].
inline void stitch_closed(const std::vector<int>& lower, const std::vector<double>& lower_angles,
                          const std::vector<int>& upper, const std::vector<double>& upper_angles,
                          std::vector<Face>& out) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int na = static_cast<int>(lower.size());
  const int nb = static_cast<int>(upper.size());
  const double a0 = lower_angles[0];
  auto unwrap = [&](double x, double ref) {
    while (x < ref - 1e-12) x += two_pi;
    while (x >= ref + two_pi - 1e-12) x -= two_pi;
    return x;
  };
  // Upper start: the vertex whose angle is closest to a0.
  int j0 = 0;
  double best = 1e300;
  for (int j = 0; j < nb; ++j) {
    double d = std::remainder(upper_angles[j] - a0, two_pi);
    if (std::abs(d) < best - 1e-12) {
      best = std::abs(d);
      j0 = j;
    }
  }
  std::vector<double> ua(static_cast<std::size_t>(na) + 1), ub(static_cast<std::size_t>(nb) + 1);
  for (int i = 0; i < na; ++i) ua[i] = unwrap(lower_angles[i], a0);
  ua[na] = a0 + two_pi;
  const double b0 = a0 + std::remainder(upper_angles[j0] - a0, two_pi);
  for (int k = 0; k < nb; ++k) ub[k] = unwrap(upper_angles[(j0 + k) % nb], b0);
  ub[nb] = b0 + two_pi;

  int i = 0, j = 0;
  while (i < na || j < nb) {
    const int A = lower[i % na], A1 = lower[(i + 1) % na];
    const int B = upper[(j0 + j) % nb], B1 = upper[(j0 + j + 1) % nb];
    const bool advance_lower = (j == nb) || (i < na && ua[i + 1] <= ub[j + 1] + 1e-12);
    if (advance_lower) {
      out.push_back({A, B, A1});
      ++i;
    } else {
      out.push_back({A, B, B1});
      ++j;
    }
  }
}

// Open version: both rows run over the same parameter interval and share
// their endpoints' parameters.
inline void stitch_open(const std::vector<int>& lower, const std::vector<double>& lower_x,
                        const std::vector<int>& upper, const std::vector<double>& upper_x,
                        std::vector<Face>& out) {
  const int na = static_cast<int>(lower.size()) - 1;
  const int nb = static_cast<int>(upper.size()) - 1;
  int i = 0, j = 0;
  while (i < na || j < nb) {
    const bool advance_lower = (j == nb) || (i < na && lower_x[i + 1] <= upper_x[j + 1] + 1e-12);
    if (advance_lower) {
      out.push_back({lower[i], upper[j], lower[i + 1]});
      ++i;
    } else {
      out.push_back({lower[i], upper[j], upper[j + 1]});
      ++j;
    }
  }
}

} // namespace eigenglue::mesh::detail
