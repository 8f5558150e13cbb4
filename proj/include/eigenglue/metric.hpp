#pragma once

#include "eigenglue/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace eigenglue::metric {

using mesh::FaceLengths;
using mesh::TriSurface;

/// Where a vertex measure lives: every vertex (Laplace) or boundary vertices only (Steklov).
enum class Support { Interior, Boundary };

/// Nonnegative vertex-lumped measure beta. beta(phi, psi) = sum_v w_v phi_v psi_v.
struct DensityMeasure {
  Support support = Support::Interior;
  std::vector<double> weights;

  double total() const;
  /// beta(phi, psi).
  double pair(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi) const;
};

/// Per-vertex log-density u; the metric e^{2u} g.
struct ConformalFactor {
  std::vector<double> u;
  std::string reference; // fingerprint of the surface it belongs to
};

/// Per-face constant symmetric tensor (h11, h12, h22) in the face's canonical
/// orthonormal frame: corner 0 at the origin, corner 1 on the positive x axis,
/// corner 2 in the upper half plane.
struct MetricPerturbation {
  std::vector<std::array<double, 3>> h;
};

/// Corner coordinates of a face in its canonical frame.
std::array<Eigen::Vector2d, 3> face_chart(const FaceLengths& L);

/// Mixed Voronoi vertex areas (they sum to the total area).
std::vector<double> vertex_areas(const TriSurface& m);

/// beta = area form, lumped.
/// Compensated sum, accurate to about one rounding of the result.
double accurate_sum(const std::vector<double>& x);

DensityMeasure area_measure(const TriSurface& m);
/// beta = boundary length, lumped (half of each boundary edge to each end).
DensityMeasure boundary_measure(const TriSurface& m);
/// w_v = e^{2 u_v} * (Voronoi area of v).
DensityMeasure density_from_conformal(const TriSurface& m, const ConformalFactor& u);
/// Inverse of density_from_conformal on vertices with positive weight.
ConformalFactor conformal_from_density(const TriSurface& m, const DensityMeasure& beta);

/// Checks sizes, finiteness and sign; throws ValidationError.
void validate(const DensityMeasure& beta, const TriSurface& m);

/// Stable 64-bit fingerprint of a surface's canonical serialization, as hex.
std::string fingerprint(const TriSurface& m);

/// max over faces of sqrt(ln(mu_max)^2 + ln(1/mu_min)^2), mu the eigenvalues
/// of g2 relative to g1 on that face.
double metric_distance(const TriSurface& g1, const TriSurface& g2);
/// The same quantity for a single pair of faces.
double face_metric_distance(const FaceLengths& g1, const FaceLengths& g2);

/// Edge lengths l_e * exp((u_a + u_b) / 2).
TriSurface apply_conformal(const TriSurface& m, const ConformalFactor& u);

/// sum_f area_f * <h1, h2>_f.
double tensor_inner(const MetricPerturbation& h1, const MetricPerturbation& h2, const TriSurface& m);
/// max_f sqrt(<h, h>_f).
double tensor_sup_norm(const MetricPerturbation& h, const TriSurface& m);
/// h = g on every face.
MetricPerturbation identity_perturbation(const TriSurface& m);
/// Express h in frames rotated by `angles[f]` (counter-clockwise).
MetricPerturbation rotate_frames(const MetricPerturbation& h, const std::vector<double>& angles);

/// Per-face lengths of the metric g + t h (each face independently).
std::vector<FaceLengths> perturbed_face_lengths(const TriSurface& m, const MetricPerturbation& h, double t);

std::string to_json(const DensityMeasure& beta);
DensityMeasure density_from_json(const std::string& text);
std::string to_json(const ConformalFactor& u);
ConformalFactor conformal_from_json(const std::string& text);

} // namespace eigenglue::metric
