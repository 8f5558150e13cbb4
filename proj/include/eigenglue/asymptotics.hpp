#pragma once

#include "eigenglue/mesh.hpp"
#include "eigenglue/spectrum.hpp"

#include <string>
#include <vector>

namespace eigenglue::asymptotics {

using mesh::TriSurface;

/// Least-squares line ln y = slope * ln x + intercept with a 95% Student-t interval on the slope.
struct RateFit {
  int points = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_low = 0.0;
  double slope_high = 0.0;
  double r2 = 0.0;
  bool valid() const { return points >= 2; }
};

/// Points with nonpositive or non-finite coordinates are skipped.
RateFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Free-boundary Laplace spectrum of a surface with boundary (uniform density).
spectrum::SpectrumResult neumann_spectrum(const TriSurface& m, int k, const spectrum::SolveOptions& opt = {});

struct SweepPoint {
  double eps = 0.0;
  bool ok = false;
  std::string error;
  int vertices = 0;
  int genus = 0;
  int neck_rows = 0;     // rows of the inserted cylinder or strip
  double h_neck = 0.0;   // longest inserted edge
  double h_rim = 0.0;    // longest rim edge on the surface side
  std::vector<double> glued;   // lambda_1..k (or sigma_1..k) of the glued surface
  std::vector<double> deficit; // base - glued
  std::vector<double> neumann; // mu_1..k of the excised surface (handles only)
  double sup_ratio = 0.0;      // max |phi_1| sqrt(area) / |phi_1|_L2
  double boundary_length = 0.0;
  double expected_boundary_length = 0.0; // strips: L - 4 eps + 2 l eps
  double max_residual = 0.0;
  double orthonormality_defect = 0.0;
};

struct SweepRecord {
  std::string kind; // handle | strip
  double l = 0.0;
  int n_theta = 0;
  int base_vertices = 0;
  double h_base = 0.0;       // longest base edge
  std::vector<double> base;  // lambda_1..k of the base
  std::vector<SweepPoint> points;
  int upper_index = 0;       // k used for the upper deviation
  RateFit lower_deficit;     // |Delta_1| against eps
  RateFit upper_deviation;   // lambda_k(glued) - lambda_k against 1 / ln(1/eps)
  RateFit sup_growth;        // sup ratio against ln(1/eps)
  RateFit strip_rate;        // |Delta_1| against eps sqrt(ln(1/eps))
  double neumann_C = 0.0;    // fitted on the two coarsest points
  bool neumann_holds = false; // mu_1 >= lambda_1 - C eps^2 at every point
};

struct HandleSweepOptions {
  double l = 3.0;
  int n_theta = 48;
  int k = 5;
  int upper_index = 4;
  int min_neck_rows = 8;
  int jobs = 1;
  spectrum::SolveOptions solve;
};

/// Attach a handle at p, q for each eps (strictly decreasing) and compare spectra with the base.
SweepRecord handle_deficit_sweep(const TriSurface& base, int p, int q, const std::vector<double>& eps,
                                 const HandleSweepOptions& opt = {});

struct StripSweepOptions {
  double l = 1.0;
  mesh::StripOrientation orientation = mesh::StripOrientation::Preserve;
  int k = 4;
  int jobs = 1;
  spectrum::SolveOptions solve;
};

/// Steklov version: attach strips between boundary vertices p, q.
SweepRecord strip_deficit_sweep(const TriSurface& base, int p, int q, const std::vector<double>& eps,
                                const StripSweepOptions& opt = {});

std::string sweep_csv(const SweepRecord& r);
std::string to_json(const SweepRecord& r);

struct CutoffReport {
  double eps = 0.0;
  double energy = 0.0;
  double energy_outside = 0.0; // faces with every vertex at distance >= sqrt(eps)
  double analytic = 0.0;       // 4 pi / ln(1/eps)
  int annulus_rings = 0;       // distinct distances strictly inside (eps, sqrt eps)
  std::vector<double> eta;
};

/// Dirichlet energy of eta = ln(r/eps) / ln(sqrt(eps)/eps) clamped to [0, 1], r the graph distance to center.
CutoffReport cutoff_capacity(const TriSurface& m, int center, double eps);

struct ExtensionReport {
  int k = 0;
  double l = 0.0;
  int n = 0;
  double cylinder_energy = 0.0; // per unit angular norm
  double disk_energy = 0.0;
  double ratio = 0.0;
  double analytic = 0.0;    // tanh(k l / 2)
  double lower_bound = 0.0; // 1 - 4 e^{-l}
};

/// Mode cos(k theta): cylinder [0, l/2] x S^1 insulated at the far end versus its disk extension,
/// both by 1D P1 elements with n cells.
ExtensionReport harmonic_extension_ratio(int k, double l, int n = 400);

} // namespace eigenglue::asymptotics
