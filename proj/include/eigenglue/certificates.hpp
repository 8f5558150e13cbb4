#pragma once

#include "eigenglue/spectrum.hpp"
#include "eigenglue/variation.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace eigenglue::certificates {

using mesh::TriSurface;
using spectrum::SpectrumResult;

/// How cluster masses are split among the components of a cluster.
enum class ScaleRule {
  Weights,  // per-index t_i; indices of a cluster beyond m start with zero mass
  Uniform,  // each used cluster's mass spread evenly over its dimensions
};

struct BuildOptions {
  ScaleRule rule = ScaleRule::Weights;
  bool refine = true;       // rotation and mass search inside clusters
  int starts = 8;           // random starts of the search
  std::uint64_t seed = 0x5eed;
  int max_sweeps = 200;     // coordinate-descent sweeps per start
};

/// Phi = C * phi_tilde[indices], phi_tilde = sqrt(beta(1,1)) * phi, so that
/// beta_tilde = beta / beta(1,1) is a probability measure.
struct EigenmapCertificate {
  std::vector<int> indices;       // eigen indices feeding the map
  std::vector<int> component_cluster; // cluster id (into s.clusters) of each component
  Eigen::MatrixXd coefficients;   // n x indices.size()
  Eigen::VectorXd Lambda;         // normalized eigenvalue per component
  std::vector<double> t;          // weights t_1..t_m
  std::vector<double> cluster_mass; // target mass per used cluster (sum of t)
  Eigen::MatrixXd values;         // V x n, Phi at vertices
  Eigen::VectorXd normalization_defect; // per vertex |Phi|^2_Lambda - 1
  double normalization_sup = 0.0;
  double normalization_l1 = 0.0;  // beta_tilde-weighted
  double normalization_mean = 0.0; // beta_tilde-mean, 0 by construction
  double raw_normalization_sup = 0.0; // before the cluster search
  std::vector<double> harmonic_residual; // per component, relative
  double cluster_spread = 0.0;    // max relative eigenvalue spread inside a used cluster
  std::vector<double> beta_tilde; // vertex weights / beta(1,1)

  int components() const { return static_cast<int>(coefficients.rows()); }
};

/// Assemble Phi from solved eigenvectors and weights (see variation::cluster_weights).
/// Throws ValidationError when the weights cannot be split over the clusters.
EigenmapCertificate build_eigenmap(const spectrum::AssembledProblem& p, const SpectrumResult& s,
                                   const std::vector<double>& t, const BuildOptions& opt = {});

/// Recompute values, normalization and residual fields after editing coefficients.
void refresh(EigenmapCertificate& c, const spectrum::AssembledProblem& p, const SpectrumResult& s);

struct ConformalityReport {
  std::vector<double> defect; // per face, sqrt(2) |T_0|_F / tr T, 0 on zero-energy faces
  std::vector<double> energy; // per face, tr T = |grad Phi|^2
  double mean = 0.0;          // area weighted
  double sup = 0.0;
  std::vector<int> branch_candidates; // vertices with face-averaged |grad Phi|^2 below the floor
  double branch_floor = 1e-6;         // relative to the area mean of |grad Phi|^2
};

ConformalityReport conformality_defect(const EigenmapCertificate& c, const TriSurface& m, double branch_floor = 1e-6);

struct PairProbe {
  double distance = 0.0; // |Phi(p) - Phi(q)|
  double gradient = 0.0; // sqrt of face-averaged |grad Phi|^2 at p
  bool branch_candidate = false;
};

PairProbe pair_identification_probe(const EigenmapCertificate& c, const TriSurface& m, int p, int q,
                                    double branch_floor = 1e-6);

std::string to_json(const EigenmapCertificate& c, const ConformalityReport& r);
/// face,defect,energy rows.
std::string defect_csv(const ConformalityReport& r);

} // namespace eigenglue::certificates
