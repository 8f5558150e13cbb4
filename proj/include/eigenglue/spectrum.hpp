#pragma once

#include "eigenglue/mesh.hpp"
#include "eigenglue/metric.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eigenglue::spectrum {

using mesh::TriSurface;
using metric::DensityMeasure;

enum class ProblemKind { Laplace, Steklov };
enum class MassKind { Lumped, Consistent };

/// K phi = lambda M phi with K the cotangent stiffness and M the beta mass.
struct AssembledProblem {
  ProblemKind kind = ProblemKind::Laplace;
  int dim = 0;
  Eigen::SparseMatrix<double> K;
  Eigen::SparseMatrix<double> M;
  bool lumped = true;
  double beta_total = 0.0; // 1^T M 1
  std::vector<std::string> warnings;
};

AssembledProblem assemble(const TriSurface& m, const DensityMeasure& beta, ProblemKind kind,
                          MassKind mass = MassKind::Lumped);

/// Same, with per-face lengths that need not agree across edges (a
/// piecewise-constant metric perturbation of m). Only the stiffness uses them.
AssembledProblem assemble(const TriSurface& m, const std::vector<mesh::FaceLengths>& face_lengths,
                          const DensityMeasure& beta, ProblemKind kind, MassKind mass = MassKind::Lumped);

/// Cotangent stiffness alone.
Eigen::SparseMatrix<double> stiffness(const TriSurface& m, const std::vector<mesh::FaceLengths>& face_lengths);
Eigen::SparseMatrix<double> stiffness(const TriSurface& m);

/// Consecutive indices [first, last] whose eigenvalues chain within tau(1 + lambda).
struct Cluster {
  int first = 0;
  int last = 0;
  int size() const { return last - first + 1; }
};

struct SpectrumResult {
  ProblemKind kind = ProblemKind::Laplace;
  double beta_total = 0.0;
  double tol = 1e-9;
  double tau = 1e-6;
  Eigen::VectorXd eigenvalues;  // lambda_0 = 0, ..., lambda_k
  Eigen::MatrixXd eigenvectors; // dim x (k+1), beta-orthonormal, column 0 constant
  std::vector<double> residuals; // relative residual per mode (0 for mode 0)
  double orthonormality_defect = 0.0; // max |beta(phi_i, phi_j) - delta_ij|
  std::vector<Cluster> clusters;      // partition of 1..k
  double next_eigenvalue = 0.0;       // lambda_{k+1}, used to close the last cluster
  bool last_cluster_closed = true;
  std::string method;
  int iterations = 0;

  int k() const { return static_cast<int>(eigenvalues.size()) - 1; }
  /// Cluster containing index i >= 1.
  const Cluster& cluster_of(int i) const;
};

struct SolveOptions {
  double tol = 1e-9;
  double tau = 1e-6;
  int max_restarts = 400;
  bool force_dense = false;
  bool force_sparse = false;
  std::uint64_t seed = 0x5eed;
  /// Optional starting block (columns are vertex functions), e.g. a previous solve.
  const Eigen::MatrixXd* initial = nullptr;
};

/// Unknowns below which the dense solver is used.
constexpr int kDenseThreshold = 300;

SpectrumResult solve(const AssembledProblem& p, int k, const SolveOptions& opt = {});
SpectrumResult solve(const AssembledProblem& p, int k, double tol);

/// lambda_i * beta(1,1) for i = 0..k.
std::vector<double> normalized(const SpectrumResult& s);

/// Recompute clusters of the stored eigenvalues with a tolerance tau.
std::vector<Cluster> cluster_indices(const Eigen::VectorXd& eigenvalues, double next, double tau, bool& closed);

struct MinMaxReport {
  bool dense_checked = false;
  double dense_max_rel_diff = 0.0;
  int trials = 0;
  int violations = 0;
  double min_margin = 0.0; // min over trials of (max quotient - lambda_k)
  double achieving_gap = 0.0; // |max quotient over span(phi_1..phi_k) - lambda_k|
  bool ok = true;
};

/// Dense agreement (small meshes) and random-subspace min-max inequality.
MinMaxReport rayleigh_minmax_check(const AssembledProblem& p, const SpectrumResult& s, int trials,
                                   std::uint64_t seed = 1);

std::string to_json(const SpectrumResult& s);
/// Parse the JSON summary; eigenvectors are loaded from the sidecar when given.
SpectrumResult spectrum_from_json(const std::string& text, const std::optional<std::filesystem::path>& sidecar = {});
/// Little-endian float64, row-major vertices x modes.
void write_eigenvectors(const std::filesystem::path& path, const SpectrumResult& s);
Eigen::MatrixXd read_eigenvectors(const std::filesystem::path& path, int rows, int cols);

} // namespace eigenglue::spectrum
