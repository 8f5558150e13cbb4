#pragma once

#include "eigenglue/certificates.hpp"
#include "eigenglue/metric.hpp"
#include "eigenglue/spectrum.hpp"
#include "eigenglue/variation.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eigenglue::optimizer {

using metric::DensityMeasure;
using mesh::TriSurface;

/// Which variable a step moves: vertex weights, the log-density u, or both in turn.
enum class MoveSet { Density, Conformal, Alternating };

struct OptimizerConfig {
  variation::FunctionalSpec objective = variation::inverse_power({1.0});
  MoveSet moves = MoveSet::Density;
  spectrum::ProblemKind kind = spectrum::ProblemKind::Laplace;
  double initial_step = 0.5;  // relative change of the density per unit direction
  double max_step = 0.5;
  double backtrack = 0.5;
  double min_step = 1e-6;
  int max_iterations = 200;
  double tol_objective = 1e-10; // relative change of E over an accepted step
  double tol_gradient = 1e-3;   // relative norm of the min-norm subgradient
  double cluster_tau = 2e-3;    // eigenvalues closer than this (relative) are treated as one cluster
  int samples = 30;             // random selections per iterate (plus identity and average)
  int extra_modes = 4;          // modes solved beyond m
  double floor = 1e-14;         // density floor relative to the mean weight
  double solver_tol = 1e-9;
  std::uint64_t seed = 0x5eed;
};

struct IterateRecord {
  int iteration = 0;
  double E = 0.0;
  double E0 = 0.0;
  bool gap = false;
  std::vector<double> lambda_bar; // 1..m + extra
  std::vector<int> cluster_sizes; // optimizer clusters meeting 1..m
  double gradient_norm = 0.0;     // relative min-norm subgradient
  double step = 0.0;              // accepted step (0 if none)
  int backtracks = 0;
  bool accepted = false;
  std::string move;
  double max_density_ratio = 0.0; // max weight / mean weight
};

struct OptimRun {
  std::vector<IterateRecord> history;
  DensityMeasure density;            // final (best) iterate, total mass 1
  metric::ConformalFactor conformal; // the same iterate as e^{2u} A_v
  spectrum::SpectrumResult spectrum;
  variation::EvalReport final_eval;
  double gradient_norm = 0.0;
  double normalization_defect = 0.0; // sup of |Phi|^2_Lambda - 1 for the final certificate
  double conformality_defect = 0.0;  // area mean
  std::optional<certificates::EigenmapCertificate> certificate; // on optimizer clusters
  certificates::ConformalityReport conformality;
  std::string termination; // converged | objective-tolerance | stalled | max-iterations
  std::vector<std::string> warnings;
  std::vector<bool> accept_sequence;
};

using IterateCallback = std::function<void(const IterateRecord&)>;

/// Minimize E = F(lambda_bar_1..m) over vertex densities on m (fixed intrinsic metric).
OptimRun minimize_E(const TriSurface& m, const OptimizerConfig& cfg, const DensityMeasure& init,
                    const IterateCallback& on_iterate = {});

/// minimize_E with F = 1 / lambda_bar_1.
OptimRun maximize_lambda1(const TriSurface& m, OptimizerConfig cfg, const DensityMeasure& init,
                          const IterateCallback& on_iterate = {});

/// Euclidean projection onto {w >= 0, sum w = 1}.
std::vector<double> project_simplex(const std::vector<double>& w);

/// Minimum-norm point of the convex hull of the rows' vectors under the Gram matrix G.
/// Returns barycentric coefficients.
Eigen::VectorXd min_norm_hull(const Eigen::MatrixXd& G);

std::string to_json(const IterateRecord& r);
std::string summary_json(const OptimRun& run);

/// Parse the key = value config format; throws ValidationError naming an unknown key.
OptimizerConfig parse_config(const std::string& text, std::map<std::string, std::string>* raw = nullptr);
/// Keys accepted by parse_config.
const std::vector<std::string>& config_keys();

struct SweepCase {
  std::string label;
  std::vector<std::pair<std::string, std::string>> params;
  TriSurface mesh;
  DensityMeasure init;
  OptimizerConfig cfg;
  /// Set when the case could not be built; the row fails with this message.
  std::string error;
};

struct SweepRow {
  std::string label;
  std::vector<std::pair<std::string, std::string>> params;
  bool ok = false;
  std::string error;
  std::vector<double> lambda_bar;
  double E = 0.0;
  double gradient_norm = 0.0;
  double normalization_defect = 0.0;
  double conformality_defect = 0.0;
  int iterations = 0;
  std::string termination;
  double seconds = 0.0; // wall time; kept out of the CSV so equal seeds give equal bytes
};

/// Runs each case (in parallel over `jobs` threads); failures are recorded per row.
std::vector<SweepRow> sweep(const std::vector<SweepCase>& cases, int jobs = 1);
std::string sweep_csv(const std::vector<SweepRow>& rows);

} // namespace eigenglue::optimizer
