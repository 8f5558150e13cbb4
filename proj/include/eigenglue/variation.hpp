#pragma once

#include "eigenglue/metric.hpp"
#include "eigenglue/spectrum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace eigenglue::variation {

using metric::MetricPerturbation;
using mesh::TriSurface;
using spectrum::SpectrumResult;

/// F(lambda_bar_1, ..., lambda_bar_m) with its partial derivatives.
struct FunctionalSpec {
  std::string name;
  int m = 1;
  std::function<double(const std::vector<double>&)> F;
  std::function<std::vector<double>(const std::vector<double>&)> dF;
  /// mask[i] true: F strictly decreasing in coordinate i; false: F ignores it.
  std::vector<bool> decreasing;
};

/// sum_i a_i x_i^{-s}.
FunctionalSpec inverse_power(std::vector<double> a, double s = 1.0);
/// sum_i a_i exp(-t x_i).
FunctionalSpec exponential(std::vector<double> a, double t = 1.0);
/// -sum_i a_i ln x_i.
FunctionalSpec neg_log(std::vector<double> a);
/// Parse "inv1", "inv1+inv2+inv3", "inv:1,2", "exp:1,0,1@0.5", "log:1,1", "pow:1,1@2".
FunctionalSpec parse_functional(const std::string& text);

struct HypothesisReport {
  bool ok = true;
  int samples = 0;
  std::vector<std::string> violations;
};

/// Samples a grid in (0, +inf)^m and checks each coordinate against the mask:
/// strictly negative partials where decreasing, exactly zero where ignored.
HypothesisReport check_hypothesis(const FunctionalSpec& spec, int per_axis = 6);

struct EvalReport {
  double E = 0.0;
  double E0 = 0.0; // F(0, lambda_bar_2, ..., lambda_bar_m); +inf when undefined
  bool gap = false; // E < E0
  std::vector<double> lambda_bar;
};

/// E and E0 from a spectrum with at least m nonzero modes.
EvalReport eval_E(const FunctionalSpec& spec, const SpectrumResult& s);

/// Per-face gradients of vertex functions in the canonical face frames.
std::vector<Eigen::Vector2d> face_gradients(const TriSurface& m, const Eigen::VectorXd& phi);

/// Per-face tensor |grad phi|^2 / 2 g - d phi (x) d phi for each face.
MetricPerturbation stress_tensor(const TriSurface& m, const Eigen::VectorXd& phi);

/// S(h) for phi and psi: sum_f A_f ( <grad phi, grad psi> tr h / 2 - grad phi^T h grad psi ).
double stress_pairing(const TriSurface& m, const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                      const MetricPerturbation& h);

struct DerivativeReport {
  int k = 0;
  int cluster = 0; // index into s.clusters
  int first = 0;   // i(k)
  int last = 0;    // I(k)
  Eigen::MatrixXd Q; // restricted form in the beta-orthonormal cluster basis
  std::vector<double> derivatives; // ascending eigenvalues of Q: one-sided derivatives of lambda_bar_first..last
  double derivative = 0.0;         // the one for lambda_bar_k
};

/// One-sided derivative of lambda_bar at t = 0+ along (g + t h, beta + t b).
/// `b` holds signed vertex weights of the density perturbation.
DerivativeReport directional_derivative(const TriSurface& m, const SpectrumResult& s, const MetricPerturbation& h,
                                        const std::vector<double>& b, int k);

std::string to_json(const DerivativeReport& r);

/// Gradient element of E for one eigenfunction selection.
struct SubgradientElement {
  MetricPerturbation stress; // pairs with h through metric::tensor_inner
  Eigen::VectorXd density;   // pairs with b as sum_v b_v density_v
  std::string selection;     // "identity", "sample <n>" or "cluster-average"
};

struct SubgradientOptions {
  int samples = 8; // random rotations per call, after the identity
  std::uint64_t seed = 0x5eed;
  double cluster_tau = -1.0; // recluster with this tolerance when positive
  bool include_average = true;
};

/// Elements of the sampled subdifferential of E at (g, beta).
std::vector<SubgradientElement> subgradient_elements(const TriSurface& m, const FunctionalSpec& spec,
                                                     const SpectrumResult& s, const SubgradientOptions& opt = {});

struct ClusterWeights {
  std::vector<double> t; // t_1..t_m
  double c = 0.0;
  std::vector<double> partials;
  std::vector<int> cluster_of;       // cluster index per used eigenvalue
  std::vector<double> cluster_mass;  // sum of t_i over each used cluster
};

/// t_i = -c dF_i with c = (sum_i -lambda_bar_i dF_i)^{-1}, at normalized eigenvalues.
ClusterWeights cluster_weights(const FunctionalSpec& spec, const SpectrumResult& s);
/// The same from explicit values.
ClusterWeights cluster_weights(const FunctionalSpec& spec, const std::vector<double>& lambda_bar);

} // namespace eigenglue::variation
