#include "eigenglue/error.hpp"
#include "eigenglue/spectrum.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace eigenglue;
using namespace eigenglue::spectrum;
using metric::area_measure;
using metric::boundary_measure;

namespace {

constexpr double kPi = std::numbers::pi;

// P1 stiffness integrated directly from planar positions.
Eigen::MatrixXd p1_oracle(const std::vector<Eigen::Vector3d>& x, const std::vector<mesh::Face>& faces) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (const auto& F : faces) {
    Eigen::Matrix3d A;
    for (int k = 0; k < 3; ++k) A.row(k) << 1.0, x[F[k]].x(), x[F[k]].y();
    const double area = 0.5 * std::abs(A.determinant());
    const Eigen::Matrix3d C = A.inverse(); // column k: coefficients of hat function k
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) K(F[a], F[b]) += area * C.block<2, 1>(1, a).dot(C.block<2, 1>(1, b));
  }
  return K;
}

double max_abs(const Eigen::SparseMatrix<double>& A) {
  double m = 0.0;
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

void check_result(const AssembledProblem& p, const SpectrumResult& s) {
  CHECK(s.eigenvalues[0] == 0.0);
  CHECK(s.orthonormality_defect <= 1e-8);
  for (int i = 1; i <= s.k(); ++i) {
    CHECK(s.residuals[i] <= s.tol);
    CHECK(s.eigenvalues[i] >= s.eigenvalues[i - 1]);
    // Integration by parts: phi^T K phi = lambda beta(phi, phi).
    const Eigen::VectorXd phi = s.eigenvectors.col(i);
    CHECK(phi.dot(p.K * phi) == doctest::Approx(s.eigenvalues[i] * phi.dot(p.M * phi)).epsilon(1e-8));
  }
  const Eigen::VectorXd c = s.eigenvectors.col(0);
  CHECK((c.array() - c[0]).abs().maxCoeff() == 0.0);
}

} // namespace

TEST_CASE("constants lie in the kernel of K") {
  for (const auto& m : {mesh::icosphere(2), mesh::flat_torus({1, 0}, {0.3, 0.7}, 6), mesh::unit_disk(4),
                        mesh::genus_surface(2, 1)}) {
    const auto K = stiffness(m);
    CHECK((K * Eigen::VectorXd::Ones(m.num_vertices())).cwiseAbs().maxCoeff() < 1e-12 * max_abs(K));
    CHECK(max_abs(Eigen::SparseMatrix<double>(K - Eigen::SparseMatrix<double>(K.transpose()))) == 0.0);
  }
}

TEST_CASE("two-triangle square against the direct P1 integral") {
  std::vector<Eigen::Vector3d> x{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  std::vector<mesh::Face> f{{0, 1, 2}, {0, 2, 3}};
  auto m = mesh::TriSurface::from_positions(x, f);
  const Eigen::MatrixXd K = Eigen::MatrixXd(stiffness(m));
  CHECK((K - p1_oracle(x, f)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(K(0, 1) == doctest::Approx(-0.5));
  CHECK(std::abs(K(0, 2)) < 1e-15); // both opposite angles are right angles
  auto p = assemble(m, area_measure(m), ProblemKind::Laplace);
  auto s = solve(p, 2);
  CHECK(s.method == "dense");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::MatrixXd(p.M));
  for (int i = 1; i <= 2; ++i) CHECK(s.eigenvalues[i] == doctest::Approx(es.eigenvalues()[i]).epsilon(1e-12));
}

TEST_CASE("property: random planar triangulations match the P1 integral") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-0.12, 0.12);
  for (int trial = 0; trial < 10; ++trial) {
    auto d = mesh::unit_disk(3);
    std::vector<Eigen::Vector3d> x = *d.positions();
    for (std::size_t v = 1; v < x.size(); ++v) x[v] *= 1.0 + U(rng);
    auto m = mesh::TriSurface::from_positions(x, d.faces());
    const Eigen::MatrixXd K = Eigen::MatrixXd(stiffness(m)), O = p1_oracle(x, d.faces());
    CHECK((K - O).cwiseAbs().maxCoeff() < 1e-11 * O.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("stiffness is unchanged by a constant conformal factor and nearly so by smooth ones") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 8);
  metric::ConformalFactor c{std::vector<double>(static_cast<std::size_t>(m.num_vertices()), 0.37), ""};
  CHECK(max_abs(stiffness(metric::apply_conformal(m, c)) - stiffness(m)) <= 1e-12 * max_abs(stiffness(m)));
  // Smooth u: the vertex-scaling change of K shrinks under refinement.
  double prev = 1e300;
  for (int n : {8, 16, 32}) {
    auto t = mesh::flat_torus({1, 0}, {0, 1}, n);
    metric::ConformalFactor u;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) u.u.push_back(0.2 * std::sin(2 * kPi * i / n) * std::cos(2 * kPi * j / n));
    const double d = max_abs(stiffness(metric::apply_conformal(t, u)) - stiffness(t));
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("flat square torus: lambda_1 = 4 pi^2 with multiplicity 4") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 48);
  auto p = assemble(m, area_measure(m), ProblemKind::Laplace);
  auto s = solve(p, 8);
  check_result(p, s);
  CHECK(s.method == "krylov");
  CHECK(s.clusters.size() == 2);
  CHECK(std::abs(s.eigenvalues[1] - 4 * kPi * kPi) / (4 * kPi * kPi) < 0.01);
  CHECK(s.clusters[0].size() == 4);
  CHECK(s.last_cluster_closed);
}

TEST_CASE("round sphere: lambda_1 = 2 with multiplicity 3") {
  auto m = mesh::icosphere(4);
  auto p = assemble(m, area_measure(m), ProblemKind::Laplace);
  auto s = solve(p, 4);
  check_result(p, s);
  CHECK(std::abs(s.eigenvalues[1] - 2.0) / 2.0 < 0.01);
  CHECK(s.clusters[0].size() == 3);
  const auto nb = normalized(s);
  CHECK(nb[1] < 8 * kPi);
  CHECK(std::abs(nb[1] - 8 * kPi) / (8 * kPi) < 0.02);
}

TEST_CASE("unit disk Steklov: normalized sigma_1 = 2 pi") {
  auto m = mesh::unit_disk(16);
  auto p = assemble(m, boundary_measure(m), ProblemKind::Steklov);
  auto s = solve(p, 3);
  check_result(p, s);
  const auto nb = normalized(s);
  CHECK(std::abs(nb[1] - 2 * kPi) / (2 * kPi) < 0.02);
  CHECK(s.clusters[0].size() == 2);
  CHECK_THROWS_WITH_AS(assemble(mesh::icosphere(1), area_measure(mesh::icosphere(1)), ProblemKind::Steklov),
                       "closed surface has no Steklov problem", ValidationError);
  CHECK_THROWS_AS(assemble(m, area_measure(m), ProblemKind::Steklov), ValidationError);
}

TEST_CASE("normalized eigenvalues are scale invariant") {
  auto m = mesh::flat_torus({1, 0}, {0.3, 0.8}, 12);
  auto s1 = solve(assemble(m, area_measure(m), ProblemKind::Laplace), 3);
  for (double c : {0.1, 7.0}) {
    std::vector<double> L(m.edge_lengths());
    for (double& l : L) l *= c;
    auto mc = mesh::with_edge_lengths(m, L);
    auto s2 = solve(assemble(mc, area_measure(mc), ProblemKind::Laplace), 3);
    const auto a = normalized(s1), b = normalized(s2);
    for (int i = 1; i <= 3; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-10 * a[i]);
  }
}

TEST_CASE("dense and Krylov paths agree on small meshes") {
  for (const auto& m : {mesh::flat_torus({1, 0}, {0.2, 0.9}, 14), mesh::icosphere(2), mesh::unit_disk(7)}) {
    for (auto kind : {ProblemKind::Laplace, ProblemKind::Steklov}) {
      if (kind == ProblemKind::Steklov && m.is_closed()) continue;
      auto beta = kind == ProblemKind::Laplace ? area_measure(m) : boundary_measure(m);
      auto p = assemble(m, beta, kind);
      SolveOptions dense, sparse;
      dense.force_dense = true;
      sparse.force_sparse = true;
      auto a = solve(p, 5, dense), b = solve(p, 5, sparse);
      check_result(p, b);
      for (int i = 1; i <= 5; ++i) CHECK(std::abs(a.eigenvalues[i] - b.eigenvalues[i]) <= 1e-8 * a.eigenvalues[i]);
      auto r = rayleigh_minmax_check(p, b, 10);
      CHECK(r.dense_checked);
      CHECK(r.ok);
    }
  }
}

TEST_CASE("min-max: random subspaces never beat lambda_k") {
  auto m = mesh::flat_torus({1, 0}, {0.1, 1.0}, 14); // 196 vertices
  auto p = assemble(m, area_measure(m), ProblemKind::Laplace);
  auto s = solve(p, 5);
  auto r = rayleigh_minmax_check(p, s, 100, 99);
  CHECK(r.trials == 100);
  CHECK(r.violations == 0);
  CHECK(r.min_margin >= -1e-10);
  CHECK(r.achieving_gap <= 1e-10 * s.eigenvalues[5]);
  CHECK(r.ok);
}

TEST_CASE("property: eigenvalues are Lipschitz in the density") {
  auto m = mesh::flat_torus({1, 0}, {0.35, 0.9}, 12);
  auto beta = area_measure(m);
  auto p = assemble(m, beta, ProblemKind::Laplace);
  auto s = solve(p, 3);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double B = beta.total();
  // C from a single calibration perturbation, then checked on 100 others.
  double C = 0.0;
  std::vector<double> ratios;
  for (int trial = 0; trial < 101; ++trial) {
    auto b2 = beta;
    double norm = 0.0;
    for (auto& w : b2.weights) {
      const double dw = 1e-3 * B / m.num_vertices() * U(rng);
      w += dw;
      norm += std::abs(dw);
    }
    auto s2 = solve(assemble(m, b2, ProblemKind::Laplace), 3);
    double worst = 0.0;
    for (int i = 1; i <= 3; ++i) worst = std::max(worst, std::abs(s2.eigenvalues[i] - s.eigenvalues[i]) / norm);
    if (trial == 0)
      C = worst;
    else
      ratios.push_back(worst);
  }
  // Bound: lambda_k is Lipschitz with constant max_i lambda_i * max|phi_i|^2.
  double bound = 0.0;
  for (int i = 1; i <= 3; ++i) bound = std::max(bound, s.eigenvalues[i] * s.eigenvectors.col(i).cwiseAbs2().maxCoeff());
  for (double r : ratios) CHECK(r <= 1.0001 * bound);
  CHECK(C <= bound);
}

TEST_CASE("density validation") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 6);
  auto beta = area_measure(m);
  beta.weights[0] = 0.0;
  CHECK_NOTHROW(assemble(m, beta, ProblemKind::Laplace)); // isolated zero
  beta.weights[m.vertex_neighbors()[0][0]] = 0.0;
  CHECK_THROWS_AS(assemble(m, beta, ProblemKind::Laplace), ValidationError);
  auto p = assemble(m, area_measure(m), ProblemKind::Laplace);
  CHECK_THROWS_AS(solve(p, 36), ValidationError);
  CHECK_THROWS_AS(solve(p, 0), ValidationError);
}

TEST_CASE("isolated zero-mass vertices: dense condensation matches the Krylov path") {
  auto m = mesh::flat_torus({1, 0}, {0.2, 1.0}, 12);
  auto beta = area_measure(m);
  beta.weights[5] = 0.0;
  beta.weights[77] = 0.0;
  auto p = assemble(m, beta, ProblemKind::Laplace);
  SolveOptions d, k;
  d.force_dense = true;
  k.force_sparse = true;
  auto a = solve(p, 4, d), b = solve(p, 4, k);
  for (int i = 1; i <= 4; ++i) CHECK(a.eigenvalues[i] == doctest::Approx(b.eigenvalues[i]).epsilon(1e-9));
}

TEST_CASE("consistent mass converges to the same spectrum") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 32);
  auto s = solve(assemble(m, area_measure(m), ProblemKind::Laplace, MassKind::Consistent), 4);
  CHECK(std::abs(s.eigenvalues[1] - 4 * kPi * kPi) / (4 * kPi * kPi) < 0.02);
  CHECK(s.orthonormality_defect < 1e-8);
}

TEST_CASE("JSON summary and binary sidecar round-trip") {
  auto m = mesh::icosphere(2);
  auto s = solve(assemble(m, area_measure(m), ProblemKind::Laplace), 4);
  const auto dir = std::filesystem::temp_directory_path() / "eigenglue_spectrum_test";
  std::filesystem::create_directories(dir);
  write_eigenvectors(dir / "vec.bin", s);
  CHECK(std::filesystem::file_size(dir / "vec.bin") == 8u * 162u * 5u);
  auto back = spectrum_from_json(to_json(s), dir / "vec.bin");
  CHECK(back.eigenvalues == s.eigenvalues);
  CHECK(back.eigenvectors == s.eigenvectors);
  CHECK(back.clusters.size() == s.clusters.size());
  CHECK(to_json(back).size() > 0);
  std::filesystem::remove_all(dir);
}
