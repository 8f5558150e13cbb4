#include "eigenglue/error.hpp"
#include "eigenglue/optimizer.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace eigenglue;
using namespace eigenglue::optimizer;

namespace {

constexpr double kPi = std::numbers::pi;

metric::DensityMeasure perturbed_sphere_density(const mesh::TriSurface& m, double amp) {
  auto beta = metric::area_measure(m);
  const auto& P = *m.positions();
  for (int v = 0; v < m.num_vertices(); ++v) beta.weights[v] *= std::exp(amp * (P[v].z() + 0.5 * P[v].x() * P[v].y()));
  return beta;
}

void check_monotone(const OptimRun& run) {
  for (std::size_t i = 1; i < run.history.size(); ++i) CHECK(run.history[i].E <= run.history[i - 1].E + 1e-12);
  CHECK(std::abs(run.density.total() - 1.0) <= 1e-14);
  if (run.termination == "converged") CHECK(run.gradient_norm < OptimizerConfig{}.tol_gradient);
}

} // namespace

TEST_CASE("property: simplex projection") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(static_cast<std::size_t>(1 + trial % 17));
    for (double& x : w) x = N(rng);
    const auto p = project_simplex(w);
    double s = 0.0;
    for (double x : p) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    // Optimality: w - p is constant on the support and no larger off it.
    double theta = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (p[i] > 0.0) theta = w[i] - p[i];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (p[i] > 0.0) CHECK(w[i] - p[i] == doctest::Approx(theta).epsilon(1e-12));
      else CHECK(w[i] <= theta + 1e-12);
    }
    const auto pp = project_simplex(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(pp[i] == doctest::Approx(p[i]).epsilon(1e-14));
  }
}

TEST_CASE("minimum-norm point of a hull") {
  // Segment between a = (1, 0) and b = (-1, 1): closed form t = <a, a - b> / |a - b|^2.
  Eigen::MatrixXd P(2, 2);
  P << 1, -1, 0, 1;
  const Eigen::MatrixXd G = P.transpose() * P;
  const auto x = min_norm_hull(G);
  const double t = (P.col(0).dot(P.col(0) - P.col(1))) / (P.col(0) - P.col(1)).squaredNorm();
  CHECK(x[1] == doctest::Approx(t).epsilon(1e-9));
  // Origin inside the hull of a triangle.
  Eigen::MatrixXd T(2, 3);
  T << 1, -1, 0, 0, 1, -1;
  CHECK((T * min_norm_hull(T.transpose() * T)).norm() < 1e-8);
  // Random sets: the min-norm point p satisfies <p, g_a> >= |p|^2 for every element.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N(0.5, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::MatrixXd A(6, 8);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 8; ++j) A(i, j) = N(rng);
    const Eigen::VectorXd p = A * min_norm_hull(A.transpose() * A);
    for (int j = 0; j < 8; ++j) CHECK(p.dot(A.col(j)) >= p.squaredNorm() - 1e-8);
  }
}

TEST_CASE("flat square torus: uniform density is already critical") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 24);
  auto run = maximize_lambda1(m, {}, metric::area_measure(m));
  check_monotone(run);
  CHECK(run.termination == "converged");
  CHECK(run.history.size() == 1);
  CHECK(run.final_eval.lambda_bar[0] == doctest::Approx(4 * kPi * kPi).epsilon(0.01));
  for (double w : run.density.weights) CHECK(w == doctest::Approx(1.0 / m.num_vertices()).epsilon(1e-12));
}

TEST_CASE("hexagonal torus: no ascent direction at the uniform density") {
  auto m = mesh::flat_torus({1, 0}, {0.5, std::sqrt(3.0) / 2}, 24);
  auto run = maximize_lambda1(m, {}, metric::area_measure(m));
  CHECK(run.termination == "converged");
  CHECK(run.gradient_norm < 1e-8);
  CHECK(run.final_eval.lambda_bar[0] == doctest::Approx(8 * kPi * kPi / std::sqrt(3.0)).epsilon(0.02));
  CHECK(run.history.front().cluster_sizes == std::vector<int>{6});
}

TEST_CASE("sphere: a perturbed density climbs back towards 8 pi") {
  auto m = mesh::icosphere(3);
  auto run = maximize_lambda1(m, {}, perturbed_sphere_density(m, 0.5));
  check_monotone(run);
  CHECK(run.history.front().lambda_bar[0] < 0.95 * 8 * kPi);
  CHECK(run.final_eval.lambda_bar[0] == doctest::Approx(8 * kPi).epsilon(0.02));
  CHECK(run.termination == "converged");
  CHECK(run.normalization_defect < 0.05);
}

TEST_CASE("monotone reparametrizations give the same accept/reject sequence") {
  auto m = mesh::icosphere(2);
  const auto init = perturbed_sphere_density(m, 0.6);
  OptimizerConfig cfg;
  cfg.max_iterations = 12;
  cfg.tol_objective = 0.0;
  cfg.tol_gradient = 1e-12;
  auto a = maximize_lambda1(m, cfg, init);
  cfg.objective = variation::parse_functional("inv1");
  auto b = minimize_E(m, cfg, init);
  cfg.objective = variation::exponential({1.0}, 0.1);
  auto c = minimize_E(m, cfg, init);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].E == b.history[i].E);
  CHECK(a.accept_sequence == c.accept_sequence);
  REQUIRE(a.history.size() == c.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].lambda_bar[0] == doctest::Approx(c.history[i].lambda_bar[0]).epsilon(1e-9));
}

TEST_CASE("Yang-Yau combination: the round density is a fixed point") {
  auto m = mesh::icosphere(3);
  OptimizerConfig cfg;
  cfg.objective = variation::parse_functional("inv1+inv2+inv3");
  auto run = minimize_E(m, cfg, metric::area_measure(m));
  CHECK(run.termination == "converged");
  CHECK(run.history.size() == 1);
  CHECK(run.normalization_defect < 0.05);
  CHECK(run.conformality_defect < 0.05);
}

TEST_CASE("conformal and alternating moves stay monotone") {
  auto m = mesh::icosphere(2);
  for (auto mv : {MoveSet::Conformal, MoveSet::Alternating}) {
    OptimizerConfig cfg;
    cfg.moves = mv;
    cfg.max_iterations = 15;
    auto run = maximize_lambda1(m, cfg, perturbed_sphere_density(m, 0.5));
    check_monotone(run);
    CHECK(run.history.back().E < run.history.front().E);
    if (mv == MoveSet::Alternating) CHECK(run.history[1].move == "conformal");
  }
}

TEST_CASE("Steklov: the disk's uniform boundary density is recovered") {
  auto m = mesh::unit_disk(6);
  auto beta = metric::boundary_measure(m);
  for (int v = 0; v < m.num_vertices(); ++v)
    if (beta.weights[v] > 0.0) beta.weights[v] *= 1.0 + 0.3 * std::sin(1.7 * v);
  OptimizerConfig cfg;
  cfg.kind = spectrum::ProblemKind::Steklov;
  auto run = maximize_lambda1(m, cfg, beta);
  check_monotone(run);
  CHECK(run.final_eval.lambda_bar[0] > run.history.front().lambda_bar[0]);
  CHECK(run.final_eval.lambda_bar[0] == doctest::Approx(2 * kPi).epsilon(0.02));
}

TEST_CASE("gap and hypothesis checks") {
  auto m = mesh::icosphere(1);
  OptimizerConfig cfg;
  cfg.max_iterations = 0;
  for (const char* F : {"inv1+inv2", "exp:1,1@0.05", "log:1", "pow:1,2@2"}) {
    cfg.objective = variation::parse_functional(F);
    auto run = minimize_E(m, cfg, metric::area_measure(m));
    CHECK(run.final_eval.gap);
    CHECK(run.final_eval.E < run.final_eval.E0);
    CHECK(run.warnings.empty());
  }
  variation::FunctionalSpec bad = variation::inverse_power({1.0});
  bad.dF = [](const std::vector<double>&) { return std::vector<double>{1.0}; };
  cfg.objective = bad;
  CHECK_THROWS_AS(minimize_E(m, cfg, metric::area_measure(m)), ValidationError);
  cfg.objective = variation::exponential({1.0}, 10.0); // partials underflow on the grid
  CHECK_THROWS_AS(minimize_E(m, cfg, metric::area_measure(m)), ValidationError);
}

TEST_CASE("config parsing") {
  std::map<std::string, std::string> raw;
  auto cfg = parse_config("# sphere recipe\nobjective = \"inv1+inv2\"\nmoves = both\nseed = 7\nmax_iterations = 5\n"
                          "mesh = sphere:3  # builtin\n",
                          &raw);
  CHECK(cfg.objective.m == 2);
  CHECK(cfg.moves == MoveSet::Alternating);
  CHECK(cfg.seed == 7u);
  CHECK(cfg.max_iterations == 5);
  CHECK(raw.at("mesh") == "sphere:3");
  CHECK_THROWS_WITH_AS(parse_config("stepsize = 3\n"), doctest::Contains("stepsize"), ValidationError);
  CHECK_THROWS_AS(parse_config("max_iterations = 2.5\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("backtrack = 1.5\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), ValidationError);
}

TEST_CASE("sweep rows and determinism") {
  std::vector<SweepCase> cases;
  for (int level : {1, 2}) {
    auto m = mesh::icosphere(level);
    OptimizerConfig cfg;
    cfg.max_iterations = 5;
    cases.push_back({"sphere" + std::to_string(level), {{"level", std::to_string(level)}}, m,
                     perturbed_sphere_density(m, 0.4), cfg});
  }
  auto bad = cases.front();
  bad.label = "broken";
  bad.init.weights.pop_back();
  cases.push_back(bad);
  const auto rows = sweep(cases, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[2].ok);
  CHECK_FALSE(rows[2].error.empty());
  const auto csv = sweep_csv(rows);
  CHECK(csv == sweep_csv(sweep(cases, 1)));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("label,level,ok,E,lambda_bar_1", 0) == 0);
}
