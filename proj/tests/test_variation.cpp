#include "eigenglue/error.hpp"
#include "eigenglue/variation.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace eigenglue;
using namespace eigenglue::variation;
using metric::DensityMeasure;
using spectrum::ProblemKind;

namespace {

constexpr double kPi = std::numbers::pi;

struct Fixture {
  mesh::TriSurface m;
  DensityMeasure beta;
};

// Flat torus carrying a smooth non-uniform density: simple eigenvalues.
Fixture generic_torus(int n) {
  Fixture x{mesh::flat_torus({1, 0}, {0.15, 1.05}, n), {}};
  metric::ConformalFactor u;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      u.u.push_back(0.2 * std::sin(2 * kPi * i / n) + 0.1 * std::cos(2 * kPi * (i + 2 * j) / n));
  x.beta = metric::density_from_conformal(x.m, u);
  return x;
}

// Sorted lambda_bar_1..k along (g + t h, beta + t b), solved from scratch.
Eigen::VectorXd lambda_bar_at(const Fixture& x, const metric::MetricPerturbation& h, const std::vector<double>& b,
                              double t, int k) {
  auto beta = x.beta;
  for (std::size_t v = 0; v < b.size(); ++v) beta.weights[v] += t * b[v];
  auto p = spectrum::assemble(x.m, metric::perturbed_face_lengths(x.m, h, t), beta, ProblemKind::Laplace);
  spectrum::SolveOptions o;
  o.tol = 1e-12;
  auto s = spectrum::solve(p, k, o);
  return s.eigenvalues.tail(k) * p.beta_total;
}

metric::MetricPerturbation random_h(int faces, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  metric::MetricPerturbation h;
  for (int f = 0; f < faces; ++f) h.h.push_back({U(rng), U(rng), U(rng)});
  return h;
}

std::vector<double> random_b(const DensityMeasure& beta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> b;
  for (double w : beta.weights) b.push_back(w * U(rng));
  return b;
}

} // namespace

TEST_CASE("functional families and hypothesis (H)") {
  auto f = parse_functional("inv1+inv2+inv3");
  CHECK(f.m == 3);
  CHECK(f.F({1.0, 2.0, 4.0}) == doctest::Approx(1.75));
  CHECK(check_hypothesis(f).ok);
  auto g = parse_functional("inv:1,0");
  CHECK(g.decreasing == std::vector<bool>{true, false});
  auto r = check_hypothesis(g);
  CHECK(r.ok);
  CHECK(r.samples == 36);
  for (const auto& x : {std::vector<double>{0.5, 3.0}, std::vector<double>{7.0, 0.2}}) CHECK(g.dF(x)[1] == 0.0);
  CHECK(parse_functional("exp:1,1@0.5").F({0.0, 2.0}) == doctest::Approx(1.0 + std::exp(-1.0)));
  CHECK(parse_functional("log:1,1").dF({2.0, 4.0})[1] == doctest::Approx(-0.25));
  CHECK(parse_functional("pow:1@2").F({2.0}) == doctest::Approx(0.25));
  CHECK(parse_functional("inv2").decreasing == std::vector<bool>{false, true});
  CHECK_THROWS_AS(parse_functional("cube:1"), ValidationError);
  CHECK_THROWS_AS(parse_functional("inv:-1"), ValidationError);
  CHECK_THROWS_AS(parse_functional("inv:0,0"), ValidationError);

  // A mask that lies about a coordinate is caught.
  auto liar = f;
  liar.decreasing[1] = false;
  CHECK_FALSE(check_hypothesis(liar).ok);
  FunctionalSpec growing = inverse_power({1.0});
  growing.dF = [](const std::vector<double>& x) { return std::vector<double>{x[0] > 100 ? 1.0 : -1.0}; };
  CHECK_FALSE(check_hypothesis(growing).ok);
}

TEST_CASE("E and the gap E < E0") {
  auto m = mesh::icosphere(3);
  auto s = spectrum::solve(spectrum::assemble(m, metric::area_measure(m), ProblemKind::Laplace), 4);
  auto r = eval_E(parse_functional("inv1"), s);
  CHECK(r.E == doctest::Approx(1.0 / (8 * kPi)).epsilon(0.02));
  CHECK(std::isinf(r.E0));
  CHECK(r.gap);
  auto e = eval_E(exponential({1.0, 1.0}, 0.05), s);
  CHECK(std::isfinite(e.E0));
  CHECK(e.E0 == doctest::Approx(1.0 + std::exp(-0.05 * e.lambda_bar[1])));
  CHECK(e.gap);
  CHECK_THROWS_AS(eval_E(parse_functional("inv:1,1,1,1,1"), s), ValidationError);
}

TEST_CASE("zero perturbation and the trace pairing") {
  auto x = generic_torus(10);
  auto s = spectrum::solve(spectrum::assemble(x.m, x.beta, ProblemKind::Laplace), 3);
  metric::MetricPerturbation zero{std::vector<std::array<double, 3>>(static_cast<std::size_t>(x.m.num_faces()), {0, 0, 0})};
  std::vector<double> b0(static_cast<std::size_t>(x.m.num_vertices()), 0.0);
  for (int k = 1; k <= 3; ++k) CHECK(directional_derivative(x.m, s, zero, b0, k).derivative == 0.0);
  const auto g = metric::identity_perturbation(x.m);
  for (int k = 1; k <= 3; ++k) {
    const Eigen::VectorXd phi = s.eigenvectors.col(k);
    CHECK(std::abs(stress_pairing(x.m, phi, phi, g)) <= 1e-10);
    CHECK(std::abs(metric::tensor_inner(stress_tensor(x.m, phi), g, x.m)) <= 1e-10);
  }
}

TEST_CASE("property: simple-eigenvalue derivative matches central differences") {
  auto x = generic_torus(14);
  auto s = spectrum::solve(spectrum::assemble(x.m, x.beta, ProblemKind::Laplace), 4, 1e-12);
  std::mt19937_64 rng(17);
  const double t = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_h(x.m.num_faces(), rng);
    const auto b = random_b(x.beta, rng);
    for (int k = 1; k <= 3; ++k) {
      REQUIRE(s.cluster_of(k).size() == 1);
      const auto r = directional_derivative(x.m, s, h, b, k);
      const double fd = (lambda_bar_at(x, h, b, t, k)[k - 1] - lambda_bar_at(x, h, b, -t, k)[k - 1]) / (2 * t);
      CHECK(std::abs(fd - r.derivative) <= 1e-4 * (1.0 + std::abs(r.derivative)));
    }
  }
}

TEST_CASE("double eigenvalue: sorted one-sided differences follow the restricted form") {
  // Rectangular torus: lambda_1 is the double pair cos/sin along the long side.
  Fixture x{mesh::flat_torus({1, 0}, {0, 1.3}, 12), {}};
  x.beta = metric::area_measure(x.m);
  auto s = spectrum::solve(spectrum::assemble(x.m, x.beta, ProblemKind::Laplace), 3, 1e-12);
  REQUIRE(s.clusters[0].size() == 2);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    const auto h = random_h(x.m.num_faces(), rng);
    const auto b = random_b(x.beta, rng);
    const auto r = directional_derivative(x.m, s, h, b, 1);
    CHECK(r.derivatives.size() == 2);
    CHECK(r.derivatives[0] <= r.derivatives[1]);
    CHECK(directional_derivative(x.m, s, h, b, 2).derivative == r.derivatives[1]);
    const double t = 1e-5;
    const Eigen::VectorXd l0 = s.eigenvalues.tail(3) * s.beta_total;
    const Eigen::VectorXd a = lambda_bar_at(x, h, b, t, 3), c = lambda_bar_at(x, h, b, t / 2, 3);
    for (int i = 0; i < 2; ++i) {
      const double d1 = (a[i] - l0[i]) / t, d2 = (c[i] - l0[i]) / (t / 2);
      const double rich = 2 * d2 - d1;
      CHECK(std::abs(rich - r.derivatives[i]) <= 1e-3 * (1.0 + std::abs(r.derivatives[i])));
    }
  }
}

TEST_CASE("an open cluster is refused") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 10);
  auto s = spectrum::solve(spectrum::assemble(m, metric::area_measure(m), ProblemKind::Laplace), 2);
  REQUIRE_FALSE(s.last_cluster_closed);
  std::vector<double> b(static_cast<std::size_t>(m.num_vertices()), 0.0);
  CHECK_THROWS_AS(directional_derivative(m, s, metric::identity_perturbation(m), b, 1), ValidationError);
}

TEST_CASE("subgradient elements") {
  auto x = generic_torus(12);
  auto s = spectrum::solve(spectrum::assemble(x.m, x.beta, ProblemKind::Laplace), 4);
  auto inv1 = parse_functional("inv1");
  auto el = subgradient_elements(x.m, inv1, s);
  REQUIRE(el.size() == 1);
  const Eigen::Map<const Eigen::VectorXd> w(x.beta.weights.data(), x.m.num_vertices());
  CHECK(std::abs(w.dot(el[0].density)) <= 1e-12 * el[0].density.cwiseAbs().maxCoeff());

  // Ignored coordinates contribute nothing.
  auto el2 = subgradient_elements(x.m, parse_functional("inv:1,0,0"), s);
  REQUIRE(el2.size() == 1);
  CHECK((el2[0].density - el[0].density).cwiseAbs().maxCoeff() == 0.0);

  // The elements pair with (h, b) to the chain-rule derivative of E.
  std::mt19937_64 rng(31);
  auto f = parse_functional("inv:1,2,0.5");
  auto e = subgradient_elements(x.m, f, s);
  REQUIRE(e.size() == 1);
  const auto nb = spectrum::normalized(s);
  const auto d = f.dF({nb[1], nb[2], nb[3]});
  for (int trial = 0; trial < 5; ++trial) {
    const auto h = random_h(x.m.num_faces(), rng);
    const auto b = random_b(x.beta, rng);
    double chain = 0.0;
    for (int k = 1; k <= 3; ++k) chain += d[k - 1] * directional_derivative(x.m, s, h, b, k).derivative;
    const double pair = metric::tensor_inner(e[0].stress, h, x.m) +
                        Eigen::Map<const Eigen::VectorXd>(b.data(), x.m.num_vertices()).dot(e[0].density);
    CHECK(pair == doctest::Approx(chain).epsilon(1e-10));
  }
}

TEST_CASE("round sphere: the cluster-averaged stress vanishes") {
  auto m = mesh::icosphere(3);
  auto s = spectrum::solve(spectrum::assemble(m, metric::area_measure(m), ProblemKind::Laplace), 4);
  REQUIRE(s.clusters[0].size() == 3);
  auto el = subgradient_elements(m, parse_functional("inv1"), s);
  REQUIRE(el.size() == 10); // identity, 8 samples, average
  CHECK(el.front().selection == "identity");
  CHECK(el.back().selection == "cluster-average");
  const double single = metric::tensor_sup_norm(el.front().stress, m);
  const double avg = metric::tensor_sup_norm(el.back().stress, m);
  CHECK(avg < 0.05 * single);
  // Identical seeds give identical samples.
  auto again = subgradient_elements(m, parse_functional("inv1"), s);
  CHECK(again[4].density == el[4].density);
}

TEST_CASE("cluster weights") {
  auto f = parse_functional("inv:1,2");
  auto w = cluster_weights(f, std::vector<double>{10.0, 20.0});
  CHECK(w.t[0] / w.t[1] == doctest::Approx((1.0 / 100) / (2.0 / 400)));
  CHECK(std::abs(w.t[0] * 10.0 + w.t[1] * 20.0 - 1.0) <= 1e-15);
  auto one = cluster_weights(parse_functional("inv1"), std::vector<double>{7.5});
  CHECK(one.t[0] * 7.5 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(one.partials[0] == doctest::Approx(-1.0 / (7.5 * 7.5)));
  auto lg = cluster_weights(neg_log({1.0, 1.0}), std::vector<double>{3.0, 3.0});
  CHECK(lg.t[0] == doctest::Approx(1.0 / 6.0));
  CHECK(lg.t[1] == doctest::Approx(1.0 / 6.0));
  CHECK(lg.cluster_mass.size() == 1);
  CHECK(lg.cluster_mass[0] == doctest::Approx(1.0 / 3.0));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(0.5, 80.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> lb{U(rng), U(rng), U(rng)};
    std::sort(lb.begin(), lb.end());
    auto ww = cluster_weights(parse_functional("exp:1,0.5,2@0.1"), lb);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += ww.t[i] * lb[i];
    CHECK(std::abs(sum - 1.0) <= 4e-16);
    for (double t : ww.t) CHECK(t > 0.0);
  }
  CHECK_THROWS_AS(cluster_weights(f, std::vector<double>{0.0, 1.0}), ValidationError);
}
