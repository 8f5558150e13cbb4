#include "eigenglue/asymptotics.hpp"
#include "eigenglue/error.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace eigenglue;
using namespace eigenglue::asymptotics;

namespace {

constexpr double kPi = std::numbers::pi;

int nearest_boundary_vertex(const mesh::TriSurface& m, double angle) {
  const auto& P = *m.positions();
  int best = -1;
  double bd = 1e300;
  for (int v : m.boundary_loops().front()) {
    const double d = std::abs(std::remainder(std::atan2(P[v].y(), P[v].x()) - angle, 2 * kPi));
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

const SweepRecord& torus_sweep() {
  static const SweepRecord rec = [] {
    auto gt = mesh::graded_flat_torus({});
    HandleSweepOptions o;
    o.jobs = 3;
    return handle_deficit_sweep(gt.surface, gt.center_vertices[0], gt.center_vertices[1],
                                {0.1, 0.05, 0.025, 0.0125, 0.00625}, o);
  }();
  return rec;
}

} // namespace

TEST_CASE("log-log fits") {
  std::vector<double> x, y;
  for (double e : {0.1, 0.05, 0.02, 0.01}) {
    x.push_back(e);
    y.push_back(3.0 * e * e);
  }
  auto f = fit_loglog(x, y);
  CHECK(f.points == 4);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.slope_high - f.slope_low < 1e-9);
  // Noisy data: the interval covers the true slope in most draws.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 0.05);
  int covered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> yn;
    for (double e : x) yn.push_back(e * e * std::exp(N(rng)));
    auto g = fit_loglog(x, yn);
    covered += g.slope_low <= 2.0 && 2.0 <= g.slope_high;
  }
  CHECK(covered >= 180);
  // Nonpositive values are skipped.
  CHECK(fit_loglog({1.0, 2.0, 3.0}, {-1.0, 2.0, 4.0}).points == 2);
  CHECK_FALSE(fit_loglog({1.0}, {1.0}).valid());
}

TEST_CASE("Neumann spectrum") {
  // First nonzero free-boundary eigenvalue of the unit disk: the square of the first zero of J_1'.
  const double jp11 = 1.8411837813406593;
  auto s = neumann_spectrum(mesh::unit_disk(24), 3);
  CHECK(s.eigenvalues[0] == 0.0);
  CHECK(s.eigenvalues[1] == doctest::Approx(jp11 * jp11).epsilon(0.02));
  CHECK(s.clusters[0].size() == 2);
  CHECK_THROWS_AS(neumann_spectrum(mesh::icosphere(1), 3), ValidationError);

  // Large holes pull mu_1 below lambda_1 of the torus.
  auto gt = mesh::graded_flat_torus({});
  auto ex = mesh::excise_disks(gt.surface, gt.center_vertices[0], gt.center_vertices[1], 0.1);
  auto sn = neumann_spectrum(ex.surface, 2);
  CHECK(std::isfinite(sn.eigenvalues[1]));
  CHECK(sn.eigenvalues[1] >= 0.0);
  CHECK(sn.eigenvalues[1] < 4 * kPi * kPi);
}

TEST_CASE("handle sweep on the flat torus") {
  const auto& r = torus_sweep();
  REQUIRE(r.points.size() == 5);
  for (const auto& pt : r.points) {
    REQUIRE(pt.ok);
    CHECK(pt.genus == 2);
    CHECK(pt.neck_rows >= 8);
    CHECK(pt.max_residual <= 1e-8);
    CHECK(pt.orthonormality_defect <= 1e-10);
    CHECK(pt.h_neck < pt.eps);
  }
  for (std::size_t i = 1; i < r.points.size(); ++i)
    CHECK(std::abs(r.points[i].deficit[0]) < std::abs(r.points[i - 1].deficit[0]));
  CHECK(r.lower_deficit.slope >= 1.5);
  CHECK(r.lower_deficit.slope <= 2.5);
  CHECK(r.lower_deficit.slope_low <= 2.0);
  CHECK(r.neumann_holds);
  CHECK(r.neumann_C > 0.0);

  // Upper deviation of lambda_4 shrinks with 1 / ln(1/eps).
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const double dev = r.points[i].glued[3] - r.base[3];
    CHECK(dev > 0.0);
    if (i > 0) CHECK(dev < r.points[i - 1].glued[3] - r.base[3]);
  }
  CHECK(r.upper_deviation.slope > 0.0);

  // The sup norm of phi_1 grows more slowly than sqrt(ln(1/eps)).
  CHECK(r.sup_growth.slope <= 0.75);
  for (const auto& pt : r.points) CHECK(pt.sup_ratio <= 2.0 * std::sqrt(std::log(1.0 / pt.eps)));
}

TEST_CASE("handle sweep: determinism, output and per-point failures") {
  auto gt = mesh::graded_flat_torus({});
  const int p = gt.center_vertices[0], q = gt.center_vertices[1];
  HandleSweepOptions o;
  o.k = 3;
  o.upper_index = 3;
  auto a = handle_deficit_sweep(gt.surface, p, q, {0.3, 0.05, 0.025}, o);
  o.jobs = 3;
  auto b = handle_deficit_sweep(gt.surface, p, q, {0.3, 0.05, 0.025}, o);
  CHECK(to_json(a) == to_json(b));
  CHECK(sweep_csv(a) == sweep_csv(b));
  CHECK_FALSE(a.points[0].ok);
  CHECK_FALSE(a.points[0].error.empty());
  CHECK(a.points[1].ok);
  CHECK(a.points[2].ok);
  const auto csv = sweep_csv(a);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("eps,ln_eps,ok,", 0) == 0);
  CHECK(to_json(a).find("\"lower_deficit_vs_eps\"") != std::string::npos);

  CHECK_THROWS_AS(handle_deficit_sweep(gt.surface, p, q, {0.05, 0.1}, o), ValidationError);
  CHECK_THROWS_AS(handle_deficit_sweep(gt.surface, p, q, {}, o), ValidationError);
  o.min_neck_rows = 100;
  auto c = handle_deficit_sweep(gt.surface, p, q, {0.05}, o);
  CHECK_FALSE(c.points[0].ok);
  CHECK(c.points[0].error.find("rows") != std::string::npos);
}

TEST_CASE("log cutoff capacity") {
  std::vector<double> energies;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    auto d = mesh::graded_flat_disk(0.5, eps / 4, 32, 4);
    auto c = cutoff_capacity(d, 0, eps);
    CHECK(c.annulus_rings >= 3);
    CHECK(c.energy_outside == 0.0);
    // Same energy through the assembled stiffness.
    const Eigen::VectorXd eta = Eigen::Map<const Eigen::VectorXd>(c.eta.data(), d.num_vertices());
    CHECK(eta.dot(spectrum::stiffness(d) * eta) == doctest::Approx(c.energy).epsilon(1e-12));
    energies.push_back(c.energy);
    if (eps == 1e-4) {
      CHECK(c.analytic == doctest::Approx(4 * kPi / std::log(1e4)).epsilon(1e-15));
      CHECK(c.energy == doctest::Approx(c.analytic).epsilon(0.10));
    }
  }
  CHECK(energies[1] < energies[0]);
  CHECK(energies[2] < energies[1]);

  auto coarse = mesh::graded_flat_disk(0.5, 0.05, 8, 1);
  CHECK_THROWS_AS(cutoff_capacity(coarse, 0, 1e-2), ValidationError);
  CHECK_THROWS_AS(cutoff_capacity(coarse, 0, 1.5), ValidationError);
}

TEST_CASE("harmonic extension ratio") {
  for (int k = 1; k <= 5; ++k) {
    double prev = 0.0;
    for (double l : {1.0, 2.0, 3.0, 5.0}) {
      auto r = harmonic_extension_ratio(k, l);
      CHECK(std::abs(r.ratio - std::tanh(k * l / 2)) <= 1e-3);
      CHECK(r.ratio >= 1.0 - 4.0 * std::exp(-l));
      CHECK(r.disk_energy == doctest::Approx(k).epsilon(1e-3));
      CHECK(r.ratio > prev);
      prev = r.ratio;
    }
  }
  CHECK(harmonic_extension_ratio(1, 3.0).ratio == doctest::Approx(0.90515).epsilon(1e-3));
  CHECK_THROWS_AS(harmonic_extension_ratio(5, 3.0, 39), ValidationError);
  CHECK_NOTHROW(harmonic_extension_ratio(5, 3.0, 40));
  CHECK_THROWS_AS(harmonic_extension_ratio(0, 3.0), ValidationError);
  CHECK_THROWS_AS(harmonic_extension_ratio(1, 0.0), ValidationError);
}

TEST_CASE("strip sweep on the unit disk") {
  auto d = mesh::unit_disk(24);
  const int p = nearest_boundary_vertex(d, 0.0), q = nearest_boundary_vertex(d, kPi);
  auto r = strip_deficit_sweep(d, p, q, {0.2, 0.1, 0.05, 0.025});
  CHECK(r.base[0] == doctest::Approx(1.0).epsilon(0.01));
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& pt = r.points[i];
    REQUIRE(pt.ok);
    CHECK(std::abs(pt.boundary_length - pt.expected_boundary_length) <= 1e-12);
    CHECK(pt.max_residual <= 1e-8);
    if (i > 0) CHECK(std::abs(pt.deficit[0]) < std::abs(r.points[i - 1].deficit[0]));
  }
  CHECK(r.strip_rate.valid());
  CHECK(r.strip_rate.slope >= 1.0);
  CHECK_THROWS_AS(strip_deficit_sweep(mesh::icosphere(1), 0, 1, {0.1}), ValidationError);
  CHECK(sweep_csv(r).find("neumann") == std::string::npos);
}
