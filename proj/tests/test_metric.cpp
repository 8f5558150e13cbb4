#include "eigenglue/error.hpp"
#include "eigenglue/metric.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace eigenglue;
using namespace eigenglue::metric;
using mesh::TriSurface;

namespace {

// Brute-force oracle: extreme ratios g2(v,v)/g1(v,v) over sampled directions.
double sampled_face_distance(const mesh::FaceLengths& a, const mesh::FaceLengths& b) {
  const auto P = face_chart(a), Q = face_chart(b);
  // Linear map taking the g1 chart to the g2 chart, corner by corner.
  Eigen::Matrix2d E1, E2;
  E1 << P[1] - P[0], P[2] - P[0];
  E2 << Q[1] - Q[0], Q[2] - Q[0];
  const Eigen::Matrix2d T = E2 * E1.inverse();
  double rmax = 0.0, rmin = 1e300;
  for (int i = 0; i < 200000; ++i) {
    const double th = std::numbers::pi * i / 200000;
    const Eigen::Vector2d v(std::cos(th), std::sin(th));
    const double r = (T * v).squaredNorm();
    rmax = std::max(rmax, r);
    rmin = std::min(rmin, r);
  }
  return std::hypot(std::log(rmax), std::log(1.0 / rmin));
}

TriSurface random_conformal(const TriSurface& m, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> U(-amp, amp);
  ConformalFactor u;
  for (int v = 0; v < m.num_vertices(); ++v) u.u.push_back(U(rng));
  return apply_conformal(m, u);
}

MetricPerturbation random_tensor(int faces, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  MetricPerturbation h;
  for (int f = 0; f < faces; ++f) h.h.push_back({U(rng), U(rng), U(rng)});
  return h;
}

} // namespace

TEST_CASE("distance of a metric to itself and to a uniform rescaling") {
  auto m = mesh::flat_torus({1, 0}, {0.2, 1.1}, 6);
  CHECK(metric_distance(m, m) == doctest::Approx(0.0));
  for (double c : {0.5, 1.3, 3.0}) {
    std::vector<double> L(m.edge_lengths());
    for (double& l : L) l *= c;
    auto m2 = mesh::with_edge_lengths(m, L);
    const double d = metric_distance(m, m2);
    CHECK(d == doctest::Approx(2.0 * std::sqrt(2.0) * std::abs(std::log(c))).epsilon(1e-12));
    CHECK(d == doctest::Approx(sampled_face_distance(m.face_lengths(0), m2.face_lengths(0))).epsilon(1e-6));
  }
}

TEST_CASE("anisotropic stretch of one face by 2") {
  std::vector<Eigen::Vector3d> p{{0, 0, 0}, {1, 0, 0}, {0.3, 0.8, 0}};
  auto g1 = TriSurface::from_positions(p, {{0, 1, 2}});
  for (auto& x : p) x.x() *= 2.0;
  auto g2 = TriSurface::from_positions(p, {{0, 1, 2}});
  CHECK(metric_distance(g1, g2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(metric_distance(g1, g2) == doctest::Approx(sampled_face_distance(g1.face_lengths(0), g2.face_lengths(0))).epsilon(1e-6));
  CHECK_THROWS_AS(metric_distance(g1, mesh::flat_torus({1, 0}, {0, 1}, 3)), ValidationError);
}

TEST_CASE("property: distance is a pseudometric on random triples") {
  std::mt19937_64 rng(3);
  auto base = mesh::flat_torus({1, 0}, {0.4, 0.9}, 5);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_conformal(base, rng, 0.3), b = random_conformal(base, rng, 0.3), c = random_conformal(base, rng, 0.3);
    const double ab = metric_distance(a, b), ba = metric_distance(b, a), bc = metric_distance(b, c), ac = metric_distance(a, c);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(metric_distance(a, a) == 0.0);
  }
}

TEST_CASE("conformal factors act on edge lengths") {
  auto m = mesh::flat_torus({1, 0}, {0, 1}, 6);
  ConformalFactor zero{std::vector<double>(static_cast<std::size_t>(m.num_vertices()), 0.0), fingerprint(m)};
  CHECK(apply_conformal(m, zero).edge_lengths() == m.edge_lengths());
  const double c = 1.7;
  ConformalFactor lc{std::vector<double>(static_cast<std::size_t>(m.num_vertices()), std::log(c)), ""};
  auto s = apply_conformal(m, lc);
  for (int e = 0; e < m.num_edges(); ++e) CHECK(s.edge_length(e) == doctest::Approx(c * m.edge_length(e)).epsilon(1e-14));
  CHECK(s.total_area() == doctest::Approx(c * c).epsilon(1e-13));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-0.2, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    ConformalFactor u1, u2, u12;
    for (int v = 0; v < m.num_vertices(); ++v) {
      u1.u.push_back(U(rng));
      u2.u.push_back(U(rng));
      u12.u.push_back(u1.u.back() + u2.u.back());
    }
    auto one = apply_conformal(m, u12), two = apply_conformal(apply_conformal(m, u1), u2);
    for (int e = 0; e < m.num_edges(); ++e)
      CHECK(std::abs(one.edge_length(e) - two.edge_length(e)) <= 1e-12 * one.edge_length(e));
  }
  // A violent factor breaks a triangle inequality and is rejected.
  ConformalFactor wild{std::vector<double>(static_cast<std::size_t>(m.num_vertices()), 0.0), ""};
  wild.u[0] = 8.0;
  CHECK_THROWS_AS(apply_conformal(m, wild), ValidationError);
}

TEST_CASE("tensor inner products") {
  auto m = mesh::icosphere(2);
  std::mt19937_64 rng(7);
  auto h = random_tensor(m.num_faces(), rng);
  MetricPerturbation zero{std::vector<std::array<double, 3>>(static_cast<std::size_t>(m.num_faces()), {0, 0, 0})};
  CHECK(tensor_inner(h, zero, m) == 0.0);
  auto g = identity_perturbation(m);
  CHECK(tensor_inner(g, g, m) == doctest::Approx(2.0 * m.total_area()).epsilon(1e-13));
  MetricPerturbation tf{std::vector<std::array<double, 3>>(static_cast<std::size_t>(m.num_faces()), {1, 0, -1})};
  CHECK(std::abs(tensor_inner(tf, g, m)) < 1e-15);
  CHECK(tensor_sup_norm(g, m) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("property: inner product is frame invariant") {
  auto m = mesh::flat_torus({1, 0}, {0.5, 0.8}, 7);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> A(0.0, 2 * std::numbers::pi);
  for (int trial = 0; trial < 25; ++trial) {
    auto h1 = random_tensor(m.num_faces(), rng), h2 = random_tensor(m.num_faces(), rng);
    std::vector<double> ang;
    for (int f = 0; f < m.num_faces(); ++f) ang.push_back(A(rng));
    const double a = tensor_inner(h1, h2, m);
    const double b = tensor_inner(rotate_frames(h1, ang), rotate_frames(h2, ang), m);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    CHECK(tensor_sup_norm(rotate_frames(h1, ang), m) == doctest::Approx(tensor_sup_norm(h1, m)).epsilon(1e-12));
  }
}

TEST_CASE("measures") {
  auto s = mesh::icosphere(3);
  CHECK(area_measure(s).total() == doctest::Approx(s.total_area()).epsilon(1e-13));
  auto obtuse = mesh::flat_torus({1, 0}, {0.9, 0.2}, 5);
  CHECK(area_measure(obtuse).total() == doctest::Approx(obtuse.total_area()).epsilon(1e-13));
  auto d = mesh::unit_disk(5);
  CHECK(boundary_measure(d).total() == doctest::Approx(d.boundary_length()).epsilon(1e-13));
  CHECK_THROWS_AS(boundary_measure(s), ValidationError);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  ConformalFactor u{{}, fingerprint(s)};
  for (int v = 0; v < s.num_vertices(); ++v) u.u.push_back(U(rng));
  auto beta = density_from_conformal(s, u);
  auto back = conformal_from_density(s, beta);
  for (int v = 0; v < s.num_vertices(); ++v) CHECK(back.u[v] == doctest::Approx(u.u[v]).epsilon(1e-12));
  CHECK(density_from_json(to_json(beta)).weights == beta.weights);
  CHECK(conformal_from_json(to_json(u)).u == u.u);

  DensityMeasure bad{Support::Interior, std::vector<double>(static_cast<std::size_t>(s.num_vertices()), 0.0)};
  CHECK_THROWS_AS(validate(bad, s), ValidationError);
  bad.weights[0] = -1.0;
  CHECK_THROWS_AS(validate(bad, s), ValidationError);
}
