#include "eigenglue/error.hpp"
#include "eigenglue/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace eigenglue;
using namespace eigenglue::mesh;

namespace {

constexpr double kPi = std::numbers::pi;

TriSurface from_off(const std::string& text) {
  std::istringstream in(text);
  return read_off(in);
}

void check_invariants(const TriSurface& m) {
  for (int f = 0; f < m.num_faces(); ++f) {
    auto L = m.face_lengths(f);
    CHECK(L[0] < L[1] + L[2]);
    CHECK(L[1] < L[2] + L[0]);
    CHECK(L[2] < L[0] + L[1]);
  }
  std::set<std::pair<int, int>> half;
  for (const auto& F : m.faces())
    for (int k = 0; k < 3; ++k) CHECK(half.insert({F[k], F[(k + 1) % 3]}).second);
  for (const auto& ef : m.edge_faces()) CHECK(ef[0] >= 0);
  if (m.is_closed()) CHECK((2 * m.num_components() - m.euler_characteristic()) % 2 == 0);
}

TriSurface disjoint_union(const TriSurface& a, const TriSurface& b) {
  std::vector<Face> faces = a.faces();
  std::vector<FaceLengths> L;
  for (int f = 0; f < a.num_faces(); ++f) L.push_back(a.face_lengths(f));
  for (int f = 0; f < b.num_faces(); ++f) {
    Face F = b.faces()[f];
    for (int& v : F) v += a.num_vertices();
    faces.push_back(F);
    L.push_back(b.face_lengths(f));
  }
  std::vector<Eigen::Vector3d> pos = *a.positions();
  for (auto p : *b.positions()) pos.push_back(p + Eigen::Vector3d(3.0, 0.0, 0.0));
  return TriSurface::from_face_lengths(a.num_vertices() + b.num_vertices(), faces, L, pos);
}

int nearest_boundary_vertex(const TriSurface& m, double angle) {
  int best = -1;
  double bd = 1e300;
  for (int v : m.boundary_loops()[0]) {
    const auto& p = (*m.positions())[v];
    const double d = std::abs(std::remainder(std::atan2(p.y(), p.x()) - angle, 2 * kPi));
    if (d < bd) bd = d, best = v;
  }
  return best;
}

} // namespace

TEST_CASE("tetrahedron is a closed genus-0 surface") {
  auto m = from_off("OFF\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n");
  CHECK(m.euler_characteristic() == 2);
  CHECK(m.is_closed());
  CHECK(m.genus() == 0);
  check_invariants(m);
}

TEST_CASE("single triangle has one boundary loop of three vertices") {
  auto m = from_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  REQUIRE(m.num_boundary_components() == 1);
  CHECK(m.boundary_loops()[0].size() == 3);
  CHECK(m.boundary_loops()[0] == std::vector<int>{0, 1, 2});
}

TEST_CASE("loader rejects broken input") {
  CHECK_THROWS_AS(from_off("OFF\n3 1 0\n0 0 0\n1 0 0\n"), ValidationError);
  CHECK_THROWS_AS(from_off("OFF\n3 0 0\n0 0 0\n1 0 0\n0 1 0\n"), ValidationError);
  // Three faces on one edge.
  CHECK_THROWS_WITH_AS(
      from_off("OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\n3 0 1 2\n3 1 0 3\n3 0 1 4\n"),
      doctest::Contains("non-manifold"), ValidationError);
  // Two faces traversing a shared edge in the same direction.
  CHECK_THROWS_WITH_AS(from_off("OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n3 0 1 2\n3 0 1 3\n"),
                       doctest::Contains("non-orientable"), ValidationError);
  // Coincident vertices give a zero-length edge.
  CHECK_THROWS_WITH_AS(from_off("OFF\n3 1 0\n0 0 0\n0 0 0\n0 1 0\n3 0 1 2\n"), doctest::Contains("degenerate"),
                       ValidationError);
}

TEST_CASE("OBJ reader fan-triangulates polygons and accepts slashes") {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n");
  auto m = read_obj(in);
  CHECK(m.num_faces() == 2);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("icosphere counts and area") {
  auto s2 = icosphere(2);
  CHECK(s2.num_vertices() == 162);
  CHECK(s2.genus() == 0);
  CHECK(std::abs(s2.total_area() - 4 * kPi) / (4 * kPi) < 0.02);
  auto s3 = builtin_surface({BuiltinKind::Sphere, 3});
  CHECK(s3.num_vertices() == 642);
  check_invariants(s3);
}

TEST_CASE("flat tori are exactly flat") {
  auto sq = flat_torus({1, 0}, {0, 1}, 7);
  CHECK(sq.euler_characteristic() == 0);
  CHECK(std::abs(sq.total_area() - 1.0) < 1e-13);
  auto hex = flat_torus({1, 0}, {0.5, std::sqrt(3.0) / 2}, 9);
  CHECK(std::abs(hex.total_area() - std::sqrt(3.0) / 2) < 1e-13);
  // Hexagonal cells split along the short diagonal: all edges have length 1/n.
  for (double l : hex.edge_lengths()) CHECK(l == doctest::Approx(1.0 / 9).epsilon(1e-12));
  CHECK_THROWS_AS(flat_torus({1, 0}, {2, 0}, 5), ValidationError);
}

TEST_CASE("property: random lattices give valid tori of area |det|") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector2d a(1.0 + 0.3 * U(rng), 0.3 * U(rng)), b(0.3 * U(rng), 1.0 + 0.3 * U(rng));
    if (trial % 2) std::swap(a, b); // negative orientation half the time
    const int n = 3 + static_cast<int>(rng() % 6);
    auto m = flat_torus(a, b, n);
    check_invariants(m);
    CHECK(m.genus() == 1);
    CHECK(std::abs(m.total_area() - std::abs(a.x() * b.y() - a.y() * b.x())) < 1e-12);
  }
}

TEST_CASE("unit disk and genus surfaces") {
  auto d = unit_disk(6);
  CHECK(d.num_boundary_components() == 1);
  CHECK(d.euler_characteristic() == 1);
  CHECK(d.boundary_loops()[0].size() == 36);
  for (int g : {0, 1, 2, 3}) {
    auto m = genus_surface(g, 2);
    check_invariants(m);
    CHECK(m.is_closed());
    CHECK(m.genus() == g);
  }
  CHECK_THROWS_AS(genus_surface(8, 1), ValidationError);
}

TEST_CASE("canonical JSON round-trips and is deterministic") {
  auto m = flat_torus({1, 0}, {0.3, 0.9}, 5);
  const auto a = to_canonical_json(m);
  const auto back = from_canonical_json(a);
  CHECK(to_canonical_json(back) == a);
  CHECK(to_canonical_json(flat_torus({1, 0}, {0.3, 0.9}, 5)) == a);
  std::ostringstream off;
  write_off(off, icosphere(1));
  CHECK(from_off(off.str()).num_vertices() == 42);
}

TEST_CASE("handle on a sphere raises the genus") {
  auto m = icosphere(3);
  const int p = 0, q = 3; // opposite icosahedron vertices
  auto [out, rep] = attach_handle(m, p, q, 0.3, 2.0, 12);
  check_invariants(out);
  CHECK(out.euler_characteristic() == m.euler_characteristic() - 2);
  CHECK(out.genus() == 1);
  CHECK(out.is_closed());
  const int Vins = rep.inserted_vertex_end - rep.inserted_vertex_begin;
  const int Fins = rep.inserted_face_end - rep.inserted_face_begin;
  CHECK(out.num_vertices() == m.num_vertices() - static_cast<int>(rep.removed_vertices.size()) + Vins);
  CHECK(out.num_faces() == m.num_faces() - static_cast<int>(rep.removed_faces.size()) + Fins);
  CHECK(rep.seam_p.size() == rep.seam_q.size());
  CHECK(rep.n_rows >= 2);
  CHECK(rep.vertex_map[p] == -1);
}

TEST_CASE("handle on a graded torus: cylinder area and deterministic output") {
  auto gt = graded_flat_torus({});
  check_invariants(gt.surface);
  CHECK(std::abs(gt.surface.total_area() - 1.0) < 1e-12);
  const int p = gt.center_vertices[0], q = gt.center_vertices[1];
  for (double eps : {0.1, 0.025, 0.00625}) {
    auto r = attach_handle(gt.surface, p, q, eps, 3.0, 48);
    CHECK(r.surface.genus() == 2);
    const double analytic = 2 * kPi * 3.0 * eps * eps;
    CHECK(std::abs(r.report.area_added - analytic) / analytic < 0.01);
    CHECK(r.report.rim_p.size() == 48);
    CHECK(!r.report.one_ring_fallback_p);
    if (eps == 0.025) CHECK(to_canonical_json(attach_handle(gt.surface, p, q, eps, 3.0, 48).surface) ==
                            to_canonical_json(r.surface));
  }
  // The rim at eps is the ring of that radius: graph distance equals eps on all of it.
  const auto dist = graph_distances(gt.surface, p);
  auto r = excise_disks(gt.surface, p, q, 0.025);
  for (int v : r.report.rim_p) {
    const int orig = static_cast<int>(std::find(r.report.vertex_map.begin(), r.report.vertex_map.end(), v) -
                                      r.report.vertex_map.begin());
    CHECK(dist[orig] == doctest::Approx(0.025).epsilon(1e-12));
  }
  CHECK_THROWS_AS(attach_handle(gt.surface, p, q, 0.3, 3.0, 48), ValidationError);
  CHECK_THROWS_AS(attach_handle(gt.surface, p, q, 0.05, 3.0, 2), ValidationError);
}

TEST_CASE("excised surface has two holes") {
  auto gt = graded_flat_torus({});
  auto r = excise_disks(gt.surface, gt.center_vertices[0], gt.center_vertices[1], 0.05);
  CHECK(r.surface.num_boundary_components() == 2);
  CHECK(r.surface.total_area() == doctest::Approx(1.0 - r.report.area_removed).epsilon(1e-12));
}

TEST_CASE("strip on a disk makes an annulus") {
  auto d = unit_disk(10);
  const int p = nearest_boundary_vertex(d, 0.0), q = nearest_boundary_vertex(d, kPi);
  const double eps = 0.13, l = 2.0;
  auto [out, rep] = attach_strip(d, p, q, eps, l, StripOrientation::Preserve);
  check_invariants(out);
  CHECK(out.num_boundary_components() == 2);
  CHECK(out.euler_characteristic() == d.euler_characteristic() - 1);
  CHECK(std::abs(rep.area_added - 2 * eps * l * eps) < 1e-14);
  CHECK(std::abs(out.boundary_length() - (d.boundary_length() - 4 * eps + 2 * l * eps)) < 1e-12);
  CHECK(rep.split_vertices == 4);
  CHECK(out.num_faces() == d.num_faces() - static_cast<int>(rep.removed_faces.size()) +
                               (rep.inserted_face_end - rep.inserted_face_begin));
  CHECK_THROWS_AS(attach_strip(d, p, q, eps, l, StripOrientation::Reverse), ValidationError);
  CHECK_THROWS_AS(attach_strip(d, 0, q, eps, l, StripOrientation::Preserve), ValidationError);
  CHECK_THROWS_AS(attach_strip(d, p, q, 1.7, l, StripOrientation::Preserve), ValidationError);
}

TEST_CASE("strip joining two disks, both orientations") {
  auto d = unit_disk(5);
  auto two = disjoint_union(d, d);
  const int p = nearest_boundary_vertex(d, 0.0);
  const int q = p + d.num_vertices();
  for (auto o : {StripOrientation::Preserve, StripOrientation::Reverse}) {
    auto r = attach_strip(two, p, q, 0.2, 1.0, o);
    check_invariants(r.surface);
    CHECK(r.surface.num_components() == 1);
    CHECK(r.surface.num_boundary_components() == 1);
    CHECK(r.surface.euler_characteristic() == 1);
  }
}
