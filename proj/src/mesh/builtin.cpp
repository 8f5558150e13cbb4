#include "eigenglue/mesh.hpp"

#include "eigenglue/error.hpp"
#include "stitch.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace eigenglue::mesh {

namespace {

constexpr double kPi = std::numbers::pi;

// Unit-torus coordinates -> ring torus in R^3 (visualization only).
Eigen::Vector3d ring_torus_point(double s, double t) {
  const double R = 2.0, r = 1.0;
  const double a = 2.0 * kPi * s, b = 2.0 * kPi * t;
  return {(R + r * std::cos(b)) * std::cos(a), (R + r * std::cos(b)) * std::sin(a), r * std::sin(b)};
}

// Minimum-image difference on the unit square torus.
Eigen::Vector2d wrap_diff(Eigen::Vector2d d) {
  for (int k = 0; k < 2; ++k) d[k] -= std::round(d[k]);
  return d;
}

} // namespace

TriSurface icosphere(int subdivisions, double radius) {
  if (subdivisions < 0) throw ValidationError("icosphere: negative subdivision count");
  if (!(radius > 0.0)) throw ValidationError("icosphere: radius must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> p = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : p) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      p.push_back((p[a] + p[b]).normalized());
      const int id = static_cast<int>(p.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> g;
    g.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      g.push_back({tri[0], a, c});
      g.push_back({tri[1], b, a});
      g.push_back({tri[2], c, b});
      g.push_back({a, b, c});
    }
    f = std::move(g);
  }
  for (auto& v : p) v *= radius;
  return TriSurface::from_positions(std::move(p), std::move(f));
}

TriSurface flat_torus(const Eigen::Vector2d& a, const Eigen::Vector2d& b, int n) {
  const double det = a.x() * b.y() - a.y() * b.x();
  if (!(std::abs(det) > 1e-12 * a.norm() * b.norm())) throw ValidationError("flat_torus: degenerate lattice basis");
  if (n < 3) throw ValidationError("flat_torus: resolution must be at least 3");
  auto id = [n](int i, int j) { return ((i % n + n) % n) * n + ((j % n + n) % n); };
  // Lattice point of grid offset (di, dj) in the plane.
  auto vec = [&](int di, int dj) -> Eigen::Vector2d { return (a * di + b * dj) / n; };
  // Split each cell along its shorter diagonal.
  const bool main_diag = (a + b).norm() <= (b - a).norm() + 1e-14;
  const bool flip = det < 0.0;

  std::vector<Face> faces;
  std::vector<FaceLengths> lengths;
  faces.reserve(2 * n * n);
  auto add = [&](std::array<std::array<int, 2>, 3> c) {
    if (flip) std::swap(c[1], c[2]);
    Face f;
    FaceLengths L;
    for (int k = 0; k < 3; ++k) {
      f[k] = id(c[k][0], c[k][1]);
      const auto& u = c[k];
      const auto& w = c[(k + 1) % 3];
      L[k] = vec(w[0] - u[0], w[1] - u[1]).norm();
    }
    faces.push_back(f);
    lengths.push_back(L);
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (main_diag) {
        add({{{i, j}, {i + 1, j}, {i + 1, j + 1}}});
        add({{{i, j}, {i + 1, j + 1}, {i, j + 1}}});
      } else {
        add({{{i, j}, {i + 1, j}, {i, j + 1}}});
        add({{{i + 1, j}, {i + 1, j + 1}, {i, j + 1}}});
      }
    }
  }
  std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pos[id(i, j)] = ring_torus_point(double(i) / n, double(j) / n);
  return TriSurface::from_face_lengths(n * n, std::move(faces), lengths, std::move(pos));
}

TriSurface unit_disk(int rings) {
  if (rings < 1) throw ValidationError("unit_disk: resolution must be at least 1");
  std::vector<Eigen::Vector3d> pos{{0.0, 0.0, 0.0}};
  std::vector<Face> faces;
  std::vector<int> prev;
  std::vector<double> prev_ang;
  for (int j = 1; j <= rings; ++j) {
    const int count = 6 * j;
    const double r = double(j) / rings;
    std::vector<int> ring(count);
    std::vector<double> ang(count);
    for (int k = 0; k < count; ++k) {
      ang[k] = 2.0 * kPi * k / count;
      ring[k] = static_cast<int>(pos.size());
      pos.emplace_back(r * std::cos(ang[k]), r * std::sin(ang[k]), 0.0);
    }
    if (j == 1) {
      for (int k = 0; k < count; ++k) faces.push_back({0, ring[k], ring[(k + 1) % count]});
    } else {
      detail::stitch_closed(prev, prev_ang, ring, ang, faces);
    }
    prev = std::move(ring);
    prev_ang = std::move(ang);
  }
  return TriSurface::from_positions(std::move(pos), std::move(faces));
}

TriSurface genus_surface(int genus, int resolution) {
  if (resolution < 1) throw ValidationError("genus_surface: resolution must be at least 1");
  if (genus < 0) throw ValidationError("genus_surface: genus must be nonnegative");
  if (genus == 0) return icosphere(resolution);
  const int n = 8 * resolution;
  TriSurface m = flat_torus({1.0, 0.0}, {0.0, 1.0}, n);
  const int extra = genus - 1;
  if (extra > 2 * resolution)
    throw ValidationError("genus_surface: genus " + std::to_string(genus) + " needs resolution >= " +
                          std::to_string((extra + 1) / 2));
  // Handles between (x, 1/4) and (x, 3/4); the one-ring of each grid vertex is removed.
  const double eps = 0.9 / n;
  std::vector<std::pair<int, int>> sites;
  for (int h = 0; h < extra; ++h) {
    const int i = static_cast<int>(std::floor((h + 0.5) * n / extra));
    sites.emplace_back(i * n + n / 4, i * n + (3 * n) / 4);
  }
  for (auto [p, q] : sites) {
    auto r = attach_handle(m, p, q, eps, 2.0, 6);
    // Later sites refer to input ids; translate through the vertex map.
    for (auto& s : sites) {
      if (s.first >= 0 && s.first < static_cast<int>(r.report.vertex_map.size())) {
        s.first = r.report.vertex_map[s.first];
        s.second = r.report.vertex_map[s.second];
      }
    }
    m = std::move(r.surface);
  }
  return m;
}

TriSurface builtin_surface(const BuiltinParams& params) {
  if (params.resolution < 1) throw ValidationError("builtin_surface: resolution must be at least 1");
  switch (params.kind) {
  case BuiltinKind::Sphere:
    return icosphere(params.resolution);
  case BuiltinKind::FlatTorus:
    return flat_torus(params.lattice_a, params.lattice_b, std::max(3, params.resolution));
  case BuiltinKind::Disk:
    return unit_disk(params.resolution);
  case BuiltinKind::Genus:
    return genus_surface(params.genus, params.resolution);
  }
  throw ValidationError("builtin_surface: unknown kind");
}

GradedTorus graded_flat_torus(const GradedTorusParams& prm) {
  const int n = prm.grid, m = prm.patch_half_cells;
  if (n < 8 || m < 1) throw ValidationError("graded_flat_torus: grid too small");
  if (!(prm.outer_radius > prm.inner_radius && prm.inner_radius > 0.0))
    throw ValidationError("graded_flat_torus: need outer_radius > inner_radius > 0");
  const double half = double(m) / n;
  if (prm.outer_radius >= half) throw ValidationError("graded_flat_torus: outer radius exceeds the patch");

  struct Patch {
    int ic, jc;
  };
  std::vector<Patch> patches;
  for (const auto& c : prm.centers) {
    const double fi = c.x() * n, fj = c.y() * n;
    const int ic = static_cast<int>(std::lround(fi)), jc = static_cast<int>(std::lround(fj));
    if (std::abs(fi - ic) > 1e-9 || std::abs(fj - jc) > 1e-9)
      throw ValidationError("graded_flat_torus: centres must be grid points");
    patches.push_back({((ic % n) + n) % n, ((jc % n) + n) % n});
  }
  auto cyc = [n](int d) { return std::abs(std::remainder(double(d), double(n))); };
  for (std::size_t a = 0; a < patches.size(); ++a)
    for (std::size_t b = a + 1; b < patches.size(); ++b)
      if (cyc(patches[a].ic - patches[b].ic) < 2 * m + 1 && cyc(patches[a].jc - patches[b].jc) < 2 * m + 1)
        throw ValidationError("graded_flat_torus: patches overlap");

  auto in_patch_cell = [&](int i, int j) { // cell with lower-left corner (i, j)
    for (const auto& P : patches) {
      const int di = ((i - P.ic) % n + n + m) % n, dj = ((j - P.jc) % n + n + m) % n;
      if (di < 2 * m && dj < 2 * m) return true;
    }
    return false;
  };
  auto strictly_inside = [&](int i, int j) {
    for (const auto& P : patches)
      if (cyc(i - P.ic) < m && cyc(j - P.jc) < m) return true;
    return false;
  };

  std::vector<Eigen::Vector2d> uv;
  std::vector<int> grid_id(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!strictly_inside(i, j)) {
        grid_id[i * n + j] = static_cast<int>(uv.size());
        uv.emplace_back(double(i) / n, double(j) / n);
      }
  auto gid = [&](int i, int j) { return grid_id[((i % n + n) % n) * n + ((j % n + n) % n)]; };

  std::vector<Face> faces;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (in_patch_cell(i, j)) continue;
      faces.push_back({gid(i, j), gid(i + 1, j), gid(i + 1, j + 1)});
      faces.push_back({gid(i, j), gid(i + 1, j + 1), gid(i, j + 1)});
    }

  // Ring radii: pure circles at outer * q^s, blend rings between the square and the first circle.
  const double q = std::pow(2.0, -1.0 / prm.rings_per_halving);
  std::vector<double> radii;
  for (double r = prm.outer_radius; r >= prm.inner_radius * (1.0 - 1e-12); r *= q) radii.push_back(r);
  const int n_blend = std::max(1, static_cast<int>(std::lround(std::log(half / prm.outer_radius) / -std::log(q))));

  std::vector<int> centres;
  for (const auto& P : patches) {
    // Square loop, counter-clockwise from offset (m, 0).
    std::vector<std::array<int, 2>> sq;
    for (int d = 0; d < m; ++d) sq.push_back({m, d});
    for (int d = m; d > -m; --d) sq.push_back({d, m});
    for (int d = m; d > -m; --d) sq.push_back({-m, d});
    for (int d = -m; d < m; ++d) sq.push_back({d, -m});
    for (int d = -m; d < 0; ++d) sq.push_back({m, d});
    const int N = static_cast<int>(sq.size());
    std::vector<int> outer(N);
    std::vector<double> outer_ang(N), ang(N);
    std::vector<Eigen::Vector2d> sq_off(N);
    for (int k = 0; k < N; ++k) {
      outer[k] = gid(P.ic + sq[k][0], P.jc + sq[k][1]);
      sq_off[k] = Eigen::Vector2d(sq[k][0], sq[k][1]) / n;
      outer_ang[k] = std::atan2(sq_off[k].y(), sq_off[k].x());
      ang[k] = 2.0 * kPi * k / N;
    }
    const Eigen::Vector2d c(double(P.ic) / n, double(P.jc) / n);
    auto add_ring = [&](auto&& offset_of) {
      std::vector<int> ring(N);
      for (int k = 0; k < N; ++k) {
        ring[k] = static_cast<int>(uv.size());
        uv.push_back(c + offset_of(k));
      }
      return ring;
    };
    std::vector<int> prev = outer;
    std::vector<double> prev_ang = outer_ang;
    // Walk inward; stitch with the inner ring as `lower` so faces come out counter-clockwise.
    auto descend = [&](const std::vector<int>& ring) {
      detail::stitch_closed(ring, ang, prev, prev_ang, faces);
      prev = ring;
      prev_ang = ang;
    };
    for (int b = 1; b <= n_blend; ++b) {
      const double t = double(b) / (n_blend + 1);
      descend(add_ring([&](int k) -> Eigen::Vector2d {
        const Eigen::Vector2d circ = radii[0] * Eigen::Vector2d(std::cos(ang[k]), std::sin(ang[k]));
        return (1.0 - t) * sq_off[k] + t * circ;
      }));
    }
    for (double r : radii)
      descend(add_ring([&](int k) -> Eigen::Vector2d { return r * Eigen::Vector2d(std::cos(ang[k]), std::sin(ang[k])); }));
    const int centre = static_cast<int>(uv.size());
    uv.push_back(c);
    for (int k = 0; k < N; ++k) faces.push_back({centre, prev[k], prev[(k + 1) % N]});
    centres.push_back(centre);
  }

  for (auto& p : uv)
    for (int k = 0; k < 2; ++k) p[k] -= std::floor(p[k]);
  std::vector<FaceLengths> lengths;
  lengths.reserve(faces.size());
  for (const auto& f : faces) {
    FaceLengths L;
    for (int k = 0; k < 3; ++k) L[k] = wrap_diff(uv[f[(k + 1) % 3]] - uv[f[k]]).norm();
    lengths.push_back(L);
  }
  std::vector<Eigen::Vector3d> pos;
  pos.reserve(uv.size());
  for (const auto& p : uv) pos.push_back(ring_torus_point(p.x(), p.y()));
  return {TriSurface::from_face_lengths(static_cast<int>(uv.size()), std::move(faces), lengths, std::move(pos)),
          std::move(centres)};
}

TriSurface graded_flat_disk(double radius, double inner_radius, int ring_vertices, int rings_per_halving) {
  if (!(radius > inner_radius && inner_radius > 0.0)) throw ValidationError("graded_flat_disk: need radius > inner_radius > 0");
  if (ring_vertices < 6 || rings_per_halving < 1) throw ValidationError("graded_flat_disk: resolution too coarse");
  const int N = ring_vertices;
  const double q = std::pow(2.0, -1.0 / rings_per_halving);
  std::vector<Eigen::Vector3d> pos{{0.0, 0.0, 0.0}};
  std::vector<Face> faces;
  std::vector<double> ang(N);
  for (int k = 0; k < N; ++k) ang[k] = 2.0 * kPi * k / N;
  std::vector<int> prev;
  for (double r = radius; r >= inner_radius * (1.0 - 1e-12); r *= q) {
    std::vector<int> ring(N);
    for (int k = 0; k < N; ++k) {
      ring[k] = static_cast<int>(pos.size());
      pos.emplace_back(r * std::cos(ang[k]), r * std::sin(ang[k]), 0.0);
    }
    if (!prev.empty()) detail::stitch_closed(ring, ang, prev, ang, faces);
    prev = std::move(ring);
  }
  for (int k = 0; k < N; ++k) faces.push_back({0, prev[k], prev[(k + 1) % N]});
  return TriSurface::from_positions(std::move(pos), std::move(faces));
}

} // namespace eigenglue::mesh
