#include "eigenglue/mesh.hpp"

#include "eigenglue/error.hpp"
#include "stitch.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>

namespace eigenglue::mesh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Faces whose three vertices lie within eps of the centre; the star of the
// centre when there are none.
std::vector<int> disk_faces(const TriSurface& m, int centre, double eps, bool& fallback) {
  const auto dist = graph_distances(m, centre);
  const double cut = eps * (1.0 + 1e-9);
  std::vector<int> out;
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& F = m.faces()[f];
    if (dist[F[0]] <= cut && dist[F[1]] <= cut && dist[F[2]] <= cut) out.push_back(f);
  }
  fallback = out.empty();
  if (fallback) {
    for (int f = 0; f < m.num_faces(); ++f) {
      const auto& F = m.faces()[f];
      if (F[0] == centre || F[1] == centre || F[2] == centre) out.push_back(f);
    }
  }
  return out;
}

// Checks that the face set is a topological disk; returns its boundary loop
// (region on the left) in input ids.
std::vector<int> disk_boundary(const TriSurface& m, const std::vector<int>& region, const char* which) {
  std::vector<int> local(static_cast<std::size_t>(m.num_vertices()), -1), global;
  std::vector<Face> faces;
  std::vector<FaceLengths> lengths;
  for (int f : region) {
    Face F = m.faces()[f];
    for (int& v : F) {
      if (local[v] < 0) {
        local[v] = static_cast<int>(global.size());
        global.push_back(v);
      }
      v = local[v];
    }
    faces.push_back(F);
    lengths.push_back(m.face_lengths(f));
  }
  const std::string msg = std::string("eps exceeds the injectivity scale at ") + which + " (disk not embedded)";
  try {
    auto sub = TriSurface::from_face_lengths(static_cast<int>(global.size()), faces, lengths);
    if (sub.num_components() != 1 || sub.euler_characteristic() != 1 || sub.num_boundary_components() != 1)
      throw ValidationError(msg);
    std::vector<int> loop;
    for (int v : sub.boundary_loops()[0]) loop.push_back(global[v]);
    return loop;
  } catch (const ValidationError&) {
    throw ValidationError(msg);
  }
}

struct RingFit {
  double radius = 0.0;
  std::vector<double> theta; // cumulative angle of each vertex, theta[0] = 0
  bool fitted = true;
};

// Place a closed polygon with the given chord lengths on a circle. If no
// circumscribed circle exists, fall back to angles proportional to arclength.
RingFit fit_ring(const std::vector<double>& chords) {
  const double P = std::accumulate(chords.begin(), chords.end(), 0.0);
  const double cmax = *std::max_element(chords.begin(), chords.end());
  auto total = [&](double R) {
    double s = 0.0;
    for (double c : chords) s += 2.0 * std::asin(std::min(1.0, c / (2.0 * R)));
    return s;
  };
  RingFit fit;
  const std::size_t n = chords.size();
  fit.theta.assign(n, 0.0);
  double lo = cmax / 2.0;
  if (total(lo) < kTwoPi) {
    fit.fitted = false;
    fit.radius = P / kTwoPi;
    double acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      acc += chords[i - 1];
      fit.theta[i] = kTwoPi * acc / P;
    }
    return fit;
  }
  double hi = std::max(lo, P / kTwoPi) * 2.0;
  while (total(hi) > kTwoPi) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) > kTwoPi ? lo : hi) = mid;
  }
  fit.radius = 0.5 * (lo + hi);
  for (std::size_t i = 1; i < n; ++i) fit.theta[i] = fit.theta[i - 1] + 2.0 * std::asin(std::min(1.0, chords[i - 1] / (2.0 * fit.radius)));
  return fit;
}

std::vector<double> loop_chords(const TriSurface& m, const std::vector<int>& loop) {
  std::vector<double> c(loop.size());
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const int e = m.find_edge(loop[i], loop[(i + 1) % loop.size()]);
    c[i] = m.edge_length(e);
  }
  return c;
}

struct Excision {
  std::vector<bool> face_removed;
  std::vector<bool> vertex_removed;
  std::vector<int> hole_p, hole_q; // input ids, remaining surface on the left
  SurgeryReport report;
};

Excision excise(const TriSurface& m, int p, int q, double eps) {
  if (p < 0 || q < 0 || p >= m.num_vertices() || q >= m.num_vertices()) throw ValidationError("vertex index out of range");
  if (p == q) throw ValidationError("p and q must differ");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be positive");
  Excision x;
  auto& r = x.report;
  r.eps = eps;
  const auto rp = disk_faces(m, p, eps, r.one_ring_fallback_p);
  const auto rq = disk_faces(m, q, eps, r.one_ring_fallback_q);
  std::set<int> vp, vq;
  for (int f : rp)
    for (int v : m.faces()[f]) vp.insert(v);
  for (int f : rq)
    for (int v : m.faces()[f]) {
      if (vp.count(v)) throw ValidationError("overlapping disks around p and q");
      vq.insert(v);
    }
  const auto bnd = m.boundary_vertex_mask();
  for (int v : vp)
    if (bnd[v]) throw ValidationError("disk around p reaches the surface boundary");
  for (int v : vq)
    if (bnd[v]) throw ValidationError("disk around q reaches the surface boundary");
  auto loop_p = disk_boundary(m, rp, "p");
  auto loop_q = disk_boundary(m, rq, "q");
  x.face_removed.assign(m.num_faces(), false);
  for (int f : rp) x.face_removed[f] = true;
  for (int f : rq) x.face_removed[f] = true;
  x.vertex_removed.assign(m.num_vertices(), false);
  const std::set<int> rim(loop_p.begin(), loop_p.end());
  const std::set<int> rim2(loop_q.begin(), loop_q.end());
  for (int v : vp)
    if (!rim.count(v)) x.vertex_removed[v] = true;
  for (int v : vq)
    if (!rim2.count(v)) x.vertex_removed[v] = true;
  for (int f = 0; f < m.num_faces(); ++f)
    if (x.face_removed[f]) {
      r.removed_faces.push_back(f);
      r.area_removed += m.face_area(f);
    }
  for (int v = 0; v < m.num_vertices(); ++v)
    if (x.vertex_removed[v]) r.removed_vertices.push_back(v);
  x.hole_p.assign(loop_p.rbegin(), loop_p.rend());
  x.hole_q.assign(loop_q.rbegin(), loop_q.rend());
  return x;
}

// Output skeleton: kept vertices compacted in order, kept faces in order.
struct Builder {
  std::vector<int> vmap;
  std::vector<Face> faces;
  std::vector<FaceLengths> lengths;
  std::vector<Eigen::Vector3d> pos;
  bool has_pos = false;
  int num_vertices = 0;

  Builder(const TriSurface& m, const std::vector<bool>& vertex_removed, const std::vector<bool>& face_removed) {
    vmap.assign(m.num_vertices(), -1);
    has_pos = m.positions().has_value();
    for (int v = 0; v < m.num_vertices(); ++v) {
      if (vertex_removed[v]) continue;
      vmap[v] = num_vertices++;
      if (has_pos) pos.push_back((*m.positions())[v]);
    }
    for (int f = 0; f < m.num_faces(); ++f) {
      if (face_removed[f]) continue;
      Face F = m.faces()[f];
      for (int& v : F) v = vmap[v];
      faces.push_back(F);
      lengths.push_back(m.face_lengths(f));
    }
  }

  int add_vertex(const Eigen::Vector3d& p) {
    if (has_pos) pos.push_back(p);
    return num_vertices++;
  }

  TriSurface build() {
    std::optional<std::vector<Eigen::Vector3d>> P;
    if (has_pos) P = pos;
    return TriSurface::from_face_lengths(num_vertices, faces, lengths, std::move(P));
  }
};

double faces_area(const std::vector<FaceLengths>& L, std::size_t begin) {
  double a = 0.0;
  for (std::size_t f = begin; f < L.size(); ++f) a += triangle_area(L[f][0], L[f][1], L[f][2]);
  return a;
}

} // namespace

SurgeryResult excise_disks(const TriSurface& m, int p, int q, double eps) {
  Excision x = excise(m, p, q, eps);
  Builder b(m, x.vertex_removed, x.face_removed);
  auto& r = x.report;
  r.vertex_map = b.vmap;
  r.inserted_vertex_begin = r.inserted_vertex_end = b.num_vertices;
  r.inserted_face_begin = r.inserted_face_end = static_cast<int>(b.faces.size());
  for (int v : x.hole_p) r.rim_p.push_back(b.vmap[v]);
  for (int v : x.hole_q) r.rim_q.push_back(b.vmap[v]);
  return {b.build(), std::move(r)};
}

SurgeryResult attach_handle(const TriSurface& m, int p, int q, double eps, double l, int n_theta) {
  if (!m.is_closed()) throw ValidationError("attach_handle requires a closed surface");
  if (n_theta < 3) throw ValidationError("n_theta must be at least 3");
  if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("l must be positive");
  Excision x = excise(m, p, q, eps);
  auto& r = x.report;
  r.aspect = l;
  r.n_theta = n_theta;

  // Lower ring: hole at p. Upper ring: hole at q traversed backwards.
  const std::vector<int> A = x.hole_p;
  const std::vector<int> B(x.hole_q.rbegin(), x.hole_q.rend());
  const auto cA = loop_chords(m, A), cB = loop_chords(m, B);
  const RingFit fA = fit_ring(cA), fB = fit_ring(cB);
  const double h_target = (std::accumulate(cA.begin(), cA.end(), 0.0) + std::accumulate(cB.begin(), cB.end(), 0.0)) /
                          static_cast<double>(cA.size() + cB.size());
  const double height = l * eps;
  r.n_rows = std::max(2, static_cast<int>(std::ceil(height / h_target - 1e-9)));
  const int rows = r.n_rows;

  Builder b(m, x.vertex_removed, x.face_removed);
  r.vertex_map = b.vmap;
  r.inserted_vertex_begin = b.num_vertices;
  r.inserted_face_begin = static_cast<int>(b.faces.size());

  // Frustum coordinates (radius * cos, radius * sin, height) of every tube vertex.
  std::vector<Eigen::Vector3d> chart(static_cast<std::size_t>(m.num_vertices()) + 16 * n_theta * (rows + 2));
  std::vector<std::vector<int>> rings(static_cast<std::size_t>(rows) + 1);
  std::vector<std::vector<double>> angles(static_cast<std::size_t>(rows) + 1);
  auto frustum = [](double R, double th, double s) { return Eigen::Vector3d(R * std::cos(th), R * std::sin(th), s); };
  auto embed = [&](const std::vector<int>& ring, int k) -> Eigen::Vector3d {
    return b.has_pos ? (*m.positions())[ring[static_cast<std::size_t>(k) % ring.size()]] : Eigen::Vector3d::Zero();
  };
  for (std::size_t k = 0; k < A.size(); ++k) {
    rings[0].push_back(b.vmap[A[k]]);
    chart[b.vmap[A[k]]] = frustum(fA.radius, fA.theta[k], 0.0);
  }
  for (std::size_t k = 0; k < B.size(); ++k) {
    rings[rows].push_back(b.vmap[B[k]]);
    chart[b.vmap[B[k]]] = frustum(fB.radius, fB.theta[k], height);
  }
  angles[0] = fA.theta;
  angles[rows] = fB.theta;
  const bool columns = static_cast<int>(A.size()) == n_theta && static_cast<int>(B.size()) == n_theta;
  for (int row = 1; row < rows; ++row) {
    const double t = double(row) / rows;
    const double R = (1.0 - t) * fA.radius + t * fB.radius;
    for (int k = 0; k < n_theta; ++k) {
      const double th = columns ? (1.0 - t) * fA.theta[k] + t * fB.theta[k] : kTwoPi * k / n_theta;
      const int ka = columns ? k : static_cast<int>(std::lround(double(k) * A.size() / n_theta));
      const int kb = columns ? k : static_cast<int>(std::lround(double(k) * B.size() / n_theta));
      const int v = b.add_vertex((1.0 - t) * embed(A, ka) + t * embed(B, kb));
      rings[row].push_back(v);
      angles[row].push_back(th);
      if (static_cast<std::size_t>(v) >= chart.size()) chart.resize(2 * chart.size());
      chart[v] = frustum(R, th, t * height);
    }
  }
  r.inserted_vertex_end = b.num_vertices;

  std::vector<Face> tube;
  for (int row = 0; row < rows; ++row) detail::stitch_closed(rings[row], angles[row], rings[row + 1], angles[row + 1], tube);

  // Rim edges keep their surface lengths; everything else comes from the frustum.
  auto rim_length = [&](const std::vector<int>& ring, const std::vector<double>& chords, int u, int v) -> double {
    const int n = static_cast<int>(ring.size());
    for (int k = 0; k < n; ++k) {
      const int a = ring[k], c = ring[(k + 1) % n];
      if ((a == u && c == v) || (a == v && c == u)) return chords[k];
    }
    return -1.0;
  };
  for (const auto& F : tube) {
    FaceLengths L;
    for (int k = 0; k < 3; ++k) {
      const int u = F[k], v = F[(k + 1) % 3];
      double len = -1.0;
      if (u < r.inserted_vertex_begin && v < r.inserted_vertex_begin) {
        len = rim_length(rings[0], cA, u, v);
        if (len < 0.0) len = rim_length(rings[rows], cB, u, v);
      }
      L[k] = len > 0.0 ? len : (chart[u] - chart[v]).norm();
    }
    b.faces.push_back(F);
    b.lengths.push_back(L);
  }
  r.inserted_face_end = static_cast<int>(b.faces.size());
  r.area_added = faces_area(b.lengths, static_cast<std::size_t>(r.inserted_face_begin));
  r.rim_p = rings[0];
  r.rim_q = rings[rows];
  if (columns) {
    r.seam_p = rings[0];
    r.seam_q = rings[rows];
  } else {
    r.seam_p = rings[1];
    r.seam_q = rings[rows - 1];
  }
  return {b.build(), std::move(r)};
}

namespace {

// Mutable face soup used by the strip construction.
struct Soup {
  int num_vertices = 0;
  std::vector<Face> faces;
  std::vector<FaceLengths> lengths;
  std::vector<int> origin; // input face id, -1 for new faces
  std::vector<Eigen::Vector3d> pos;
  bool has_pos = false;
  std::vector<int> retired; // input faces replaced by splits

  int face_with_halfedge(int u, int v) const {
    for (std::size_t f = 0; f < faces.size(); ++f)
      for (int k = 0; k < 3; ++k)
        if (faces[f][k] == u && faces[f][(k + 1) % 3] == v) return static_cast<int>(f);
    return -1;
  }

  double length(int u, int v) const {
    for (std::size_t f = 0; f < faces.size(); ++f)
      for (int k = 0; k < 3; ++k) {
        const int a = faces[f][k], c = faces[f][(k + 1) % 3];
        if ((a == u && c == v) || (a == v && c == u)) return lengths[f][k];
      }
    throw ValidationError("strip: missing boundary edge");
  }

  // Split boundary halfedge u->v at fraction t from u.
  int split(int u, int v, double t) {
    const int f = face_with_halfedge(u, v);
    if (f < 0) throw ValidationError("strip: boundary edge not found");
    int k = 0;
    while (faces[f][k] != u) ++k;
    const int w = faces[f][(k + 2) % 3];
    const double uv = lengths[f][k], vw = lengths[f][(k + 1) % 3], wu = lengths[f][(k + 2) % 3];
    // Stewart's theorem for the cevian from w.
    const double xw = std::sqrt(std::max(0.0, (1.0 - t) * wu * wu + t * vw * vw - t * (1.0 - t) * uv * uv));
    const int x = num_vertices++;
    if (has_pos) pos.push_back((1.0 - t) * pos[u] + t * pos[v]);
    if (origin[f] >= 0) retired.push_back(origin[f]);
    faces[f] = {u, x, w};
    lengths[f] = {t * uv, xw, wu};
    origin[f] = -1;
    faces.push_back({x, v, w});
    lengths.push_back({(1.0 - t) * uv, vw, xw});
    origin.push_back(-1);
    return x;
  }

  void flip_component(const std::vector<int>& comp_of_vertex, int comp) {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (comp_of_vertex[faces[f][0]] != comp) continue;
      std::swap(faces[f][1], faces[f][2]);
      const auto L = lengths[f];
      lengths[f] = {L[2], L[1], L[0]};
    }
  }
};

struct Arc {
  std::vector<int> vertices; // along the loop direction
  std::vector<double> offset; // signed arclength from the centre vertex
};

// Boundary loop through v in the current soup, surface on the left.
std::vector<int> soup_loop(const Soup& s, int v) {
  std::vector<int> next(static_cast<std::size_t>(s.num_vertices), -1);
  std::set<std::pair<int, int>> half;
  for (const auto& F : s.faces)
    for (int k = 0; k < 3; ++k) half.insert({F[k], F[(k + 1) % 3]});
  for (const auto& [a, c] : half)
    if (!half.count({c, a})) next[a] = c;
  std::vector<int> loop{v};
  for (int u = next[v]; u != v; u = next[u]) {
    if (u < 0 || loop.size() > half.size()) throw ValidationError("strip: broken boundary loop");
    loop.push_back(u);
  }
  return loop;
}

Arc cut_arc(Soup& s, int centre, double eps, int& splits) {
  auto loop = soup_loop(s, centre);
  const std::size_t n = loop.size();
  std::vector<double> len(n);
  double L = 0.0;
  for (std::size_t i = 0; i < n; ++i) L += (len[i] = s.length(loop[i], loop[(i + 1) % n]));
  if (!(4.0 * eps < L)) throw ValidationError("strip: boundary arc of radius eps wraps its loop");
  constexpr double snap = 1e-9;
  // Forward endpoint.
  int fwd_end;
  {
    double acc = 0.0;
    std::size_t i = 0;
    while (acc + len[i] < eps * (1.0 - snap)) acc += len[i++];
    const double t = (eps - acc) / len[i];
    if (t >= 1.0 - snap) {
      fwd_end = loop[(i + 1) % n];
    } else {
      fwd_end = s.split(loop[i], loop[(i + 1) % n], t);
      ++splits;
    }
  }
  // Backward endpoint.
  int back_end;
  {
    double acc = 0.0;
    std::size_t i = n - 1; // edge loop[i] -> loop[i+1], walking backwards from the centre
    while (acc + len[i] < eps * (1.0 - snap)) acc += len[i--];
    const double t = 1.0 - (eps - acc) / len[i];
    if (t <= snap) {
      back_end = loop[i];
    } else {
      back_end = s.split(loop[i], loop[(i + 1) % n], t);
      ++splits;
    }
  }
  loop = soup_loop(s, centre);
  Arc arc;
  std::size_t b = loop.size() - 1;
  while (loop[b] != back_end) --b;
  double acc = 0.0;
  std::vector<std::pair<int, double>> back;
  for (std::size_t i = loop.size() - 1; i >= b; --i) {
    acc -= s.length(loop[i], loop[(i + 1) % loop.size()]);
    back.push_back({loop[i], acc});
    if (i == 0) break;
  }
  for (auto it = back.rbegin(); it != back.rend(); ++it) {
    arc.vertices.push_back(it->first);
    arc.offset.push_back(it->second);
  }
  arc.vertices.push_back(centre);
  arc.offset.push_back(0.0);
  acc = 0.0;
  for (std::size_t i = 1; i < loop.size(); ++i) {
    acc += s.length(loop[i - 1], loop[i]);
    arc.vertices.push_back(loop[i]);
    arc.offset.push_back(acc);
    if (loop[i] == fwd_end) break;
  }
  // Pin the endpoints to the exact cut parameters.
  arc.offset.front() = -eps;
  arc.offset.back() = eps;
  return arc;
}

} // namespace

SurgeryResult attach_strip(const TriSurface& m, int p, int q, double eps, double l, StripOrientation orientation) {
  if (p < 0 || q < 0 || p >= m.num_vertices() || q >= m.num_vertices()) throw ValidationError("vertex index out of range");
  if (p == q) throw ValidationError("p and q must differ");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be positive");
  if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("l must be positive");
  const auto bnd = m.boundary_vertex_mask();
  if (!bnd[p]) throw ValidationError("p is an interior vertex");
  if (!bnd[q]) throw ValidationError("q is an interior vertex");

  // Loop membership and arclength separation.
  int loop_p = -1, loop_q = -1;
  std::size_t ip = 0, iq = 0;
  for (int k = 0; k < m.num_boundary_components(); ++k) {
    const auto& lp = m.boundary_loops()[k];
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (lp[i] == p) loop_p = k, ip = i;
      if (lp[i] == q) loop_q = k, iq = i;
    }
  }
  if (loop_p == loop_q) {
    const auto& lp = m.boundary_loops()[loop_p];
    const auto c = loop_chords(m, lp);
    const double L = std::accumulate(c.begin(), c.end(), 0.0);
    double d = 0.0;
    for (std::size_t i = ip; i != iq; i = (i + 1) % lp.size()) d += c[i];
    if (std::min(d, L - d) <= 2.0 * eps) throw ValidationError("strip: boundary arcs around p and q overlap");
  }

  Soup s;
  s.num_vertices = m.num_vertices();
  s.faces = m.faces();
  for (int f = 0; f < m.num_faces(); ++f) {
    s.lengths.push_back(m.face_lengths(f));
    s.origin.push_back(f);
  }
  s.has_pos = m.positions().has_value();
  if (s.has_pos) s.pos = *m.positions();

  if (orientation == StripOrientation::Reverse) {
    // Component labels by face adjacency.
    std::vector<int> comp(static_cast<std::size_t>(m.num_vertices()));
    std::iota(comp.begin(), comp.end(), 0);
    std::function<int(int)> find = [&](int v) { return comp[v] == v ? v : comp[v] = find(comp[v]); };
    for (const auto& F : m.faces()) {
      comp[find(F[1])] = find(F[0]);
      comp[find(F[2])] = find(F[0]);
    }
    for (int v = 0; v < m.num_vertices(); ++v) comp[v] = find(v);
    if (comp[p] == comp[q])
      throw ValidationError("strip: reversed gluing within one connected component is non-orientable");
    s.flip_component(comp, comp[q]);
  }

  SurgeryReport r;
  r.eps = eps;
  r.aspect = l;
  int splits = 0;
  const Arc ap = cut_arc(s, p, eps, splits);
  const Arc aq = cut_arc(s, q, eps, splits);
  r.split_vertices = splits;
  for (int a : ap.vertices)
    for (int c : aq.vertices)
      if (a == c) throw ValidationError("strip: boundary arcs around p and q overlap");

  // Rectangle chart (x, y): bottom row is the arc at p, top row the arc at q reversed.
  const double height = l * eps;
  double h_target = 0.0;
  for (std::size_t i = 1; i < ap.offset.size(); ++i) h_target += ap.offset[i] - ap.offset[i - 1];
  for (std::size_t i = 1; i < aq.offset.size(); ++i) h_target += aq.offset[i] - aq.offset[i - 1];
  h_target /= static_cast<double>(ap.offset.size() + aq.offset.size() - 2);
  const int rows = std::max(2, static_cast<int>(std::ceil(height / h_target - 1e-9)));
  const int segs = std::max(2, static_cast<int>(std::lround(2.0 * eps / h_target)));
  r.n_rows = rows;
  r.n_theta = segs + 1;

  std::vector<std::vector<int>> row_v(static_cast<std::size_t>(rows) + 1);
  std::vector<std::vector<double>> row_x(static_cast<std::size_t>(rows) + 1);
  row_v[0] = ap.vertices;
  row_x[0] = ap.offset;
  for (std::size_t k = aq.vertices.size(); k-- > 0;) {
    row_v[rows].push_back(aq.vertices[k]);
    row_x[rows].push_back(-aq.offset[k]);
  }
  std::vector<Eigen::Vector2d> chart(static_cast<std::size_t>(s.num_vertices) + (segs + 1) * rows, Eigen::Vector2d::Zero());
  for (std::size_t k = 0; k < row_v[0].size(); ++k) chart[row_v[0][k]] = {row_x[0][k], 0.0};
  for (std::size_t k = 0; k < row_v[rows].size(); ++k) chart[row_v[rows][k]] = {row_x[rows][k], height};
  auto embed_at = [&](int row, double x) -> Eigen::Vector3d {
    const auto& xs = row_x[row];
    std::size_t k = 0;
    while (k + 2 < xs.size() && xs[k + 1] < x) ++k;
    const double t = std::clamp((x - xs[k]) / (xs[k + 1] - xs[k]), 0.0, 1.0);
    return (1.0 - t) * s.pos[row_v[row][k]] + t * s.pos[row_v[row][k + 1]];
  };
  r.inserted_vertex_begin = m.num_vertices();
  for (int row = 1; row < rows; ++row) {
    const double t = double(row) / rows;
    for (int k = 0; k <= segs; ++k) {
      const double x = -eps + 2.0 * eps * k / segs;
      const int v = s.num_vertices++;
      if (s.has_pos) s.pos.push_back((1.0 - t) * embed_at(0, x) + t * embed_at(rows, x));
      row_v[row].push_back(v);
      row_x[row].push_back(x);
      chart[v] = {x, t * height};
    }
  }
  r.inserted_vertex_end = s.num_vertices;

  std::vector<Face> strip;
  for (int row = 0; row < rows; ++row) detail::stitch_open(row_v[row], row_x[row], row_v[row + 1], row_x[row + 1], strip);

  auto arc_length = [&](const std::vector<int>& arc, int u, int v) -> double {
    for (std::size_t k = 0; k + 1 < arc.size(); ++k)
      if ((arc[k] == u && arc[k + 1] == v) || (arc[k] == v && arc[k + 1] == u)) return s.length(u, v);
    return -1.0;
  };

  // Output: untouched input faces, split faces, strip faces.
  std::vector<Face> faces;
  std::vector<FaceLengths> lengths;
  std::vector<std::pair<int, std::size_t>> kept;
  for (std::size_t f = 0; f < s.faces.size(); ++f)
    if (s.origin[f] >= 0) kept.push_back({s.origin[f], f});
  std::sort(kept.begin(), kept.end());
  for (auto [orig, f] : kept) {
    faces.push_back(s.faces[f]);
    lengths.push_back(s.lengths[f]);
  }
  r.inserted_face_begin = static_cast<int>(faces.size());
  for (std::size_t f = 0; f < s.faces.size(); ++f)
    if (s.origin[f] < 0) {
      faces.push_back(s.faces[f]);
      lengths.push_back(s.lengths[f]);
    }
  const std::size_t strip_begin = faces.size();
  for (const auto& F : strip) {
    FaceLengths L;
    for (int k = 0; k < 3; ++k) {
      const int u = F[k], v = F[(k + 1) % 3];
      double len = arc_length(ap.vertices, u, v);
      if (len < 0.0) len = arc_length(aq.vertices, u, v);
      L[k] = len > 0.0 ? len : (chart[u] - chart[v]).norm();
    }
    faces.push_back(F);
    lengths.push_back(L);
  }
  r.inserted_face_end = static_cast<int>(faces.size());
  r.removed_faces = s.retired;
  std::sort(r.removed_faces.begin(), r.removed_faces.end());
  r.area_added = faces_area(lengths, strip_begin);
  r.rim_p = ap.vertices;
  r.rim_q = aq.vertices;
  r.seam_p = row_v[1];
  r.seam_q = row_v[rows - 1];
  r.vertex_map.resize(static_cast<std::size_t>(m.num_vertices()));
  std::iota(r.vertex_map.begin(), r.vertex_map.end(), 0);

  std::optional<std::vector<Eigen::Vector3d>> P;
  if (s.has_pos) P = std::move(s.pos);
  return {TriSurface::from_face_lengths(s.num_vertices, std::move(faces), lengths, std::move(P)), std::move(r)};
}

} // namespace eigenglue::mesh
