#include "eigenglue/mesh.hpp"

#include "eigenglue/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace eigenglue::mesh {

namespace {

std::uint64_t key(int a, int b, int n) {
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(b);
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void merge(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

double triangle_area(double a, double b, double c) {
  // Kahan's ordering keeps needle triangles accurate.
  if (a < b) std::swap(a, b);
  if (a < c) std::swap(a, c);
  if (b < c) std::swap(b, c);
  const double s = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
  return 0.25 * std::sqrt(std::max(0.0, s));
}

TriSurface TriSurface::from_face_lengths(int num_vertices, std::vector<Face> faces,
                                         const std::vector<FaceLengths>& face_lengths,
                                         std::optional<std::vector<Eigen::Vector3d>> positions) {
  if (faces.size() != face_lengths.size()) throw ValidationError("face/length count mismatch");
  if (positions && static_cast<int>(positions->size()) != num_vertices)
    throw ValidationError("embedding size does not match vertex count");
  TriSurface m;
  m.num_vertices_ = num_vertices;
  m.faces_ = std::move(faces);
  m.positions_ = std::move(positions);
  m.build_topology(&face_lengths);
  return m;
}

TriSurface TriSurface::from_positions(std::vector<Eigen::Vector3d> positions, std::vector<Face> faces) {
  std::vector<FaceLengths> lengths(faces.size());
  const int n = static_cast<int>(positions.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int i = 0; i < 3; ++i) {
      const int a = faces[f][i];
      const int b = faces[f][(i + 1) % 3];
      if (a < 0 || a >= n || b < 0 || b >= n) throw ValidationError("face references a missing vertex");
      lengths[f][i] = (positions[a] - positions[b]).norm();
    }
  }
  return from_face_lengths(n, std::move(faces), lengths, std::move(positions));
}

void TriSurface::build_topology(const std::vector<FaceLengths>* face_lengths) {
  const int nv = num_vertices_;
  const int nf = num_faces();
  if (nf == 0) throw ValidationError("surface has no faces");

  for (int f = 0; f < nf; ++f) {
    const Face& t = faces_[f];
    for (int i = 0; i < 3; ++i) {
      if (t[i] < 0 || t[i] >= nv) throw ValidationError("face " + std::to_string(f) + " references a missing vertex");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw ValidationError("face " + std::to_string(f) + " repeats a vertex");
  }

  // Undirected edges in lexicographic order.
  std::vector<Edge> all;
  all.reserve(static_cast<std::size_t>(3 * nf));
  for (const Face& t : faces_) {
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      if (a > b) std::swap(a, b);
      all.push_back({a, b});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  edges_ = std::move(all);

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(edges_.size() * 2);
  for (int e = 0; e < num_edges(); ++e) edge_index.emplace(key(edges_[e][0], edges_[e][1], nv), e);

  face_edges_.assign(static_cast<std::size_t>(nf), {-1, -1, -1});
  edge_faces_.assign(edges_.size(), {-1, -1});
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(static_cast<std::size_t>(3 * nf) * 2);
  for (int f = 0; f < nf; ++f) {
    for (int i = 0; i < 3; ++i) {
      const int a = faces_[f][i], b = faces_[f][(i + 1) % 3];
      const int e = edge_index.at(key(std::min(a, b), std::max(a, b), nv));
      face_edges_[f][i] = e;
      auto& ef = edge_faces_[e];
      if (ef[0] < 0) {
        ef[0] = f;
      } else if (ef[1] < 0) {
        ef[1] = f;
      } else {
        throw ValidationError("non-manifold edge {" + std::to_string(edges_[e][0]) + "," +
                              std::to_string(edges_[e][1]) + "} has more than two faces");
      }
      if (!directed.emplace(key(a, b, nv), f).second) {
        throw ValidationError("non-orientable configuration: directed edge " + std::to_string(a) + "->" +
                              std::to_string(b) + " appears in two faces");
      }
    }
  }

  // Lengths.
  edge_lengths_.assign(edges_.size(), -1.0);
  if (face_lengths) {
    for (int f = 0; f < nf; ++f) {
      for (int i = 0; i < 3; ++i) {
        const double len = (*face_lengths)[f][i];
        const int e = face_edges_[f][i];
        if (!(len > 0.0) || !std::isfinite(len))
          throw ValidationError("degenerate edge: non-positive length on edge {" + std::to_string(edges_[e][0]) +
                                "," + std::to_string(edges_[e][1]) + "}");
        double& stored = edge_lengths_[e];
        if (stored < 0.0) {
          stored = len;
        } else if (std::abs(stored - len) > 1e-8 * std::max(stored, len)) {
          throw ValidationError("inconsistent lengths for edge {" + std::to_string(edges_[e][0]) + "," +
                                std::to_string(edges_[e][1]) + "}");
        }
      }
    }
  }
  for (int f = 0; f < nf; ++f) {
    const FaceLengths l = this->face_lengths(f);
    if (!(l[0] < l[1] + l[2]) || !(l[1] < l[0] + l[2]) || !(l[2] < l[0] + l[1]))
      throw ValidationError("face " + std::to_string(f) + " violates the strict triangle inequality");
  }

  // Vertex manifoldness: the faces around each vertex form one fan.
  std::vector<std::vector<int>> vf(static_cast<std::size_t>(nv));
  for (int f = 0; f < nf; ++f)
    for (int v : faces_[f]) vf[v].push_back(f);
  std::vector<int> boundary_out(static_cast<std::size_t>(nv), -1);
  for (int f = 0; f < nf; ++f) {
    for (int i = 0; i < 3; ++i) {
      const int a = faces_[f][i], b = faces_[f][(i + 1) % 3];
      if (directed.find(key(b, a, nv)) == directed.end()) {
        if (boundary_out[a] >= 0)
          throw ValidationError("non-manifold vertex " + std::to_string(a) + " (two boundary fans)");
        boundary_out[a] = b;
      }
    }
  }
  for (int v = 0; v < nv; ++v) {
    const auto& fan = vf[v];
    if (fan.empty()) throw ValidationError("vertex " + std::to_string(v) + " is not referenced by any face");
    // Walk the fan through edges incident to v.
    std::unordered_map<int, int> local;
    for (std::size_t i = 0; i < fan.size(); ++i) local.emplace(fan[i], static_cast<int>(i));
    DisjointSets ds(static_cast<int>(fan.size()));
    for (std::size_t i = 0; i < fan.size(); ++i) {
      const int f = fan[i];
      for (int c = 0; c < 3; ++c) {
        const int e = face_edges_[f][c];
        if (edges_[e][0] != v && edges_[e][1] != v) continue;
        const int other = edge_faces_[e][0] == f ? edge_faces_[e][1] : edge_faces_[e][0];
        if (other >= 0) ds.merge(static_cast<int>(i), local.at(other));
      }
    }
    const int root = ds.find(0);
    for (std::size_t i = 1; i < fan.size(); ++i) {
      if (ds.find(static_cast<int>(i)) != root)
        throw ValidationError("non-manifold vertex " + std::to_string(v) + " (disconnected fan)");
    }
  }

  // Boundary loops.
  boundary_loops_.clear();
  std::vector<char> seen(static_cast<std::size_t>(nv), 0);
  for (int v = 0; v < nv; ++v) {
    if (boundary_out[v] < 0 || seen[v]) continue;
    std::vector<int> loop;
    int cur = v;
    while (!seen[cur]) {
      seen[cur] = 1;
      loop.push_back(cur);
      cur = boundary_out[cur];
      if (cur < 0) throw ValidationError("open boundary chain");
    }
    if (cur != v) throw ValidationError("boundary chain does not close");
    boundary_loops_.push_back(std::move(loop));
  }

  DisjointSets comp(nv);
  for (const Edge& e : edges_) comp.merge(e[0], e[1]);
  num_components_ = 0;
  for (int v = 0; v < nv; ++v)
    if (comp.find(v) == v) ++num_components_;
}

FaceLengths TriSurface::face_lengths(int f) const {
  const auto& fe = face_edges_[static_cast<std::size_t>(f)];
  return {edge_lengths_[fe[0]], edge_lengths_[fe[1]], edge_lengths_[fe[2]]};
}

double TriSurface::face_area(int f) const {
  const FaceLengths l = face_lengths(f);
  return triangle_area(l[0], l[1], l[2]);
}

std::vector<double> TriSurface::face_areas() const {
  std::vector<double> a(faces_.size());
  for (int f = 0; f < num_faces(); ++f) a[f] = face_area(f);
  return a;
}

double TriSurface::total_area() const {
  double s = 0.0;
  for (int f = 0; f < num_faces(); ++f) s += face_area(f);
  return s;
}

int TriSurface::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  const Edge target{a, b};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), target);
  if (it != edges_.end() && *it == target) return static_cast<int>(it - edges_.begin());
  return -1;
}

std::vector<bool> TriSurface::boundary_vertex_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(num_vertices_), false);
  for (const auto& loop : boundary_loops_)
    for (int v : loop) mask[v] = true;
  return mask;
}

int TriSurface::genus() const {
  const int twice = 2 * num_components_ - euler_characteristic() - num_boundary_components();
  return twice / 2;
}

double TriSurface::boundary_length() const {
  double s = 0.0;
  for (const auto& loop : boundary_loops_) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      s += edge_length(find_edge(loop[i], loop[(i + 1) % loop.size()]));
    }
  }
  return s;
}

std::vector<std::vector<int>> TriSurface::vertex_faces() const {
  std::vector<std::vector<int>> vf(static_cast<std::size_t>(num_vertices_));
  for (int f = 0; f < num_faces(); ++f)
    for (int v : faces_[f]) vf[v].push_back(f);
  return vf;
}

std::vector<std::vector<int>> TriSurface::vertex_neighbors() const {
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(num_vertices_));
  for (const Edge& e : edges_) {
    nb[e[0]].push_back(e[1]);
    nb[e[1]].push_back(e[0]);
  }
  for (auto& n : nb) std::sort(n.begin(), n.end());
  return nb;
}

TriSurface with_edge_lengths(const TriSurface& m, const std::vector<double>& lengths) {
  if (static_cast<int>(lengths.size()) != m.num_edges()) throw ValidationError("edge length count mismatch");
  std::vector<FaceLengths> fl(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f)
    for (int i = 0; i < 3; ++i) fl[f][i] = lengths[m.face_edges()[f][i]];
  return TriSurface::from_face_lengths(m.num_vertices(), m.faces(), fl, m.positions());
}

std::vector<double> graph_distances(const TriSurface& m, int source) {
  if (source < 0 || source >= m.num_vertices()) throw ValidationError("source vertex out of range");
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(m.num_vertices()));
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& ed = m.edges()[e];
    adj[ed[0]].emplace_back(ed[1], m.edge_length(e));
    adj[ed[1]].emplace_back(ed[0], m.edge_length(e));
  }
  std::vector<double> dist(static_cast<std::size_t>(m.num_vertices()), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (auto [w, len] : adj[v]) {
      const double nd = d + len;
      if (nd < dist[w]) {
        dist[w] = nd;
        pq.emplace(nd, w);
      }
    }
  }
  return dist;
}

} // namespace eigenglue::mesh
