#include "eigenglue/metric.hpp"

#include "eigenglue/error.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>

namespace eigenglue::metric {

double accurate_sum(const std::vector<double>& x) {
  // Neumaier compensated summation.
  double s = 0.0, c = 0.0;
  for (double v : x) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

double DensityMeasure::total() const { return accurate_sum(weights); }

double DensityMeasure::pair(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi) const {
  double s = 0.0;
  for (std::size_t v = 0; v < weights.size(); ++v) s += weights[v] * phi[static_cast<Eigen::Index>(v)] * psi[static_cast<Eigen::Index>(v)];
  return s;
}

std::array<Eigen::Vector2d, 3> face_chart(const FaceLengths& L) {
  // L[0] = |c0 c1|, L[1] = |c1 c2|, L[2] = |c2 c0|.
  const double x = (L[0] * L[0] + L[2] * L[2] - L[1] * L[1]) / (2.0 * L[0]);
  const double y = std::sqrt(std::max(0.0, L[2] * L[2] - x * x));
  return {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(L[0], 0.0), Eigen::Vector2d(x, y)};
}

std::vector<double> vertex_areas(const TriSurface& m) {
  std::vector<double> A(static_cast<std::size_t>(m.num_vertices()), 0.0);
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& F = m.faces()[f];
    const auto L = m.face_lengths(f);
    const double area = mesh::triangle_area(L[0], L[1], L[2]);
    // Corner k sits between edges L[k] (to k+1) and L[(k+2)%3] (from k+2); opposite edge L[(k+1)%3].
    std::array<double, 3> cosang{};
    for (int k = 0; k < 3; ++k) {
      const double a = L[k], b = L[(k + 2) % 3], o = L[(k + 1) % 3];
      cosang[k] = (a * a + b * b - o * o) / (2.0 * a * b);
    }
    int obtuse = -1;
    for (int k = 0; k < 3; ++k)
      if (cosang[k] < 0.0) obtuse = k;
    if (obtuse >= 0) {
      for (int k = 0; k < 3; ++k) A[F[k]] += (k == obtuse ? 0.5 : 0.25) * area;
      continue;
    }
    // Voronoi: corner k gets (|e_k|^2 cot(opposite of e_k) + |e_{k+2}|^2 cot(opposite of e_{k+2})) / 8.
    auto cot = [&](int k) { return cosang[k] / std::sqrt(std::max(1e-300, 1.0 - cosang[k] * cosang[k])); };
    for (int k = 0; k < 3; ++k) {
      const double e1 = L[k], e2 = L[(k + 2) % 3];
      A[F[k]] += (e1 * e1 * cot((k + 2) % 3) + e2 * e2 * cot((k + 1) % 3)) / 8.0;
    }
  }
  return A;
}

DensityMeasure area_measure(const TriSurface& m) { return {Support::Interior, vertex_areas(m)}; }

DensityMeasure boundary_measure(const TriSurface& m) {
  if (m.is_closed()) throw ValidationError("closed surface has no boundary measure");
  DensityMeasure b{Support::Boundary, std::vector<double>(static_cast<std::size_t>(m.num_vertices()), 0.0)};
  for (const auto& loop : m.boundary_loops())
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int a = loop[i], c = loop[(i + 1) % loop.size()];
      const double l = m.edge_length(m.find_edge(a, c));
      b.weights[a] += 0.5 * l;
      b.weights[c] += 0.5 * l;
    }
  return b;
}

DensityMeasure density_from_conformal(const TriSurface& m, const ConformalFactor& u) {
  if (static_cast<int>(u.u.size()) != m.num_vertices()) throw ValidationError("conformal factor size mismatch");
  auto A = vertex_areas(m);
  for (std::size_t v = 0; v < A.size(); ++v) {
    if (!std::isfinite(u.u[v])) throw ValidationError("conformal factor is not finite at vertex " + std::to_string(v));
    A[v] *= std::exp(2.0 * u.u[v]);
  }
  return {Support::Interior, std::move(A)};
}

ConformalFactor conformal_from_density(const TriSurface& m, const DensityMeasure& beta) {
  validate(beta, m);
  const auto A = vertex_areas(m);
  ConformalFactor u{std::vector<double>(A.size()), fingerprint(m)};
  for (std::size_t v = 0; v < A.size(); ++v) {
    if (!(beta.weights[v] > 0.0)) throw ValidationError("density vanishes at vertex " + std::to_string(v));
    u.u[v] = 0.5 * std::log(beta.weights[v] / A[v]);
  }
  return u;
}

void validate(const DensityMeasure& beta, const TriSurface& m) {
  if (static_cast<int>(beta.weights.size()) != m.num_vertices())
    throw ValidationError("density has " + std::to_string(beta.weights.size()) + " weights for " +
                          std::to_string(m.num_vertices()) + " vertices");
  const auto bnd = m.boundary_vertex_mask();
  for (std::size_t v = 0; v < beta.weights.size(); ++v) {
    const double w = beta.weights[v];
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("density weight at vertex " + std::to_string(v) + " is negative or not finite");
    if (beta.support == Support::Boundary && w != 0.0 && !bnd[v])
      throw ValidationError("boundary density charges interior vertex " + std::to_string(v));
  }
  if (!(beta.total() > 0.0)) throw ValidationError("density has zero total mass: beta(1,1) must be positive");
}

std::string fingerprint(const TriSurface& m) {
  const std::string s = mesh::to_canonical_json(m);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Gram matrix of the metric in the basis (c1 - c0, c2 - c0).
Eigen::Matrix2d edge_gram(const FaceLengths& L) {
  const double a = L[0] * L[0], c = L[2] * L[2], b = L[1] * L[1];
  Eigen::Matrix2d G;
  G << a, 0.5 * (a + c - b), 0.5 * (a + c - b), c;
  return G;
}

} // namespace

double face_metric_distance(const FaceLengths& g1, const FaceLengths& g2) {
  if (g1 == g2) return 0.0;
  const Eigen::Matrix2d G1 = edge_gram(g1), G2 = edge_gram(g2);
  if (!(G1.determinant() > 0.0) || !(G2.determinant() > 0.0)) throw ValidationError("degenerate face in metric_distance");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(G2, G1);
  const double mu_min = es.eigenvalues()[0], mu_max = es.eigenvalues()[1];
  const double a = std::log(mu_max), b = std::log(1.0 / mu_min);
  return std::sqrt(a * a + b * b);
}

double metric_distance(const TriSurface& g1, const TriSurface& g2) {
  if (g1.num_vertices() != g2.num_vertices() || g1.faces() != g2.faces())
    throw ValidationError("metric_distance: surfaces do not share combinatorics");
  double d = 0.0;
  for (int f = 0; f < g1.num_faces(); ++f) d = std::max(d, face_metric_distance(g1.face_lengths(f), g2.face_lengths(f)));
  return d;
}

TriSurface apply_conformal(const TriSurface& m, const ConformalFactor& u) {
  if (static_cast<int>(u.u.size()) != m.num_vertices()) throw ValidationError("conformal factor size mismatch");
  std::vector<double> L(m.edge_lengths());
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& E = m.edges()[e];
    const double s = 0.5 * (u.u[E[0]] + u.u[E[1]]);
    if (!std::isfinite(s)) throw ValidationError("conformal factor is not finite");
    L[e] *= std::exp(s);
  }
  return mesh::with_edge_lengths(m, L);
}

double tensor_inner(const MetricPerturbation& h1, const MetricPerturbation& h2, const TriSurface& m) {
  if (static_cast<int>(h1.h.size()) != m.num_faces() || static_cast<int>(h2.h.size()) != m.num_faces())
    throw ValidationError("tensor_inner: perturbation size mismatch");
  double s = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto &a = h1.h[f], &b = h2.h[f];
    s += m.face_area(f) * (a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]);
  }
  return s;
}

double tensor_sup_norm(const MetricPerturbation& h, const TriSurface& m) {
  if (static_cast<int>(h.h.size()) != m.num_faces()) throw ValidationError("tensor_sup_norm: perturbation size mismatch");
  double s = 0.0;
  for (const auto& a : h.h) s = std::max(s, std::sqrt(a[0] * a[0] + 2.0 * a[1] * a[1] + a[2] * a[2]));
  return s;
}

MetricPerturbation identity_perturbation(const TriSurface& m) {
  return {std::vector<std::array<double, 3>>(static_cast<std::size_t>(m.num_faces()), {1.0, 0.0, 1.0})};
}

MetricPerturbation rotate_frames(const MetricPerturbation& h, const std::vector<double>& angles) {
  if (angles.size() != h.h.size()) throw ValidationError("rotate_frames: size mismatch");
  MetricPerturbation out = h;
  for (std::size_t f = 0; f < h.h.size(); ++f) {
    const double c = std::cos(angles[f]), s = std::sin(angles[f]);
    Eigen::Matrix2d R;
    R << c, -s, s, c;
    Eigen::Matrix2d H;
    H << h.h[f][0], h.h[f][1], h.h[f][1], h.h[f][2];
    // Components in the rotated frame: R^T H R.
    const Eigen::Matrix2d G = R.transpose() * H * R;
    out.h[f] = {G(0, 0), 0.5 * (G(0, 1) + G(1, 0)), G(1, 1)};
  }
  return out;
}

std::vector<FaceLengths> perturbed_face_lengths(const TriSurface& m, const MetricPerturbation& h, double t) {
  if (static_cast<int>(h.h.size()) != m.num_faces()) throw ValidationError("perturbation size mismatch");
  std::vector<FaceLengths> out(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto P = face_chart(m.face_lengths(f));
    Eigen::Matrix2d G;
    G << 1.0 + t * h.h[f][0], t * h.h[f][1], t * h.h[f][1], 1.0 + t * h.h[f][2];
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d e = P[(k + 1) % 3] - P[k];
      const double q = e.dot(G * e);
      if (!(q > 0.0)) throw ValidationError("perturbed metric is not positive definite on face " + std::to_string(f));
      out[f][k] = std::sqrt(q);
    }
  }
  return out;
}

std::string to_json(const DensityMeasure& beta) {
  nlohmann::ordered_json j;
  j["type"] = "DensityMeasure";
  j["support"] = beta.support == Support::Interior ? "interior" : "boundary";
  j["total"] = beta.total();
  j["weights"] = beta.weights;
  return j.dump();
}

DensityMeasure density_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DensityMeasure b;
    const auto s = j.value("support", std::string("interior"));
    if (s == "interior")
      b.support = Support::Interior;
    else if (s == "boundary")
      b.support = Support::Boundary;
    else
      throw ValidationError("density JSON: unknown support '" + s + "'");
    b.weights = j.at("weights").get<std::vector<double>>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("density JSON: ") + e.what());
  }
}

std::string to_json(const ConformalFactor& u) {
  nlohmann::ordered_json j;
  j["type"] = "ConformalFactor";
  j["reference"] = u.reference;
  j["u"] = u.u;
  return j.dump();
}

ConformalFactor conformal_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return {j.at("u").get<std::vector<double>>(), j.value("reference", std::string())};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("conformal factor JSON: ") + e.what());
  }
}

} // namespace eigenglue::metric
