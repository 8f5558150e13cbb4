#include "eigenglue/spectrum.hpp"

#include "eigenglue/error.hpp"

#include <cmath>

namespace eigenglue::spectrum {

Eigen::SparseMatrix<double> stiffness(const TriSurface& m, const std::vector<mesh::FaceLengths>& face_lengths) {
  if (static_cast<int>(face_lengths.size()) != m.num_faces()) throw ValidationError("stiffness: face length count mismatch");
  const int n = m.num_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.num_faces()) * 12);
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& F = m.faces()[f];
    const auto& L = face_lengths[f];
    const double area = mesh::triangle_area(L[0], L[1], L[2]);
    if (!(area > 0.0)) throw ValidationError("stiffness: degenerate face " + std::to_string(f));
    for (int k = 0; k < 3; ++k) {
      // Edge k joins corners k and k+1; the opposite angle sits between edges k+1 and k+2.
      const double a = L[(k + 1) % 3], b = L[(k + 2) % 3], c = L[k];
      const double w = (a * a + b * b - c * c) / (8.0 * area); // cot / 2
      const int i = F[k], j = F[(k + 1) % 3];
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
    }
  }
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

Eigen::SparseMatrix<double> stiffness(const TriSurface& m) {
  std::vector<mesh::FaceLengths> L(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f) L[f] = m.face_lengths(f);
  return stiffness(m, L);
}

AssembledProblem assemble(const TriSurface& m, const DensityMeasure& beta, ProblemKind kind, MassKind mass) {
  std::vector<mesh::FaceLengths> L(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f) L[f] = m.face_lengths(f);
  return assemble(m, L, beta, kind, mass);
}

AssembledProblem assemble(const TriSurface& m, const std::vector<mesh::FaceLengths>& face_lengths,
                          const DensityMeasure& beta, ProblemKind kind, MassKind mass) {
  if (kind == ProblemKind::Steklov && m.is_closed()) throw ValidationError("closed surface has no Steklov problem");
  metric::validate(beta, m);
  if (kind == ProblemKind::Steklov && beta.support != metric::Support::Boundary)
    throw ValidationError("Steklov problem needs a boundary-supported density");
  if (kind == ProblemKind::Laplace && beta.support != metric::Support::Interior)
    throw ValidationError("Laplace problem needs an interior density");
  if (m.num_components() != 1) throw ValidationError("surface must be connected");
  const int n = m.num_vertices();

  AssembledProblem p;
  p.kind = kind;
  p.dim = n;
  p.K = stiffness(m, face_lengths);

  if (kind == ProblemKind::Laplace) {
    // A vanishing density is tolerated only at isolated vertices.
    const auto nb = m.vertex_neighbors();
    for (int v = 0; v < n; ++v) {
      if (beta.weights[v] > 0.0) continue;
      for (int u : nb[v])
        if (!(beta.weights[u] > 0.0))
          throw ValidationError("density vanishes on adjacent vertices " + std::to_string(v) + " and " + std::to_string(u) +
                                " (eigenvalues may be infinite there; not modeled)");
    }
  }

  if (mass == MassKind::Lumped) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int v = 0; v < n; ++v)
      if (beta.weights[v] != 0.0) trip.emplace_back(v, v, beta.weights[v]);
    p.M.resize(n, n);
    p.M.setFromTriplets(trip.begin(), trip.end());
    p.lumped = true;
  } else {
    if (kind == ProblemKind::Steklov) throw ValidationError("consistent mass is offered for the Laplace problem only");
    const auto A = metric::vertex_areas(m);
    std::vector<Eigen::Triplet<double>> trip;
    for (int f = 0; f < m.num_faces(); ++f) {
      const auto& F = m.faces()[f];
      double rho = 0.0;
      for (int v : F) rho += beta.weights[v] / A[v];
      rho /= 3.0;
      const double af = m.face_area(f) * rho / 12.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) trip.emplace_back(F[a], F[b], (a == b ? 2.0 : 1.0) * af);
    }
    p.M.resize(n, n);
    p.M.setFromTriplets(trip.begin(), trip.end());
    p.lumped = false;
  }
  p.M.makeCompressed();
  p.beta_total = Eigen::VectorXd::Ones(n).dot(p.M * Eigen::VectorXd::Ones(n));

  int negative = 0;
  for (int j = 0; j < p.K.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.K, j); it; ++it)
      if (it.row() < it.col() && it.value() > 0.0) ++negative;
  if (negative > 0)
    p.warnings.push_back(std::to_string(negative) + " edge(s) with negative cotangent weight (mesh quality)");
  return p;
}

} // namespace eigenglue::spectrum
