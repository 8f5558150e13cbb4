#include "eigenglue/spectrum.hpp"

#include "eigenglue/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <random>

namespace eigenglue::spectrum {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

Mat random_block(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat X(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) X(i, j) = N(rng);
  return X;
}

// Shared M-inner-product machinery.
struct MSpace {
  const SpMat& M;
  double total;
  Vec Mones;

  MSpace(const SpMat& M_, double total_) : M(M_), total(total_) { Mones = M * Vec::Ones(M.rows()); }

  // Remove the beta-mean: X <- X - 1 (1^T M X) / beta(1,1).
  void deflate(Mat& X) const {
    const Eigen::RowVectorXd c = (Mones.transpose() * X) / total;
    X -= Vec::Ones(X.rows()) * c;
  }

  // Remove components along an M-orthonormal basis Q.
  void project_out(Mat& X, const Mat& Q) const {
    if (Q.cols() == 0) return;
    X -= Q * (Q.transpose() * (M * X));
  }

  // M-orthonormalize, dropping numerically dependent directions.
  Mat orthonormalize(Mat X) const {
    for (int pass = 0; pass < 2; ++pass) {
      deflate(X);
      const Mat G = X.transpose() * (M * X);
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.transpose()));
      const Vec d = es.eigenvalues();
      const double dmax = d.size() ? d.maxCoeff() : 0.0;
      if (!(dmax > 0.0)) return Mat(X.rows(), 0);
      std::vector<int> keep;
      for (int i = static_cast<int>(d.size()) - 1; i >= 0; --i)
        if (d[i] > 1e-13 * dmax) keep.push_back(i);
      Mat T(X.cols(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) T.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) / std::sqrt(d[keep[c]]);
      X = X * T;
    }
    return X;
  }
};

double rel_residual(const SpMat& K, const SpMat& M, const Vec& phi, double lambda) {
  const Vec Kp = K * phi;
  const double nk = Kp.norm();
  const Vec r = Kp - lambda * (M * phi);
  return nk > 0.0 ? r.norm() / nk : r.norm();
}

void finish(const AssembledProblem& p, SpectrumResult& s) {
  const int n = p.dim;
  const int cols = static_cast<int>(s.eigenvalues.size());
  s.residuals.assign(static_cast<std::size_t>(cols), 0.0);
  for (int i = 1; i < cols; ++i) s.residuals[i] = rel_residual(p.K, p.M, s.eigenvectors.col(i), s.eigenvalues[i]);
  const Mat G = s.eigenvectors.transpose() * (p.M * s.eigenvectors);
  s.orthonormality_defect = (G - Mat::Identity(cols, cols)).cwiseAbs().maxCoeff();
  s.clusters = cluster_indices(s.eigenvalues, s.next_eigenvalue, s.tau, s.last_cluster_closed);
  (void)n;
}

// Dense generalized eigensolve; returns eigenvalues ascending (including the
// zero mode) and M-orthonormal eigenvectors.
void dense_eigen(const AssembledProblem& p, Vec& values, Mat& vectors) {
  const int n = p.dim;
  const Mat K = Mat(p.K);
  if (!p.lumped) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(K, Mat(p.M));
    if (es.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed");
    values = es.eigenvalues();
    vectors = es.eigenvectors();
    return;
  }
  const Vec w = Vec(p.M.diagonal());
  std::vector<int> act, zero;
  for (int i = 0; i < n; ++i) (w[i] > 0.0 ? act : zero).push_back(i);
  const int na = static_cast<int>(act.size()), nz = static_cast<int>(zero.size());
  Mat Kaa(na, na), Kaz(na, nz), Kzz(nz, nz);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < na; ++b) Kaa(a, b) = K(act[a], act[b]);
    for (int b = 0; b < nz; ++b) Kaz(a, b) = K(act[a], zero[b]);
  }
  for (int a = 0; a < nz; ++a)
    for (int b = 0; b < nz; ++b) Kzz(a, b) = K(zero[a], zero[b]);
  Mat S = Kaa;
  Mat ext; // zero-mass values as a linear function of the active ones
  if (nz > 0) {
    Eigen::LLT<Mat> llt(Kzz);
    if (llt.info() != Eigen::Success) throw NumericalError("zero-mass block is singular");
    ext = -llt.solve(Kaz.transpose());
    S += Kaz * ext;
  }
  Vec isw(na);
  for (int a = 0; a < na; ++a) isw[a] = 1.0 / std::sqrt(w[act[a]]);
  const Mat C = isw.asDiagonal() * S * isw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (C + C.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  values = es.eigenvalues();
  const Mat Xa = isw.asDiagonal() * es.eigenvectors();
  vectors.setZero(n, na);
  for (int a = 0; a < na; ++a) vectors.row(act[a]) = Xa.row(a);
  if (nz > 0) {
    const Mat Xz = ext * Xa;
    for (int b = 0; b < nz; ++b) vectors.row(zero[b]) = Xz.row(b);
  }
}

int mass_rank(const AssembledProblem& p) {
  if (!p.lumped) return p.dim;
  int r = 0;
  for (int i = 0; i < p.dim; ++i)
    if (p.M.coeff(i, i) > 0.0) ++r;
  return r;
}

SpectrumResult solve_dense(const AssembledProblem& p, int k, const SolveOptions& opt) {
  Vec values;
  Mat vectors;
  dense_eigen(p, values, vectors);
  const int avail = static_cast<int>(values.size());
  SpectrumResult s;
  s.kind = p.kind;
  s.beta_total = p.beta_total;
  s.tol = opt.tol;
  s.tau = opt.tau;
  s.method = "dense";
  s.eigenvalues.resize(k + 1);
  s.eigenvectors.resize(p.dim, k + 1);
  s.eigenvalues[0] = 0.0;
  s.eigenvectors.col(0) = Vec::Constant(p.dim, 1.0 / std::sqrt(p.beta_total));
  MSpace ms(p.M, p.beta_total);
  Mat X = vectors.middleCols(1, k);
  ms.deflate(X);
  // Re-orthonormalize within the computed basis, keeping the ordering.
  const Mat G = X.transpose() * (p.M * X);
  Eigen::LLT<Mat> llt(0.5 * (G + G.transpose()));
  X = X * Mat(llt.matrixU()).inverse();
  for (int i = 1; i <= k; ++i) {
    s.eigenvalues[i] = values[i];
    Vec v = X.col(i - 1);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index idx;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
    s.eigenvectors.col(i) = v;
    s.eigenvalues[i] = v.dot(p.K * v);
  }
  s.next_eigenvalue = k + 1 < avail ? values[k + 1] : std::numeric_limits<double>::infinity();
  finish(p, s);
  return s;
}

SpectrumResult solve_sparse(const AssembledProblem& p, int k, const SolveOptions& opt) {
  const int n = p.dim;
  const int avail = mass_rank(p) - 1; // nontrivial modes
  const int b = std::min(avail, k + 1 + std::max(6, (k + 1) / 2));
  const int need = std::min(k + 1, b); // modes 1..k plus the guard
  MSpace ms(p.M, p.beta_total);

  double trK = 0.0, trM = 0.0;
  for (int i = 0; i < n; ++i) trK += p.K.coeff(i, i), trM += p.M.coeff(i, i);
  const double shift = 1e-4 * trK / trM;
  SpMat A = p.K + shift * p.M;
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("factorization of K + sM failed");
  auto apply = [&](const Mat& X) -> Mat {
    Mat Y = ldlt.solve(p.M * X);
    ms.deflate(Y);
    return Y;
  };

  std::mt19937_64 rng(opt.seed);
  Mat X = random_block(n, b, rng);
  if (opt.initial && opt.initial->rows() == n) {
    const int c = std::min<int>(b, static_cast<int>(opt.initial->cols()) - 1);
    if (c > 0) X.leftCols(c) = opt.initial->middleCols(1, c);
  }
  X = ms.orthonormalize(X);

  Vec theta;
  Mat ritz;
  double worst = 0.0;
  int it = 0;
  for (; it < opt.max_restarts; ++it) {
    Mat Q1 = ms.orthonormalize(apply(X));
    Mat Y2 = apply(Q1);
    ms.project_out(Y2, Q1);
    Mat Q2 = ms.orthonormalize(Y2);
    Mat Q12(n, Q1.cols() + Q2.cols());
    Q12 << Q1, Q2;
    Mat Y3 = apply(Q2);
    ms.project_out(Y3, Q12);
    ms.project_out(Y3, Q12);
    Mat Q3 = ms.orthonormalize(Y3);
    Mat Q(n, Q12.cols() + Q3.cols());
    Q << Q12, Q3;
    Q = ms.orthonormalize(Q);
    if (Q.cols() < need) throw NumericalError("Krylov basis collapsed");
    const Mat H = Q.transpose() * (p.K * Q);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
    theta = es.eigenvalues();
    const int keep = std::min<int>(b, static_cast<int>(Q.cols()));
    X = Q * es.eigenvectors().leftCols(keep);
    worst = 0.0;
    for (int i = 0; i < need; ++i) {
      const double r = rel_residual(p.K, p.M, X.col(i), theta[i]);
      const double target = i < k ? opt.tol : std::max(opt.tol, 1e-7);
      worst = std::max(worst, r / target);
    }
    if (worst <= 1.0) break;
  }
  if (worst > 1.0)
    throw NumericalError("eigensolver did not converge within " + std::to_string(opt.max_restarts) +
                         " restarts (worst residual/tolerance " + std::to_string(worst) + ")");

  SpectrumResult s;
  s.kind = p.kind;
  s.beta_total = p.beta_total;
  s.tol = opt.tol;
  s.tau = opt.tau;
  s.method = "krylov";
  s.iterations = it + 1;
  s.eigenvalues.resize(k + 1);
  s.eigenvectors.resize(n, k + 1);
  s.eigenvalues[0] = 0.0;
  s.eigenvectors.col(0) = Vec::Constant(n, 1.0 / std::sqrt(p.beta_total));
  for (int i = 1; i <= k; ++i) {
    Vec v = X.col(i - 1);
    Eigen::Index idx;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
    s.eigenvectors.col(i) = v;
    s.eigenvalues[i] = theta[i - 1];
  }
  s.next_eigenvalue = k < avail ? theta[k] : std::numeric_limits<double>::infinity();
  finish(p, s);
  return s;
}

} // namespace

const Cluster& SpectrumResult::cluster_of(int i) const {
  for (const auto& c : clusters)
    if (i >= c.first && i <= c.last) return c;
  throw ValidationError("index " + std::to_string(i) + " is outside the computed spectrum");
}

std::vector<Cluster> cluster_indices(const Eigen::VectorXd& ev, double next, double tau, bool& closed) {
  std::vector<Cluster> out;
  const int k = static_cast<int>(ev.size()) - 1;
  auto linked = [&](double a, double b) { return std::abs(b - a) <= tau * (1.0 + std::abs(a)); };
  for (int i = 1; i <= k; ++i) {
    if (!out.empty() && linked(ev[i - 1], ev[i]) && i - 1 >= 1)
      out.back().last = i;
    else
      out.push_back({i, i});
  }
  closed = k < 1 || !std::isfinite(next) || !linked(ev[k], next);
  return out;
}

SpectrumResult solve(const AssembledProblem& p, int k, double tol) {
  SolveOptions o;
  o.tol = tol;
  return solve(p, k, o);
}

SpectrumResult solve(const AssembledProblem& p, int k, const SolveOptions& opt) {
  if (k < 1) throw ValidationError("solve: k must be at least 1");
  if (!(opt.tol > 0.0)) throw ValidationError("solve: tol must be positive");
  if (!(opt.tau >= 0.0)) throw ValidationError("solve: tau must be nonnegative");
  const int rank = mass_rank(p);
  if (k >= rank)
    throw ValidationError("solve: k = " + std::to_string(k) + " too large for " + std::to_string(rank) +
                          " mass-carrying unknowns");
  const bool dense = opt.force_dense || (!opt.force_sparse && p.dim < kDenseThreshold);
  if (!dense && k + 1 >= rank) return solve_dense(p, k, opt);
  return dense ? solve_dense(p, k, opt) : solve_sparse(p, k, opt);
}

std::vector<double> normalized(const SpectrumResult& s) {
  std::vector<double> out(static_cast<std::size_t>(s.eigenvalues.size()));
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) out[static_cast<std::size_t>(i)] = s.eigenvalues[i] * s.beta_total;
  return out;
}

MinMaxReport rayleigh_minmax_check(const AssembledProblem& p, const SpectrumResult& s, int trials, std::uint64_t seed) {
  MinMaxReport r;
  const int k = s.k();
  if (p.dim <= kDenseThreshold) {
    Vec values;
    Mat vectors;
    dense_eigen(p, values, vectors);
    r.dense_checked = true;
    for (int i = 1; i <= k; ++i)
      r.dense_max_rel_diff = std::max(r.dense_max_rel_diff, std::abs(values[i] - s.eigenvalues[i]) / std::abs(values[i]));
    if (r.dense_max_rel_diff > 1e-8) r.ok = false;
  }
  MSpace ms(p.M, p.beta_total);
  auto max_quotient = [&](Mat V) {
    V = ms.orthonormalize(V);
    const Mat H = V.transpose() * (p.K * V);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };
  r.achieving_gap = std::abs(max_quotient(s.eigenvectors.middleCols(1, k)) - s.eigenvalues[k]);
  std::mt19937_64 rng(seed);
  r.min_margin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const double q = max_quotient(random_block(p.dim, k, rng));
    const double margin = q - s.eigenvalues[k];
    r.min_margin = std::min(r.min_margin, margin);
    if (margin < -1e-10) ++r.violations;
    ++r.trials;
  }
  if (r.violations > 0) r.ok = false;
  return r;
}

} // namespace eigenglue::spectrum
