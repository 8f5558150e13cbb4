#include "eigenglue/certificates.hpp"

#include "eigenglue/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <sstream>

namespace eigenglue::certificates {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Block {
  int cluster = 0; // index into s.clusters
  int first = 0;
  int dim = 0;
  double lbar = 0.0;
  double mass = 0.0;
  Mat phi; // V x dim, normalized eigenvectors phi_tilde
};

// Parameters of one cluster: P = R^T diag(m) R.
struct Param {
  Mat R;
  Vec m;
};

// Search state: y = phi R^T per block and q = sum lbar m_a y_a^2.
struct State {
  std::vector<Param> par;
  std::vector<Mat> y;
  Vec q;
};

double sup_defect(const Vec& q) { return (q.array() - 1.0).abs().maxCoeff(); }

State make_state(const std::vector<Block>& blocks, std::vector<Param> par) {
  State s;
  s.par = std::move(par);
  const int V = static_cast<int>(blocks.front().phi.rows());
  s.q = Vec::Zero(V);
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    s.y.push_back(blocks[c].phi * s.par[c].R.transpose());
    for (int a = 0; a < blocks[c].dim; ++a) s.q += blocks[c].lbar * s.par[c].m[a] * s.y[c].col(a).cwiseAbs2();
  }
  return s;
}

// Coordinate descent on the sup of |q - 1| over Givens angles and mass transfers.
void descend(const std::vector<Block>& blocks, State& st, int max_sweeps) {
  double best = sup_defect(st.q);
  double dth = 0.4, dm = 0.25;
  Vec qa;
  for (int sweep = 0; sweep < max_sweeps && (dth > 1e-5 || dm > 1e-5); ++sweep) {
    bool improved = false;
    for (std::size_t c = 0; c < blocks.size(); ++c) {
      const auto& B = blocks[c];
      auto& P = st.par[c];
      auto& y = st.y[c];
      for (int a = 0; a < B.dim; ++a)
        for (int b = a + 1; b < B.dim; ++b) {
          const Vec old = B.lbar * (P.m[a] * y.col(a).cwiseAbs2() + P.m[b] * y.col(b).cwiseAbs2());
          for (int sign : {1, -1}) {
            const double th = sign * dth, cs = std::cos(th), sn = std::sin(th);
            const Vec ya = cs * y.col(a) + sn * y.col(b), yb = -sn * y.col(a) + cs * y.col(b);
            qa = st.q - old + B.lbar * (P.m[a] * ya.cwiseAbs2() + P.m[b] * yb.cwiseAbs2());
            const double d = sup_defect(qa);
            if (d < best) {
              best = d;
              st.q = qa;
              y.col(a) = ya;
              y.col(b) = yb;
              const Eigen::RowVectorXd ra = cs * P.R.row(a) + sn * P.R.row(b), rb = -sn * P.R.row(a) + cs * P.R.row(b);
              P.R.row(a) = ra;
              P.R.row(b) = rb;
              improved = true;
              break;
            }
          }
          const Vec cur = B.lbar * (P.m[a] * y.col(a).cwiseAbs2() + P.m[b] * y.col(b).cwiseAbs2());
          for (int sign : {1, -1}) {
            const double delta = sign * dm * B.mass;
            const double ma = P.m[a] + delta, mb = P.m[b] - delta;
            if (ma < 0.0 || mb < 0.0) continue;
            qa = st.q - cur + B.lbar * (ma * y.col(a).cwiseAbs2() + mb * y.col(b).cwiseAbs2());
            const double d = sup_defect(qa);
            if (d < best) {
              best = d;
              st.q = qa;
              P.m[a] = ma;
              P.m[b] = mb;
              improved = true;
              break;
            }
          }
        }
    }
    if (!improved) {
      dth *= 0.5;
      dm *= 0.5;
    }
  }
}

Mat random_orthogonal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = N(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  for (int j = 0; j < d; ++j)
    if (qr.matrixQR()(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

std::vector<double> face_energies_and_defects(const EigenmapCertificate& c, const TriSurface& m,
                                              std::vector<double>& defect) {
  const int F = m.num_faces();
  std::vector<Eigen::Matrix2d> T(static_cast<std::size_t>(F), Eigen::Matrix2d::Zero());
  for (int a = 0; a < c.components(); ++a) {
    const auto g = variation::face_gradients(m, c.values.col(a));
    for (int f = 0; f < F; ++f) T[f] += g[f] * g[f].transpose();
  }
  std::vector<double> energy(static_cast<std::size_t>(F));
  defect.assign(static_cast<std::size_t>(F), 0.0);
  for (int f = 0; f < F; ++f) {
    const double tr = T[f].trace();
    energy[f] = tr;
    if (tr > 0.0) {
      const Eigen::Matrix2d T0 = T[f] - 0.5 * tr * Eigen::Matrix2d::Identity();
      defect[f] = std::sqrt(2.0) * T0.norm() / tr;
    }
  }
  return energy;
}

// Area-weighted average of a face field around each vertex.
std::vector<double> vertex_average(const TriSurface& m, const std::vector<double>& field) {
  std::vector<double> num(static_cast<std::size_t>(m.num_vertices()), 0.0), den(num.size(), 0.0);
  for (int f = 0; f < m.num_faces(); ++f) {
    const double A = m.face_area(f);
    for (int v : m.faces()[f]) {
      num[v] += A * field[f];
      den[v] += A;
    }
  }
  for (std::size_t v = 0; v < num.size(); ++v) num[v] = den[v] > 0.0 ? num[v] / den[v] : 0.0;
  return num;
}

} // namespace

void refresh(EigenmapCertificate& c, const spectrum::AssembledProblem& p, const SpectrumResult& s) {
  const double sq = std::sqrt(s.beta_total);
  const int V = static_cast<int>(s.eigenvectors.rows());
  Mat phi(V, static_cast<Eigen::Index>(c.indices.size()));
  Vec lam(static_cast<Eigen::Index>(c.indices.size()));
  for (std::size_t j = 0; j < c.indices.size(); ++j) {
    phi.col(static_cast<Eigen::Index>(j)) = sq * s.eigenvectors.col(c.indices[j]);
    lam[static_cast<Eigen::Index>(j)] = s.eigenvalues[c.indices[j]];
  }
  c.values = phi * c.coefficients.transpose();
  c.normalization_defect = (c.values.array().square().rowwise() * c.Lambda.transpose().array()).rowwise().sum() - 1.0;
  const Eigen::Map<const Vec> w(c.beta_tilde.data(), V);
  c.normalization_sup = c.normalization_defect.cwiseAbs().maxCoeff();
  c.normalization_l1 = w.dot(c.normalization_defect.cwiseAbs());
  c.normalization_mean = w.dot(c.normalization_defect);
  c.harmonic_residual.clear();
  const Mat Mphi = p.M * phi;
  for (int a = 0; a < c.components(); ++a) {
    const Vec KPhi = p.K * c.values.col(a);
    const Vec target = Mphi * (c.coefficients.row(a).transpose().cwiseProduct(lam));
    const double nk = KPhi.norm();
    c.harmonic_residual.push_back(nk > 0.0 ? (KPhi - target).norm() / nk : 0.0);
  }
}

EigenmapCertificate build_eigenmap(const spectrum::AssembledProblem& p, const SpectrumResult& s,
                                   const std::vector<double>& t, const BuildOptions& opt) {
  const int m = static_cast<int>(t.size());
  if (m < 1 || m > s.k()) throw ValidationError("build_eigenmap: weight count must be between 1 and k");
  if (s.eigenvectors.cols() != s.k() + 1) throw ValidationError("build_eigenmap: eigenvectors unavailable");
  for (double x : t)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("build_eigenmap: weights must be finite and nonnegative");
  const double B = s.beta_total;
  const auto nb = spectrum::normalized(s);

  EigenmapCertificate c;
  c.t = t;
  std::vector<Block> blocks;
  for (std::size_t ci = 0; ci < s.clusters.size(); ++ci) {
    const auto& C = s.clusters[ci];
    if (C.first > m) break;
    double mass = 0.0;
    for (int i = C.first; i <= std::min(C.last, m); ++i) mass += t[i - 1];
    if (mass <= 0.0) continue;
    Block b;
    b.cluster = static_cast<int>(ci);
    b.first = C.first;
    b.dim = C.size();
    b.mass = mass;
    double lb = 0.0, lo = nb[C.first], hi = nb[C.first];
    for (int i = C.first; i <= C.last; ++i) {
      lb += nb[i];
      lo = std::min(lo, nb[i]);
      hi = std::max(hi, nb[i]);
    }
    b.lbar = lb / b.dim;
    c.cluster_spread = std::max(c.cluster_spread, (hi - lo) / b.lbar);
    b.phi = std::sqrt(B) * s.eigenvectors.middleCols(C.first, b.dim);
    blocks.push_back(std::move(b));
  }
  if (blocks.empty()) throw ValidationError("build_eigenmap: infeasible mass split, no cluster carries positive weight");
  // Cluster-mean eigenvalues replace the individual ones; rescale masses so sum lbar_c M_c = 1.
  double total = 0.0;
  for (const auto& b : blocks) total += b.lbar * b.mass;
  const double scale = 1.0 / total;
  for (auto& b : blocks) b.mass *= scale;
  for (const auto& b : blocks) c.cluster_mass.push_back(b.mass);

  std::vector<Param> raw;
  for (const auto& b : blocks) {
    Param P{Mat::Identity(b.dim, b.dim), Vec::Zero(b.dim)};
    for (int a = 0; a < b.dim; ++a) {
      const int i = b.first + a;
      if (opt.rule == ScaleRule::Uniform)
        P.m[a] = b.mass / b.dim;
      else
        P.m[a] = i <= m ? t[i - 1] * scale : 0.0;
    }
    raw.push_back(std::move(P));
  }
  State best = make_state(blocks, raw);
  c.raw_normalization_sup = sup_defect(best.q);

  bool has_freedom = false;
  for (const auto& b : blocks) has_freedom = has_freedom || b.dim > 1;
  if (opt.refine && has_freedom) {
    std::mt19937_64 rng(opt.seed);
    std::vector<std::vector<Param>> starts{raw};
    std::vector<Param> even;
    for (const auto& b : blocks) even.push_back({Mat::Identity(b.dim, b.dim), Vec::Constant(b.dim, b.mass / b.dim)});
    starts.push_back(even);
    std::exponential_distribution<double> Ex(1.0);
    for (int n = 0; n < opt.starts; ++n) {
      std::vector<Param> r;
      for (const auto& b : blocks) {
        Vec mm(b.dim);
        for (int a = 0; a < b.dim; ++a) mm[a] = Ex(rng);
        r.push_back({random_orthogonal(b.dim, rng), mm * (b.mass / mm.sum())});
      }
      starts.push_back(std::move(r));
    }
    double best_sup = c.raw_normalization_sup;
    for (auto& start : starts) {
      State st = make_state(blocks, start);
      descend(blocks, st, opt.max_sweeps);
      const double d = sup_defect(st.q);
      if (d < best_sup) {
        best_sup = d;
        best = std::move(st);
      }
    }
  }

  int n = 0;
  for (const auto& b : blocks) n += b.dim;
  for (const auto& b : blocks)
    for (int a = 0; a < b.dim; ++a) c.indices.push_back(b.first + a);
  c.coefficients = Mat::Zero(n, n);
  c.Lambda.resize(n);
  int row = 0;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    const auto& P = best.par[bi];
    for (int a = 0; a < b.dim; ++a, ++row) {
      c.coefficients.block(row, row - a, 1, b.dim) = std::sqrt(P.m[a]) * P.R.row(a);
      c.Lambda[row] = b.lbar;
      c.component_cluster.push_back(b.cluster);
    }
  }
  const auto& w = p.M.diagonal();
  c.beta_tilde.resize(static_cast<std::size_t>(w.size()));
  if (p.lumped) {
    for (Eigen::Index v = 0; v < w.size(); ++v) c.beta_tilde[v] = w[v] / B;
  } else {
    const Vec row_sums = p.M * Vec::Ones(p.dim);
    for (Eigen::Index v = 0; v < w.size(); ++v) c.beta_tilde[v] = row_sums[v] / B;
  }
  refresh(c, p, s);
  return c;
}

ConformalityReport conformality_defect(const EigenmapCertificate& c, const TriSurface& m, double branch_floor) {
  if (c.values.rows() != m.num_vertices()) throw ValidationError("conformality_defect: certificate does not match the mesh");
  ConformalityReport r;
  r.branch_floor = branch_floor;
  r.energy = face_energies_and_defects(c, m, r.defect);
  double area = 0.0, mean_energy = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    const double A = m.face_area(f);
    area += A;
    r.mean += A * r.defect[f];
    mean_energy += A * r.energy[f];
    r.sup = std::max(r.sup, r.defect[f]);
  }
  r.mean /= area;
  mean_energy /= area;
  const auto ve = vertex_average(m, r.energy);
  for (int v = 0; v < m.num_vertices(); ++v)
    if (ve[v] < branch_floor * mean_energy) r.branch_candidates.push_back(v);
  return r;
}

PairProbe pair_identification_probe(const EigenmapCertificate& c, const TriSurface& m, int p, int q,
                                    double branch_floor) {
  if (p < 0 || q < 0 || p >= m.num_vertices() || q >= m.num_vertices())
    throw ValidationError("pair_identification_probe: vertex out of range");
  PairProbe r;
  r.distance = (c.values.row(p) - c.values.row(q)).norm();
  std::vector<double> defect;
  const auto e = face_energies_and_defects(c, m, defect);
  const auto ve = vertex_average(m, e);
  double area = 0.0, mean = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    area += m.face_area(f);
    mean += m.face_area(f) * e[f];
  }
  r.gradient = std::sqrt(ve[p]);
  r.branch_candidate = ve[p] < branch_floor * mean / area;
  return r;
}

std::string to_json(const EigenmapCertificate& c, const ConformalityReport& r) {
  nlohmann::ordered_json j;
  j["type"] = "EigenmapCertificate";
  j["components"] = c.components();
  j["indices"] = c.indices;
  j["Lambda"] = std::vector<double>(c.Lambda.data(), c.Lambda.data() + c.Lambda.size());
  j["weights"] = c.t;
  j["cluster_mass"] = c.cluster_mass;
  auto C = nlohmann::ordered_json::array();
  for (int i = 0; i < c.coefficients.rows(); ++i) {
    std::vector<double> row(c.coefficients.cols());
    for (int k = 0; k < c.coefficients.cols(); ++k) row[k] = c.coefficients(i, k);
    C.push_back(row);
  }
  j["coefficients"] = std::move(C);
  j["normalization_defect"] = {{"sup", c.normalization_sup},
                               {"l1", c.normalization_l1},
                               {"mean", c.normalization_mean},
                               {"raw_sup", c.raw_normalization_sup}};
  j["harmonic_residual"] = c.harmonic_residual;
  j["cluster_spread"] = c.cluster_spread;
  j["conformality_defect"] = {{"mean", r.mean}, {"sup", r.sup}};
  j["branch_floor"] = r.branch_floor;
  j["branch_candidates"] = r.branch_candidates;
  return j.dump(2);
}

std::string defect_csv(const ConformalityReport& r) {
  std::ostringstream o;
  o.precision(17);
  o << "face,defect,energy\n";
  for (std::size_t f = 0; f < r.defect.size(); ++f) o << f << ',' << r.defect[f] << ',' << r.energy[f] << '\n';
  return o.str();
}

} // namespace eigenglue::certificates
