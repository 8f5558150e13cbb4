#include "eigenglue/variation.hpp"

#include "eigenglue/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace eigenglue::variation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<bool> mask_of(const std::vector<double>& a) {
  std::vector<bool> m;
  for (double x : a) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("functional coefficients must be finite and nonnegative");
    m.push_back(x > 0.0);
  }
  bool any = false;
  for (bool b : m) any = any || b;
  if (!any) throw ValidationError("functional has no active coordinate");
  return m;
}

std::string coeffs(const std::vector<double>& a) {
  std::ostringstream o;
  for (std::size_t i = 0; i < a.size(); ++i) o << (i ? "," : "") << a[i];
  return o.str();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("functional: bad coefficient '" + tok + "'");
    }
  }
  if (out.empty()) throw ValidationError("functional: empty coefficient list");
  return out;
}

// Haar-distributed orthogonal matrix.
Eigen::MatrixXd random_orthogonal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = N(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

} // namespace

FunctionalSpec inverse_power(std::vector<double> a, double s) {
  if (!(s > 0.0)) throw ValidationError("inverse power exponent must be positive");
  FunctionalSpec f;
  f.decreasing = mask_of(a);
  f.m = static_cast<int>(a.size());
  f.name = s == 1.0 ? "inv:" + coeffs(a) : "pow:" + coeffs(a) + "@" + std::to_string(s);
  f.F = [a, s](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) v += a[i] * std::pow(x[i], -s);
    return v;
  };
  f.dF = [a, s](const std::vector<double>& x) {
    std::vector<double> d(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) d[i] = -s * a[i] * std::pow(x[i], -s - 1.0);
    return d;
  };
  return f;
}

FunctionalSpec exponential(std::vector<double> a, double t) {
  if (!(t > 0.0)) throw ValidationError("exponential rate must be positive");
  FunctionalSpec f;
  f.decreasing = mask_of(a);
  f.m = static_cast<int>(a.size());
  f.name = "exp:" + coeffs(a) + "@" + std::to_string(t);
  f.F = [a, t](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) v += a[i] * std::exp(-t * x[i]);
    return v;
  };
  f.dF = [a, t](const std::vector<double>& x) {
    std::vector<double> d(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) d[i] = -t * a[i] * std::exp(-t * x[i]);
    return d;
  };
  return f;
}

FunctionalSpec neg_log(std::vector<double> a) {
  FunctionalSpec f;
  f.decreasing = mask_of(a);
  f.m = static_cast<int>(a.size());
  f.name = "log:" + coeffs(a);
  f.F = [a](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) v -= a[i] * std::log(x[i]);
    return v;
  };
  f.dF = [a](const std::vector<double>& x) {
    std::vector<double> d(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) d[i] = -a[i] / x[i];
    return d;
  };
  return f;
}

FunctionalSpec parse_functional(const std::string& text) {
  if (text.empty()) throw ValidationError("functional: empty description");
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    // Sum of invK terms.
    std::vector<double> a;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
      if (tok.rfind("inv", 0) != 0 || tok.size() == 3) throw ValidationError("functional: unknown term '" + tok + "'");
      int k = 0;
      try {
        std::size_t used = 0;
        k = std::stoi(tok.substr(3), &used);
        if (used != tok.size() - 3) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ValidationError("functional: unknown term '" + tok + "'");
      }
      if (k < 1 || k > 64) throw ValidationError("functional: index out of range in '" + tok + "'");
      if (static_cast<int>(a.size()) < k) a.resize(static_cast<std::size_t>(k), 0.0);
      a[static_cast<std::size_t>(k - 1)] += 1.0;
    }
    return inverse_power(a);
  }
  const std::string family = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);
  double param = 1.0;
  if (const auto at = rest.find('@'); at != std::string::npos) {
    param = parse_list(rest.substr(at + 1)).at(0);
    rest = rest.substr(0, at);
  }
  const auto a = parse_list(rest);
  if (family == "inv") return inverse_power(a);
  if (family == "pow") return inverse_power(a, param);
  if (family == "exp") return exponential(a, param);
  if (family == "log") return neg_log(a);
  throw ValidationError("functional: unknown family '" + family + "'");
}

HypothesisReport check_hypothesis(const FunctionalSpec& spec, int per_axis) {
  HypothesisReport r;
  if (static_cast<int>(spec.decreasing.size()) != spec.m) {
    r.ok = false;
    r.violations.push_back("mask size differs from m");
    return r;
  }
  // Log-spaced grid from 0.1 to 1000 on every axis, enumerated as an odometer
  // (truncated to a bounded number of points for large m).
  std::vector<double> axis;
  for (int i = 0; i < per_axis; ++i) axis.push_back(0.1 * std::pow(1e4, per_axis > 1 ? double(i) / (per_axis - 1) : 0.5));
  std::vector<int> idx(static_cast<std::size_t>(spec.m), 0);
  const int cap = 20000;
  for (int n = 0; n < cap; ++n) {
    std::vector<double> x(static_cast<std::size_t>(spec.m));
    for (int i = 0; i < spec.m; ++i) x[i] = axis[idx[i]];
    const auto d = spec.dF(x);
    ++r.samples;
    for (int i = 0; i < spec.m; ++i) {
      const bool bad = spec.decreasing[i] ? !(d[i] < 0.0) : d[i] != 0.0;
      if (bad && r.violations.size() < 10) {
        std::ostringstream o;
        o << "coordinate " << i + 1 << " has partial " << d[i] << " at sample " << n;
        r.violations.push_back(o.str());
      }
      r.ok = r.ok && !bad;
    }
    int j = 0;
    while (j < spec.m && ++idx[j] == per_axis) idx[j++] = 0;
    if (j == spec.m) break;
  }
  return r;
}

EvalReport eval_E(const FunctionalSpec& spec, const SpectrumResult& s) {
  if (s.k() < spec.m) throw ValidationError("eval_E: spectrum has fewer than m nonzero modes");
  const auto nb = spectrum::normalized(s);
  EvalReport r;
  r.lambda_bar.assign(nb.begin() + 1, nb.begin() + 1 + spec.m);
  bool boundary = false;
  for (double x : r.lambda_bar) boundary = boundary || !(x > 0.0);
  r.E = boundary ? kInf : spec.F(r.lambda_bar);
  auto x0 = r.lambda_bar;
  x0[0] = 0.0;
  r.E0 = spec.F(x0);
  if (std::isnan(r.E0)) r.E0 = kInf;
  r.gap = r.E < r.E0;
  return r;
}

std::vector<Eigen::Vector2d> face_gradients(const TriSurface& m, const Eigen::VectorXd& phi) {
  if (phi.size() != m.num_vertices()) throw ValidationError("face_gradients: size mismatch");
  std::vector<Eigen::Vector2d> g(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& F = m.faces()[f];
    const auto P = metric::face_chart(m.face_lengths(f));
    Eigen::Matrix2d E;
    E << P[1] - P[0], P[2] - P[0];
    const Eigen::Vector2d d(phi[F[1]] - phi[F[0]], phi[F[2]] - phi[F[0]]);
    g[f] = E.transpose().partialPivLu().solve(d);
  }
  return g;
}

MetricPerturbation stress_tensor(const TriSurface& m, const Eigen::VectorXd& phi) {
  const auto g = face_gradients(m, phi);
  MetricPerturbation T;
  T.h.reserve(g.size());
  for (const auto& v : g) {
    const double e = 0.5 * v.squaredNorm();
    T.h.push_back({e - v.x() * v.x(), -v.x() * v.y(), e - v.y() * v.y()});
  }
  return T;
}

double stress_pairing(const TriSurface& m, const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                      const MetricPerturbation& h) {
  if (static_cast<int>(h.h.size()) != m.num_faces()) throw ValidationError("stress_pairing: perturbation size mismatch");
  const auto a = face_gradients(m, phi), b = face_gradients(m, psi);
  double s = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& H = h.h[f];
    const double tr = H[0] + H[2];
    const double hab = a[f].x() * (H[0] * b[f].x() + H[1] * b[f].y()) + a[f].y() * (H[1] * b[f].x() + H[2] * b[f].y());
    s += m.face_area(f) * (0.5 * tr * a[f].dot(b[f]) - hab);
  }
  return s;
}

DerivativeReport directional_derivative(const TriSurface& m, const SpectrumResult& s, const MetricPerturbation& h,
                                        const std::vector<double>& b, int k) {
  if (k < 1 || k > s.k()) throw ValidationError("directional_derivative: k out of range");
  if (static_cast<int>(b.size()) != m.num_vertices()) throw ValidationError("directional_derivative: b size mismatch");
  if (s.eigenvectors.cols() != s.k() + 1 || s.eigenvectors.rows() != m.num_vertices())
    throw ValidationError("directional_derivative: eigenvectors unavailable");
  DerivativeReport r;
  r.k = k;
  for (std::size_t c = 0; c < s.clusters.size(); ++c)
    if (k >= s.clusters[c].first && k <= s.clusters[c].last) r.cluster = static_cast<int>(c);
  const auto& C = s.clusters[static_cast<std::size_t>(r.cluster)];
  if (r.cluster + 1 == static_cast<int>(s.clusters.size()) && !s.last_cluster_closed)
    throw ValidationError("directional_derivative: cluster of lambda_" + std::to_string(k) + " may continue past index " +
                          std::to_string(C.last) + "; candidate cluster [" + std::to_string(C.first) + ", " +
                          std::to_string(C.last + 1) + "+], solve more modes");
  r.first = C.first;
  r.last = C.last;
  const int d = C.size();
  const double B = s.beta_total;
  double lam = 0.0;
  for (int i = C.first; i <= C.last; ++i) lam += s.eigenvalues[i];
  const double lbar = lam / d * B;
  double b11 = 0.0;
  for (double x : b) b11 += x;
  const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));

  r.Q.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const Eigen::VectorXd phi = s.eigenvectors.col(C.first + i), psi = s.eigenvectors.col(C.first + j);
      const double bij = (bv.array() * phi.array() * psi.array()).sum();
      const double q = B * stress_pairing(m, phi, psi, h) + lbar * ((i == j ? b11 / B : 0.0) - bij);
      r.Q(i, j) = r.Q(j, i) = q;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.Q, Eigen::EigenvaluesOnly);
  r.derivatives.assign(es.eigenvalues().data(), es.eigenvalues().data() + d);
  r.derivative = r.derivatives[static_cast<std::size_t>(k - C.first)];
  return r;
}

std::string to_json(const DerivativeReport& r) {
  nlohmann::ordered_json j;
  j["type"] = "DerivativeReport";
  j["k"] = r.k;
  j["cluster"] = {r.first, r.last};
  auto Q = nlohmann::ordered_json::array();
  for (int i = 0; i < r.Q.rows(); ++i) {
    std::vector<double> row(r.Q.cols());
    for (int c = 0; c < r.Q.cols(); ++c) row[c] = r.Q(i, c);
    Q.push_back(row);
  }
  j["restricted_form"] = std::move(Q);
  j["one_sided_derivatives"] = r.derivatives;
  j["derivative"] = r.derivative;
  return j.dump(2);
}

std::vector<SubgradientElement> subgradient_elements(const TriSurface& m, const FunctionalSpec& spec,
                                                     const SpectrumResult& s, const SubgradientOptions& opt) {
  if (s.k() < spec.m) throw ValidationError("subgradient_elements: spectrum has fewer than m nonzero modes");
  const auto nb = spectrum::normalized(s);
  const std::vector<double> lb(nb.begin() + 1, nb.begin() + 1 + spec.m);
  const auto d = spec.dF(lb);
  std::vector<SubgradientElement> out;
  bool any = false;
  for (double x : d) any = any || x != 0.0;
  if (!any) return out;

  const double B = s.beta_total;
  const int V = m.num_vertices();
  auto clusters = s.clusters;
  if (opt.cluster_tau > 0.0) {
    bool closed = true;
    clusters = spectrum::cluster_indices(s.eigenvalues, s.next_eigenvalue, opt.cluster_tau, closed);
  }
  // Clusters that meet 1..m.
  std::vector<spectrum::Cluster> used;
  for (const auto& c : clusters)
    if (c.first <= spec.m) used.push_back(c);

  // Per-face gradients of every eigenvector in play, once.
  const int top = used.back().last;
  std::vector<std::vector<Eigen::Vector2d>> grads(static_cast<std::size_t>(top + 1));
  for (int i = 1; i <= top; ++i) grads[i] = face_gradients(m, s.eigenvectors.col(i));
  std::vector<double> area(static_cast<std::size_t>(m.num_faces()));
  for (int f = 0; f < m.num_faces(); ++f) area[f] = m.face_area(f);

  // Element from per-index mixing rows: phi'_i = sum_j R(i, j) phi_j within the cluster.
  // Averaged elements replace phi'_i phi'_i by the cluster mean of phi_j phi_j.
  auto element = [&](const std::vector<Eigen::MatrixXd>& rot, bool average, std::string tag) {
    SubgradientElement e;
    e.selection = std::move(tag);
    e.stress.h.assign(static_cast<std::size_t>(m.num_faces()), {0.0, 0.0, 0.0});
    e.density = Eigen::VectorXd::Zero(V);
    for (std::size_t c = 0; c < used.size(); ++c) {
      const auto& C = used[c];
      const int dim = C.size();
      for (int i = C.first; i <= std::min(C.last, spec.m); ++i) {
        const double di = d[i - 1];
        if (di == 0.0) continue;
        const double li = lb[i - 1];
        // Weights w_jl so that phi'_i phi'_i = sum_jl w_jl phi_j phi_l.
        Eigen::MatrixXd W(dim, dim);
        if (average) {
          W = Eigen::MatrixXd::Identity(dim, dim) / dim;
        } else {
          const Eigen::VectorXd r = rot[c].row(i - C.first).transpose();
          W = r * r.transpose();
        }
        for (int a = 0; a < dim; ++a)
          for (int bb = 0; bb < dim; ++bb) {
            const double w = W(a, bb);
            if (w == 0.0) continue;
            const auto& ga = grads[C.first + a];
            const auto& gb = grads[C.first + bb];
            for (int f = 0; f < m.num_faces(); ++f) {
              const double dot = ga[f].dot(gb[f]);
              auto& T = e.stress.h[f];
              const double c0 = di * B * w;
              T[0] += c0 * (0.5 * dot - ga[f].x() * gb[f].x());
              T[1] += c0 * (-0.5 * (ga[f].x() * gb[f].y() + ga[f].y() * gb[f].x()));
              T[2] += c0 * (0.5 * dot - ga[f].y() * gb[f].y());
            }
            e.density.array() -= di * li * w * s.eigenvectors.col(C.first + a).array() * s.eigenvectors.col(C.first + bb).array();
          }
        e.density.array() += di * li / B;
      }
    }
    return e;
  };

  std::vector<Eigen::MatrixXd> rot;
  for (const auto& C : used) rot.push_back(Eigen::MatrixXd::Identity(C.size(), C.size()));
  out.push_back(element(rot, false, "identity"));
  bool degenerate = false;
  for (const auto& C : used) degenerate = degenerate || C.size() > 1;
  if (!degenerate) return out;

  std::mt19937_64 rng(opt.seed);
  for (int n = 0; n < opt.samples; ++n) {
    for (std::size_t c = 0; c < used.size(); ++c) rot[c] = random_orthogonal(used[c].size(), rng);
    out.push_back(element(rot, false, "sample " + std::to_string(n)));
  }
  if (opt.include_average) out.push_back(element(rot, true, "cluster-average"));
  return out;
}

ClusterWeights cluster_weights(const FunctionalSpec& spec, const std::vector<double>& lambda_bar) {
  if (static_cast<int>(lambda_bar.size()) < spec.m) throw ValidationError("cluster_weights: too few eigenvalues");
  const std::vector<double> x(lambda_bar.begin(), lambda_bar.begin() + spec.m);
  for (double v : x)
    if (!(v > 0.0)) throw ValidationError("cluster_weights: eigenvalues must be positive");
  ClusterWeights w;
  w.partials = spec.dF(x);
  double denom = 0.0;
  for (int i = 0; i < spec.m; ++i) denom -= x[i] * w.partials[i];
  if (!(denom > 0.0)) throw ValidationError("cluster_weights: all partial derivatives vanish");
  w.c = 1.0 / denom;
  for (int i = 0; i < spec.m; ++i) w.t.push_back(-w.c * w.partials[i]);
  // Clusters by the default tolerance on the given values.
  Eigen::VectorXd ev(spec.m + 1);
  ev[0] = 0.0;
  for (int i = 0; i < spec.m; ++i) ev[i + 1] = x[i];
  bool closed = true;
  const auto cl = spectrum::cluster_indices(ev, kInf, 1e-6, closed);
  for (std::size_t c = 0; c < cl.size(); ++c) {
    double mass = 0.0;
    for (int i = cl[c].first; i <= cl[c].last; ++i) {
      w.cluster_of.push_back(static_cast<int>(c));
      mass += w.t[i - 1];
    }
    w.cluster_mass.push_back(mass);
  }
  return w;
}

ClusterWeights cluster_weights(const FunctionalSpec& spec, const SpectrumResult& s) {
  if (s.k() < spec.m) throw ValidationError("cluster_weights: spectrum has fewer than m nonzero modes");
  const auto nb = spectrum::normalized(s);
  auto w = cluster_weights(spec, std::vector<double>(nb.begin() + 1, nb.begin() + 1 + spec.m));
  // Cluster structure from the solved spectrum (relative tolerance tau).
  w.cluster_of.clear();
  w.cluster_mass.clear();
  int c_idx = -1;
  for (const auto& C : s.clusters) {
    if (C.first > spec.m) break;
    ++c_idx;
    double mass = 0.0;
    for (int i = C.first; i <= std::min(C.last, spec.m); ++i) {
      w.cluster_of.push_back(c_idx);
      mass += w.t[i - 1];
    }
    w.cluster_mass.push_back(mass);
  }
  return w;
}

} // namespace eigenglue::variation
