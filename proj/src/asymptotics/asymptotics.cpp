#include "eigenglue/asymptotics.hpp"

#include "eigenglue/error.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

namespace eigenglue::asymptotics {

namespace {

using json = nlohmann::ordered_json;

void check_eps(const std::vector<double>& eps) {
  if (eps.empty()) throw ValidationError("sweep: empty eps list");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0) || !std::isfinite(eps[i])) throw ValidationError("sweep: eps must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ValidationError("sweep: eps must be strictly decreasing");
  }
}

double longest_edge(const TriSurface& m) {
  double h = 0.0;
  for (double x : m.edge_lengths()) h = std::max(h, x);
  return h;
}

double inserted_edge_max(const TriSurface& m, const mesh::SurgeryReport& r) {
  double h = 0.0;
  for (int f = r.inserted_face_begin; f < r.inserted_face_end; ++f)
    for (int e : m.face_edges()[static_cast<std::size_t>(f)]) h = std::max(h, m.edge_length(e));
  return h;
}

double rim_edge_max(const TriSurface& m, const std::vector<int>& rim) {
  double h = 0.0;
  for (std::size_t i = 0; i + 1 < rim.size(); ++i) {
    const int e = m.find_edge(rim[i], rim[i + 1]);
    if (e >= 0) h = std::max(h, m.edge_length(e));
  }
  if (rim.size() > 2) {
    const int e = m.find_edge(rim.back(), rim.front());
    if (e >= 0) h = std::max(h, m.edge_length(e));
  }
  return h;
}

std::vector<double> tail(const spectrum::SpectrumResult& s, int k) {
  std::vector<double> v;
  for (int i = 1; i <= k; ++i) v.push_back(s.eigenvalues[i]);
  return v;
}

void record_certificates(SweepPoint& pt, const spectrum::SpectrumResult& s) {
  for (double r : s.residuals) pt.max_residual = std::max(pt.max_residual, r);
  pt.orthonormality_defect = std::max(pt.orthonormality_defect, s.orthonormality_defect);
}

template <class Fn>
void run_points(std::vector<SweepPoint>& pts, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < pts.size();) {
      try {
        fn(pts[i]);
        pts[i].ok = true;
      } catch (const std::exception& e) {
        pts[i].ok = false;
        pts[i].error = e.what();
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(pts.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::vector<SweepPoint> make_points(const std::vector<double>& eps) {
  std::vector<SweepPoint> pts(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) pts[i].eps = eps[i];
  return pts;
}

json fit_json(const RateFit& f) {
  json j;
  j["points"] = f.points;
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["slope_ci95"] = {f.slope_low, f.slope_high};
  j["r2"] = f.r2;
  return j;
}

} // namespace

RateFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> X, Y;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      X.push_back(std::log(x[i]));
      Y.push_back(std::log(y[i]));
    }
  RateFit f;
  f.points = static_cast<int>(X.size());
  if (f.points < 2) return f;
  const double n = f.points;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < f.points; ++i) {
    mx += X[i] / n;
    my += Y[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < f.points; ++i) {
    sxx += (X[i] - mx) * (X[i] - mx);
    sxy += (X[i] - mx) * (Y[i] - my);
    syy += (Y[i] - my) * (Y[i] - my);
  }
  if (!(sxx > 0.0)) {
    f.points = 0;
    return f;
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (int i = 0; i < f.points; ++i) {
    const double r = Y[i] - (f.intercept + f.slope * X[i]);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (f.points > 2) {
    const double se = std::sqrt(sse / (n - 2.0) / sxx);
    const double t = boost::math::quantile(boost::math::complement(boost::math::students_t(n - 2.0), 0.025));
    f.slope_low = f.slope - t * se;
    f.slope_high = f.slope + t * se;
  } else {
    f.slope_low = f.slope_high = f.slope;
  }
  return f;
}

spectrum::SpectrumResult neumann_spectrum(const TriSurface& m, int k, const spectrum::SolveOptions& opt) {
  if (m.is_closed()) throw ValidationError("neumann_spectrum: surface has no boundary");
  return spectrum::solve(spectrum::assemble(m, metric::area_measure(m), spectrum::ProblemKind::Laplace), k, opt);
}

SweepRecord handle_deficit_sweep(const TriSurface& base, int p, int q, const std::vector<double>& eps,
                                 const HandleSweepOptions& opt) {
  check_eps(eps);
  if (opt.k < 1 || opt.upper_index < 1 || opt.upper_index > opt.k)
    throw ValidationError("handle sweep: need 1 <= upper_index <= k");
  SweepRecord rec;
  rec.kind = "handle";
  rec.l = opt.l;
  rec.n_theta = opt.n_theta;
  rec.upper_index = opt.upper_index;
  rec.base_vertices = base.num_vertices();
  rec.h_base = longest_edge(base);
  const auto sb =
      spectrum::solve(spectrum::assemble(base, metric::area_measure(base), spectrum::ProblemKind::Laplace), opt.k, opt.solve);
  rec.base = tail(sb, opt.k);
  rec.points = make_points(eps);
  const int genus0 = base.genus();

  run_points(rec.points, opt.jobs, [&](SweepPoint& pt) {
    auto r = mesh::attach_handle(base, p, q, pt.eps, opt.l, opt.n_theta);
    const auto& m = r.surface;
    pt.vertices = m.num_vertices();
    pt.genus = m.genus();
    if (pt.genus != genus0 + 1) throw NumericalError("handle did not raise the genus");
    pt.neck_rows = r.report.n_rows;
    if (pt.neck_rows < opt.min_neck_rows)
      throw ValidationError("neck has " + std::to_string(pt.neck_rows) + " rows, need " + std::to_string(opt.min_neck_rows));
    pt.h_neck = inserted_edge_max(m, r.report);
    pt.h_rim = std::max(rim_edge_max(m, r.report.rim_p), rim_edge_max(m, r.report.rim_q));
    const auto s = spectrum::solve(spectrum::assemble(m, metric::area_measure(m), spectrum::ProblemKind::Laplace), opt.k,
                                   opt.solve);
    record_certificates(pt, s);
    pt.glued = tail(s, opt.k);
    for (int i = 0; i < opt.k; ++i) pt.deficit.push_back(rec.base[i] - pt.glued[i]);
    pt.sup_ratio = s.eigenvectors.col(1).cwiseAbs().maxCoeff() * std::sqrt(s.beta_total);
    pt.boundary_length = m.boundary_length();

    const auto ex = mesh::excise_disks(base, p, q, pt.eps);
    const auto sn = neumann_spectrum(ex.surface, opt.k, opt.solve);
    record_certificates(pt, sn);
    pt.neumann = tail(sn, opt.k);
  });

  std::vector<double> e, d1, xu, yu, xs, ys;
  for (const auto& pt : rec.points) {
    if (!pt.ok) continue;
    const double L = std::log(1.0 / pt.eps);
    e.push_back(pt.eps);
    d1.push_back(std::abs(pt.deficit[0]));
    xu.push_back(1.0 / L);
    yu.push_back(pt.glued[opt.upper_index - 1] - rec.base[opt.upper_index - 1]);
    xs.push_back(L);
    ys.push_back(pt.sup_ratio);
  }
  rec.lower_deficit = fit_loglog(e, d1);
  rec.upper_deviation = fit_loglog(xu, yu);
  rec.sup_growth = fit_loglog(xs, ys);

  // C from the two coarsest points; the finer points test the eps^2 law out of sample.
  int used = 0, ok = 0;
  for (const auto& pt : rec.points) {
    if (!pt.ok) continue;
    ++ok;
    if (used < 2) {
      rec.neumann_C = std::max(rec.neumann_C, (rec.base[0] - pt.neumann[0]) / (pt.eps * pt.eps));
      ++used;
    }
  }
  rec.neumann_holds = ok >= 3;
  for (const auto& pt : rec.points)
    if (pt.ok && pt.neumann[0] < rec.base[0] - rec.neumann_C * pt.eps * pt.eps - 1e-12 * rec.base[0])
      rec.neumann_holds = false;
  return rec;
}

SweepRecord strip_deficit_sweep(const TriSurface& base, int p, int q, const std::vector<double>& eps,
                                const StripSweepOptions& opt) {
  check_eps(eps);
  if (base.is_closed()) throw ValidationError("closed surface has no Steklov problem");
  if (opt.k < 1) throw ValidationError("strip sweep: need k >= 1");
  SweepRecord rec;
  rec.kind = "strip";
  rec.l = opt.l;
  rec.upper_index = 1;
  rec.base_vertices = base.num_vertices();
  rec.h_base = longest_edge(base);
  const auto sb = spectrum::solve(
      spectrum::assemble(base, metric::boundary_measure(base), spectrum::ProblemKind::Steklov), opt.k, opt.solve);
  rec.base = tail(sb, opt.k);
  rec.points = make_points(eps);
  const double L0 = base.boundary_length();

  run_points(rec.points, opt.jobs, [&](SweepPoint& pt) {
    auto r = mesh::attach_strip(base, p, q, pt.eps, opt.l, opt.orientation);
    const auto& m = r.surface;
    pt.vertices = m.num_vertices();
    pt.genus = m.genus();
    pt.neck_rows = r.report.n_rows;
    pt.h_neck = inserted_edge_max(m, r.report);
    pt.h_rim = std::max(rim_edge_max(m, r.report.rim_p), rim_edge_max(m, r.report.rim_q));
    const auto s = spectrum::solve(spectrum::assemble(m, metric::boundary_measure(m), spectrum::ProblemKind::Steklov),
                                   opt.k, opt.solve);
    record_certificates(pt, s);
    pt.glued = tail(s, opt.k);
    for (int i = 0; i < opt.k; ++i) pt.deficit.push_back(rec.base[i] - pt.glued[i]);
    pt.boundary_length = m.boundary_length();
    pt.expected_boundary_length = L0 - 4.0 * pt.eps + 2.0 * opt.l * pt.eps;
  });

  std::vector<double> e, d1, xr;
  for (const auto& pt : rec.points) {
    if (!pt.ok) continue;
    e.push_back(pt.eps);
    d1.push_back(std::abs(pt.deficit[0]));
    xr.push_back(pt.eps * std::sqrt(std::log(1.0 / pt.eps)));
  }
  rec.lower_deficit = fit_loglog(e, d1);
  rec.strip_rate = fit_loglog(xr, d1);
  return rec;
}

std::string sweep_csv(const SweepRecord& r) {
  const std::size_t k = r.base.size();
  std::ostringstream o;
  o.precision(17);
  o << "eps,ln_eps,ok,vertices,genus,neck_rows,h_neck,h_rim";
  for (std::size_t i = 1; i <= k; ++i) o << ",glued_" << i;
  for (std::size_t i = 1; i <= k; ++i) o << ",deficit_" << i;
  o << ",ln_abs_deficit_1";
  if (r.kind == "handle")
    for (std::size_t i = 1; i <= k; ++i) o << ",neumann_" << i;
  o << ",sup_ratio,boundary_length,expected_boundary_length,max_residual,error\n";
  for (const auto& pt : r.points) {
    o << pt.eps << ',' << std::log(pt.eps) << ',' << (pt.ok ? "true" : "false") << ',' << pt.vertices << ','
      << pt.genus << ',' << pt.neck_rows << ',' << pt.h_neck << ',' << pt.h_rim;
    auto col = [&](const std::vector<double>& v) {
      for (std::size_t i = 0; i < k; ++i) {
        o << ',';
        if (i < v.size()) o << v[i];
      }
    };
    col(pt.glued);
    col(pt.deficit);
    o << ',';
    if (!pt.deficit.empty() && pt.deficit[0] != 0.0) o << std::log(std::abs(pt.deficit[0]));
    if (r.kind == "handle") col(pt.neumann);
    o << ',' << pt.sup_ratio << ',' << pt.boundary_length << ',' << pt.expected_boundary_length << ','
      << pt.max_residual << ',';
    std::string err = pt.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    if (!err.empty()) o << '"' << err << '"';
    o << '\n';
  }
  return o.str();
}

std::string to_json(const SweepRecord& r) {
  json j;
  j["kind"] = r.kind;
  j["l"] = r.l;
  if (r.kind == "handle") j["n_theta"] = r.n_theta;
  j["base_vertices"] = r.base_vertices;
  j["h_base"] = r.h_base;
  j["base"] = r.base;
  j["points"] = json::array();
  for (const auto& pt : r.points) {
    json p;
    p["eps"] = pt.eps;
    p["ok"] = pt.ok;
    if (!pt.ok) p["error"] = pt.error;
    p["vertices"] = pt.vertices;
    p["genus"] = pt.genus;
    p["neck_rows"] = pt.neck_rows;
    p["h_neck"] = pt.h_neck;
    p["h_rim"] = pt.h_rim;
    p["glued"] = pt.glued;
    p["deficit"] = pt.deficit;
    if (r.kind == "handle") {
      p["neumann"] = pt.neumann;
      p["sup_ratio"] = pt.sup_ratio;
    } else {
      p["boundary_length"] = pt.boundary_length;
      p["expected_boundary_length"] = pt.expected_boundary_length;
    }
    p["max_residual"] = pt.max_residual;
    p["orthonormality_defect"] = pt.orthonormality_defect;
    j["points"].push_back(p);
  }
  json fits;
  fits["lower_deficit_vs_eps"] = fit_json(r.lower_deficit);
  if (r.kind == "handle") {
    fits["upper_deviation_vs_inv_log"] = fit_json(r.upper_deviation);
    fits["upper_index"] = r.upper_index;
    fits["sup_ratio_vs_log"] = fit_json(r.sup_growth);
    fits["neumann_C"] = r.neumann_C;
    fits["neumann_holds"] = r.neumann_holds;
  } else {
    fits["deficit_vs_eps_sqrt_log"] = fit_json(r.strip_rate);
  }
  j["fits"] = fits;
  return j.dump(2);
}

CutoffReport cutoff_capacity(const TriSurface& m, int center, double eps) {
  if (center < 0 || center >= m.num_vertices()) throw ValidationError("cutoff_capacity: center out of range");
  if (!(eps > 0.0) || !(eps < 1.0)) throw ValidationError("cutoff_capacity: eps must lie in (0, 1)");
  const double outer = std::sqrt(eps);
  const auto d = mesh::graph_distances(m, center);
  double far = 0.0;
  for (double x : d)
    if (std::isfinite(x)) far = std::max(far, x);
  if (!(far > outer)) throw ValidationError("cutoff_capacity: sqrt(eps) exceeds the reachable radius");

  CutoffReport rep;
  rep.eps = eps;
  rep.analytic = 4.0 * std::numbers::pi / std::log(1.0 / eps);
  std::vector<double> inside;
  for (double x : d)
    if (x > eps && x < outer) inside.push_back(x);
  std::sort(inside.begin(), inside.end());
  for (std::size_t i = 0; i < inside.size(); ++i)
    if (i == 0 || inside[i] > inside[i - 1] * (1.0 + 1e-9)) ++rep.annulus_rings;
  if (rep.annulus_rings < 3)
    throw ValidationError("cutoff_capacity: annulus under-resolved (" + std::to_string(rep.annulus_rings) +
                          " rings, need 3)");

  const double span = std::log(outer / eps);
  rep.eta.resize(d.size());
  for (std::size_t v = 0; v < d.size(); ++v) {
    if (d[v] <= eps) rep.eta[v] = 0.0;
    else if (d[v] >= outer) rep.eta[v] = 1.0;
    else rep.eta[v] = std::log(d[v] / eps) / span;
  }
  // Per-face cotangent energy: (1/2) sum over edges of cot(opposite angle) (difference)^2.
  for (int f = 0; f < m.num_faces(); ++f) {
    const auto& F = m.faces()[static_cast<std::size_t>(f)];
    const auto L = m.face_lengths(f);
    const double A = m.face_area(f);
    double e = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double li = L[i], lj = L[(i + 1) % 3], lk = L[(i + 2) % 3];
      const double cot = (lj * lj + lk * lk - li * li) / (4.0 * A);
      const double diff = rep.eta[F[i]] - rep.eta[F[(i + 1) % 3]];
      e += 0.5 * cot * diff * diff;
    }
    rep.energy += e;
    if (d[F[0]] >= outer && d[F[1]] >= outer && d[F[2]] >= outer) rep.energy_outside += e;
  }
  return rep;
}

ExtensionReport harmonic_extension_ratio(int k, double l, int n) {
  if (k < 1) throw ValidationError("harmonic_extension_ratio: k must be >= 1");
  if (!(l > 0.0)) throw ValidationError("harmonic_extension_ratio: l must be positive");
  if (n < 8 * k) throw ValidationError("harmonic_extension_ratio: resolution too coarse for mode k (need n >= 8k)");
  const double kk = static_cast<double>(k) * k;

  // Cells on [a, b] with element matrices from integrand weights; Dirichlet data imposed by elimination.
  auto energy = [&](double a, double b, auto&& element, double left, std::optional<double> right) {
    const double h = (b - a) / n;
    std::vector<Eigen::Triplet<double>> T;
    for (int c = 0; c < n; ++c) {
      const auto E = element(a + c * h, a + (c + 1) * h);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) T.emplace_back(c + i, c + j, E[i][j]);
    }
    Eigen::SparseMatrix<double> A(n + 1, n + 1);
    A.setFromTriplets(T.begin(), T.end());
    // Unknowns: nodes 1..n-1, plus node n when the right end is free.
    const int first = 1, last = right ? n - 1 : n;
    const int dim = last - first + 1;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n + 1);
    x[0] = left;
    if (right) x[n] = *right;
    Eigen::SparseMatrix<double> Ai = A.block(first, first, dim, dim);
    Eigen::VectorXd rhs = -(A * x).segment(first, dim);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Ai);
    if (ldlt.info() != Eigen::Success) throw NumericalError("harmonic_extension_ratio: factorization failed");
    x.segment(first, dim) = ldlt.solve(rhs);
    return x.dot(A * x);
  };

  // Cylinder: integral of f'^2 + k^2 f^2 over [0, l/2]; exact for P1.
  auto cyl = [&](double s0, double s1) {
    const double h = s1 - s0;
    std::array<std::array<double, 2>, 2> E{};
    E[0][0] = E[1][1] = 1.0 / h + kk * h / 3.0;
    E[0][1] = E[1][0] = -1.0 / h + kk * h / 6.0;
    return E;
  };
  // Disk: integral of (g'^2 + k^2 g^2 / r^2) r dr over [0, 1]; 4-point Gauss for the 1/r part.
  auto disk = [&](double r0, double r1) {
    static const double xg[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    static const double wg[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    const double h = r1 - r0, rm = 0.5 * (r0 + r1);
    std::array<std::array<double, 2>, 2> E{};
    const double g = rm / h; // integral of r dr / h^2
    E[0][0] = E[1][1] = g;
    E[0][1] = E[1][0] = -g;
    for (int q = 0; q < 4; ++q) {
      const double r = rm + 0.5 * h * xg[q], w = 0.5 * h * wg[q];
      const double N[2] = {(r1 - r) / h, (r - r0) / h};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) E[i][j] += w * kk * N[i] * N[j] / r;
    }
    return E;
  };

  ExtensionReport rep;
  rep.k = k;
  rep.l = l;
  rep.n = n;
  rep.cylinder_energy = energy(0.0, 0.5 * l, cyl, 1.0, std::nullopt);
  rep.disk_energy = energy(0.0, 1.0, disk, 0.0, 1.0);
  rep.ratio = rep.cylinder_energy / rep.disk_energy;
  rep.analytic = std::tanh(0.5 * k * l);
  rep.lower_bound = 1.0 - 4.0 * std::exp(-l);
  return rep;
}

} // namespace eigenglue::asymptotics
