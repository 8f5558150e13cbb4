#include "eigenglue/optimizer.hpp"

#include "eigenglue/error.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace eigenglue::optimizer {

namespace {

using Vec = Eigen::VectorXd;

struct Evaluation {
  spectrum::SpectrumResult s;
  variation::EvalReport eval;
};

class Problem {
public:
  Problem(const TriSurface& m, const OptimizerConfig& cfg) : m_(m), cfg_(cfg) {
    support_.assign(static_cast<std::size_t>(m.num_vertices()), cfg.kind == spectrum::ProblemKind::Laplace);
    if (cfg.kind == spectrum::ProblemKind::Steklov)
      for (const auto& loop : m.boundary_loops())
        for (int v : loop) support_[v] = true;
    count_ = static_cast<int>(std::count(support_.begin(), support_.end(), true));
  }

  const std::vector<bool>& support() const { return support_; }

  DensityMeasure measure(const std::vector<double>& w) const {
    DensityMeasure b;
    b.support = cfg_.kind == spectrum::ProblemKind::Laplace ? metric::Support::Interior : metric::Support::Boundary;
    b.weights = w;
    return b;
  }

  // Renormalize to total 1 and apply the floor on supported vertices.
  std::vector<double> normalize(std::vector<double> w) const {
    for (std::size_t v = 0; v < w.size(); ++v)
      if (!support_[v]) w[v] = 0.0;
    if (!(metric::accurate_sum(w) > 0.0)) throw ValidationError("density has no mass on its support");
    const double fl = cfg_.floor / count_;
    for (std::size_t v = 0; v < w.size(); ++v)
      if (support_[v]) w[v] = std::max(w[v], fl);
    const double sum = metric::accurate_sum(w);
    for (double& x : w) x /= sum;
    return w;
  }

  Evaluation evaluate(const std::vector<double>& w, const Eigen::MatrixXd* warm) const {
    const auto p = spectrum::assemble(m_, measure(w), cfg_.kind);
    spectrum::SolveOptions o;
    o.tol = cfg_.solver_tol;
    o.initial = warm;
    o.seed = cfg_.seed;
    Evaluation e;
    // Grow k until the optimizer cluster holding lambda_m is closed.
    const int kmax = m_.num_vertices() - 1;
    int k = std::min(cfg_.objective.m + cfg_.extra_modes, kmax);
    for (;;) {
      e.s = spectrum::solve(p, k, o);
      bool closed = true;
      const auto cl = spectrum::cluster_indices(e.s.eigenvalues, e.s.next_eigenvalue, cfg_.cluster_tau, closed);
      const bool cut = !closed && cl.back().first <= cfg_.objective.m;
      if (!cut || k == kmax) break;
      k = std::min(2 * k, kmax);
      o.initial = nullptr;
    }
    e.eval = variation::eval_E(cfg_.objective, e.s);
    return e;
  }

private:
  const TriSurface& m_;
  const OptimizerConfig& cfg_;
  std::vector<bool> support_;
  int count_ = 0;
};

std::string move_name(MoveSet m, int it) {
  if (m == MoveSet::Density) return "density";
  if (m == MoveSet::Conformal) return "conformal";
  return it % 2 == 0 ? "density" : "conformal";
}

} // namespace

std::vector<double> project_simplex(const std::vector<double>& w) {
  if (w.empty()) return {};
  std::vector<double> u(w);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::max(w[i] - theta, 0.0);
  return out;
}

Eigen::VectorXd min_norm_hull(const Eigen::MatrixXd& G) {
  const int n = static_cast<int>(G.rows());
  if (n == 0) throw ValidationError("min_norm_hull: empty set");
  Vec x = Vec::Constant(n, 1.0 / n);
  const double L = 2.0 * std::max(G.diagonal().maxCoeff(), 1e-300) * n;
  if (n == 1) return x;
  // Accelerated projected gradient on x^T G x over the simplex.
  Vec y = x, xprev = x;
  double tk = 1.0;
  auto proj = [](const Vec& z) {
    const auto p = project_simplex(std::vector<double>(z.data(), z.data() + z.size()));
    return Vec(Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size())));
  };
  for (int it = 0; it < 20000; ++it) {
    x = proj(y - (2.0 / L) * (G * y));
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = x + ((tk - 1.0) / tn) * (x - xprev);
    tk = tn;
    if ((x - xprev).cwiseAbs().maxCoeff() < 1e-15) break;
    xprev = x;
  }
  return x;
}

OptimRun minimize_E(const TriSurface& m, const OptimizerConfig& cfg, const DensityMeasure& init,
                    const IterateCallback& on_iterate) {
  if (m.num_components() != 1) throw ValidationError("optimizer: surface must be connected");
  if (!(cfg.initial_step > 0.0) || !(cfg.max_step > 0.0) || !(cfg.min_step > 0.0) || !(cfg.backtrack > 0.0) ||
      !(cfg.backtrack < 1.0))
    throw ValidationError("optimizer: step parameters must be positive, with backtrack in (0, 1)");
  if (!(cfg.tol_gradient > 0.0) || !(cfg.tol_objective >= 0.0) || cfg.max_iterations < 0)
    throw ValidationError("optimizer: tolerances must be positive");
  const auto H = variation::check_hypothesis(cfg.objective);
  if (!H.ok) throw ValidationError("objective fails hypothesis (H): " + H.violations.front());
  metric::validate(init, m);
  if (init.weights.size() != static_cast<std::size_t>(m.num_vertices()))
    throw ValidationError("optimizer: initial density size mismatch");

  Problem prob(m, cfg);
  OptimRun run;
  std::vector<double> w = prob.normalize(init.weights);
  Evaluation cur = prob.evaluate(w, nullptr);
  if (!cur.eval.gap)
    run.warnings.push_back("gap E < E0 fails at the initial density (minimizing sequences may degenerate)");

  double step = cfg.initial_step;
  run.termination = "max-iterations";
  const auto& sup = prob.support();
  for (int it = 0;; ++it) {
    IterateRecord rec;
    rec.iteration = it;
    rec.E = cur.eval.E;
    rec.E0 = cur.eval.E0;
    rec.gap = cur.eval.gap;
    const auto nb = spectrum::normalized(cur.s);
    rec.lambda_bar.assign(nb.begin() + 1, nb.end());
    rec.move = move_name(cfg.moves, it);
    {
      double mx = 0.0;
      int cnt = 0;
      for (std::size_t v = 0; v < w.size(); ++v)
        if (sup[v]) {
          mx = std::max(mx, w[v]);
          ++cnt;
        }
      rec.max_density_ratio = mx * cnt;
    }
    bool closed = true;
    for (const auto& c : spectrum::cluster_indices(cur.s.eigenvalues, cur.s.next_eigenvalue, cfg.cluster_tau, closed))
      if (c.first <= cfg.objective.m) rec.cluster_sizes.push_back(c.size());

    // Sampled subdifferential, density parts, centred in L2(beta).
    variation::SubgradientOptions so;
    so.samples = std::max(0, std::min(cfg.samples, 30));
    so.seed = cfg.seed + static_cast<std::uint64_t>(it);
    so.cluster_tau = cfg.cluster_tau;
    const auto el = variation::subgradient_elements(m, cfg.objective, cur.s, so);
    if (el.empty()) throw ValidationError("optimizer: all partial derivatives vanish");
    const int n = static_cast<int>(el.size());
    const Eigen::Map<const Vec> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    Eigen::MatrixXd R(w.size(), n);
    for (int a = 0; a < n; ++a) {
      Vec r = el[a].density;
      for (std::size_t v = 0; v < w.size(); ++v)
        if (!sup[v]) r[static_cast<Eigen::Index>(v)] = 0.0;
      r.array() -= wv.dot(r);
      for (std::size_t v = 0; v < w.size(); ++v)
        if (!sup[v]) r[static_cast<Eigen::Index>(v)] = 0.0;
      R.col(a) = r;
    }
    const Eigen::MatrixXd G = R.transpose() * wv.asDiagonal() * R;
    const Vec x = min_norm_hull(G);
    const Vec pdir = R * x;
    const double pnorm = std::sqrt(std::max(0.0, pdir.dot(wv.asDiagonal() * pdir)));
    const auto d = cfg.objective.dF(cur.eval.lambda_bar);
    double scale = 0.0;
    for (int i = 0; i < cfg.objective.m; ++i) scale += std::abs(d[i]) * cur.eval.lambda_bar[i];
    rec.gradient_norm = scale > 0.0 ? pnorm / scale : 0.0;
    run.gradient_norm = rec.gradient_norm;

    auto emit = [&](IterateRecord& r) {
      run.history.push_back(r);
      if (on_iterate) on_iterate(r);
    };
    if (rec.gradient_norm < cfg.tol_gradient) {
      run.termination = "converged";
      emit(rec);
      break;
    }
    if (it >= cfg.max_iterations) {
      emit(rec);
      break;
    }

    const Vec phat = pdir / pnorm;
    const bool conformal = rec.move == "conformal";
    bool accepted = false;
    Evaluation trial;
    std::vector<double> wt;
    while (step >= cfg.min_step) {
      wt = w;
      if (conformal) {
        for (std::size_t v = 0; v < w.size(); ++v)
          if (sup[v]) wt[v] = w[v] * std::exp(-step * phat[static_cast<Eigen::Index>(v)]);
      } else {
        std::vector<double> active;
        for (std::size_t v = 0; v < w.size(); ++v)
          if (sup[v]) active.push_back(w[v] * (1.0 - step * phat[static_cast<Eigen::Index>(v)]));
        const auto pr = project_simplex(active);
        std::size_t j = 0;
        for (std::size_t v = 0; v < w.size(); ++v) wt[v] = sup[v] ? pr[j++] : 0.0;
      }
      wt = prob.normalize(wt);
      trial = prob.evaluate(wt, &cur.s.eigenvectors);
      if (trial.eval.E < cur.eval.E) {
        accepted = true;
        break;
      }
      ++rec.backtracks;
      run.accept_sequence.push_back(false);
      step *= cfg.backtrack;
    }
    if (!accepted) {
      run.termination = "stalled";
      emit(rec);
      break;
    }
    run.accept_sequence.push_back(true);
    rec.accepted = true;
    rec.step = step;
    emit(rec);
    const double rel = std::abs(cur.eval.E - trial.eval.E) / std::max(std::abs(cur.eval.E), 1e-300);
    w = std::move(wt);
    cur = std::move(trial);
    step = std::min(2.0 * step, cfg.max_step);
    if (rel < cfg.tol_objective) {
      run.termination = "objective-tolerance";
      IterateRecord last;
      last.iteration = it + 1;
      last.E = cur.eval.E;
      last.E0 = cur.eval.E0;
      last.gap = cur.eval.gap;
      const auto nb2 = spectrum::normalized(cur.s);
      last.lambda_bar.assign(nb2.begin() + 1, nb2.end());
      last.move = move_name(cfg.moves, it + 1);
      last.gradient_norm = rec.gradient_norm;
      emit(last);
      break;
    }
  }

  run.density = prob.measure(w);
  run.spectrum = cur.s;
  run.final_eval = cur.eval;
  {
    std::vector<double> u(w.size(), 0.0);
    const auto A = cfg.kind == spectrum::ProblemKind::Laplace ? metric::vertex_areas(m)
                                                              : metric::boundary_measure(m).weights;
    for (std::size_t v = 0; v < w.size(); ++v) u[v] = A[v] > 0.0 && w[v] > 0.0 ? 0.5 * std::log(w[v] / A[v]) : 0.0;
    run.conformal = {u, metric::fingerprint(m)};
  }
  // Certificate on optimizer clusters.
  try {
    auto s = cur.s;
    s.tau = cfg.cluster_tau;
    s.clusters = spectrum::cluster_indices(s.eigenvalues, s.next_eigenvalue, s.tau, s.last_cluster_closed);
    const auto p = spectrum::assemble(m, run.density, cfg.kind);
    const auto tw = variation::cluster_weights(cfg.objective, s);
    certificates::BuildOptions bo;
    bo.seed = cfg.seed;
    run.certificate = certificates::build_eigenmap(p, s, tw.t, bo);
    run.conformality = certificates::conformality_defect(*run.certificate, m);
    run.normalization_defect = run.certificate->normalization_sup;
    run.conformality_defect = run.conformality.mean;
  } catch (const ValidationError& e) {
    run.warnings.push_back(std::string("certificate unavailable: ") + e.what());
  }
  return run;
}

OptimRun maximize_lambda1(const TriSurface& m, OptimizerConfig cfg, const DensityMeasure& init,
                          const IterateCallback& on_iterate) {
  cfg.objective = variation::inverse_power({1.0});
  return minimize_E(m, cfg, init, on_iterate);
}

std::string to_json(const IterateRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["E"] = r.E;
  j["E0"] = std::isfinite(r.E0) ? nlohmann::ordered_json(r.E0) : nlohmann::ordered_json("inf");
  j["gap"] = r.gap;
  j["lambda_bar"] = r.lambda_bar;
  j["clusters"] = r.cluster_sizes;
  j["gradient_norm"] = r.gradient_norm;
  j["step"] = r.step;
  j["backtracks"] = r.backtracks;
  j["accepted"] = r.accepted;
  j["move"] = r.move;
  j["max_density_ratio"] = r.max_density_ratio;
  return j.dump();
}

std::string summary_json(const OptimRun& run) {
  nlohmann::ordered_json j;
  j["type"] = "OptimRun";
  j["termination"] = run.termination;
  j["iterations"] = run.history.empty() ? 0 : run.history.back().iteration;
  j["E"] = run.final_eval.E;
  j["E0"] = std::isfinite(run.final_eval.E0) ? nlohmann::ordered_json(run.final_eval.E0) : nlohmann::ordered_json("inf");
  j["gap"] = run.final_eval.gap;
  j["lambda_bar"] = run.final_eval.lambda_bar;
  j["gradient_norm"] = run.gradient_norm;
  j["normalization_defect"] = run.normalization_defect;
  j["conformality_defect"] = run.conformality_defect;
  j["warnings"] = run.warnings;
  return j.dump(2);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "objective", "moves",   "kind",        "initial_step", "max_step", "backtrack",  "min_step",
      "max_iterations", "tol_objective", "tol_gradient", "cluster_tau", "samples", "extra_modes", "floor",
      "solver_tol", "seed", "mesh", "init", "init_amplitude"};
  return keys;
}

OptimizerConfig parse_config(const std::string& text, std::map<std::string, std::string>* raw) {
  OptimizerConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ValidationError("unknown config key '" + key + "' (line " + std::to_string(lineno) + ")");
    kv[key] = val;
  }
  auto num = [&](const std::string& k, double& out) {
    if (!kv.count(k)) return;
    try {
      std::size_t used = 0;
      out = std::stod(kv[k], &used);
      if (used != kv[k].size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ValidationError("config key '" + k + "': not a number: '" + kv[k] + "'");
    }
  };
  auto integer = [&](const std::string& k, int& out) {
    double d = out;
    num(k, d);
    if (d != std::floor(d)) throw ValidationError("config key '" + k + "': not an integer");
    out = static_cast<int>(d);
  };
  if (kv.count("objective")) cfg.objective = variation::parse_functional(kv["objective"]);
  if (kv.count("moves")) {
    const auto& v = kv["moves"];
    if (v == "density")
      cfg.moves = MoveSet::Density;
    else if (v == "conformal")
      cfg.moves = MoveSet::Conformal;
    else if (v == "both" || v == "alternating")
      cfg.moves = MoveSet::Alternating;
    else
      throw ValidationError("config key 'moves': expected density, conformal or both");
  }
  if (kv.count("kind")) {
    if (kv["kind"] == "laplace")
      cfg.kind = spectrum::ProblemKind::Laplace;
    else if (kv["kind"] == "steklov")
      cfg.kind = spectrum::ProblemKind::Steklov;
    else
      throw ValidationError("config key 'kind': expected laplace or steklov");
  }
  num("initial_step", cfg.initial_step);
  cfg.max_step = cfg.initial_step;
  num("max_step", cfg.max_step);
  num("backtrack", cfg.backtrack);
  num("min_step", cfg.min_step);
  integer("max_iterations", cfg.max_iterations);
  num("tol_objective", cfg.tol_objective);
  num("tol_gradient", cfg.tol_gradient);
  num("cluster_tau", cfg.cluster_tau);
  integer("samples", cfg.samples);
  integer("extra_modes", cfg.extra_modes);
  num("floor", cfg.floor);
  num("solver_tol", cfg.solver_tol);
  if (kv.count("seed")) {
    try {
      cfg.seed = std::stoull(kv["seed"]);
    } catch (const std::exception&) {
      throw ValidationError("config key 'seed': not an unsigned integer");
    }
  }
  if (!(cfg.initial_step > 0.0) || !(cfg.max_step > 0.0) || !(cfg.min_step > 0.0) || !(cfg.backtrack > 0.0) ||
      !(cfg.backtrack < 1.0))
    throw ValidationError("config: steps must be positive and backtrack in (0, 1)");
  if (!(cfg.tol_gradient > 0.0) || !(cfg.tol_objective >= 0.0) || !(cfg.cluster_tau > 0.0) || !(cfg.solver_tol > 0.0))
    throw ValidationError("config: tolerances must be positive");
  if (cfg.samples < 0 || cfg.samples > 30) throw ValidationError("config key 'samples': expected 0..30");
  if (cfg.extra_modes < 1) throw ValidationError("config key 'extra_modes': expected at least 1");
  if (cfg.max_iterations < 0) throw ValidationError("config key 'max_iterations': expected a nonnegative integer");
  if (raw) *raw = std::move(kv);
  return cfg;
}

std::vector<SweepRow> sweep(const std::vector<SweepCase>& cases, int jobs) {
  std::vector<SweepRow> rows(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      const auto& c = cases[i];
      auto& r = rows[i];
      r.label = c.label;
      r.params = c.params;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        if (!c.error.empty()) throw ValidationError(c.error);
        const auto run = minimize_E(c.mesh, c.cfg, c.init);
        r.ok = true;
        r.lambda_bar = run.final_eval.lambda_bar;
        r.E = run.final_eval.E;
        r.gradient_norm = run.gradient_norm;
        r.normalization_defect = run.normalization_defect;
        r.conformality_defect = run.conformality_defect;
        r.iterations = run.history.empty() ? 0 : run.history.back().iteration;
        r.termination = run.termination;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cases.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

} // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::vector<std::string> keys;
  std::size_t nl = 0;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.params)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    nl = std::max(nl, r.lambda_bar.size());
  }
  std::ostringstream o;
  o.precision(17);
  o << "label";
  for (const auto& k : keys) o << ',' << csv_field(k);
  o << ",ok,E";
  for (std::size_t i = 0; i < nl; ++i) o << ",lambda_bar_" << i + 1;
  o << ",gradient_norm,normalization_defect,conformality_defect,iterations,termination,error\n";
  for (const auto& r : rows) {
    o << csv_field(r.label);
    for (const auto& k : keys) {
      std::string v;
      for (const auto& [pk, pv] : r.params)
        if (pk == k) v = pv;
      o << ',' << csv_field(v);
    }
    o << ',' << (r.ok ? "true" : "false") << ',' << (r.ok ? r.E : std::nan(""));
    for (std::size_t i = 0; i < nl; ++i) {
      o << ',';
      if (i < r.lambda_bar.size()) o << r.lambda_bar[i];
    }
    o << ',' << r.gradient_norm << ',' << r.normalization_defect << ',' << r.conformality_defect << ',' << r.iterations
      << ',' << r.termination << ',' << csv_field(r.error) << '\n';
  }
  return o.str();
}

} // namespace eigenglue::optimizer
