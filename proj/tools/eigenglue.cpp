// eigenglue command-line entry point.

#include "run_dir.hpp"

#include "eigenglue/asymptotics.hpp"
#include "eigenglue/certificates.hpp"
#include "eigenglue/error.hpp"
#include "eigenglue/mesh.hpp"
#include "eigenglue/metric.hpp"
#include "eigenglue/optimizer.hpp"
#include "eigenglue/spectrum.hpp"
#include "eigenglue/variation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace eigenglue::cli {
namespace {

// ---------------------------------------------------------------------------
// Inputs

struct MeshSource {
  std::string spec; // builtin spec, or absolute path
  bool builtin = false;
  mesh::TriSurface mesh;
  std::optional<std::pair<int, int>> centers; // graded torus patch centres
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("bad integer '" + s + "' in " + what);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Builtins: sphere:L, torus:N, hex-torus:N, disk:R, genus:G:R, graded-torus. Anything else is a file.
MeshSource load_source(const std::string& spec, const fs::path& base = {}) {
  const auto parts = split(spec, ':');
  const std::string& kind = parts.empty() ? spec : parts[0];
  auto arg = [&](std::size_t i, int dflt) { return parts.size() > i ? to_int(parts[i], "mesh '" + spec + "'") : dflt; };
  if (kind == "sphere") return {spec, true, mesh::icosphere(arg(1, 3)), {}};
  if (kind == "torus") return {spec, true, mesh::flat_torus({1, 0}, {0, 1}, arg(1, 24)), {}};
  if (kind == "hex-torus") return {spec, true, mesh::flat_torus({1, 0}, {0.5, std::sqrt(3.0) / 2}, arg(1, 24)), {}};
  if (kind == "disk") return {spec, true, mesh::unit_disk(arg(1, 24)), {}};
  if (kind == "genus") return {spec, true, mesh::genus_surface(arg(1, 2), arg(2, 24)), {}};
  if (kind == "graded-torus") {
    auto gt = mesh::graded_flat_torus({});
    return {spec, true, std::move(gt.surface), std::pair{gt.center_vertices[0], gt.center_vertices[1]}};
  }
  fs::path p = spec;
  if (p.is_relative() && !base.empty() && !fs::exists(p)) p = base / p;
  if (!fs::exists(p)) throw ValidationError("mesh '" + spec + "' is neither a file nor a builtin");
  return {fs::absolute(p).lexically_normal().string(), false,
          p.extension() == ".json" ? mesh::from_canonical_json(slurp(p)) : mesh::load_mesh(p), {}};
}

void record(RunDir& run, const MeshSource& src) {
  if (src.builtin) run.add_builtin(src.spec);
  else run.add_input(src.spec);
}

spectrum::ProblemKind parse_kind(const std::string& k) {
  if (k == "laplace") return spectrum::ProblemKind::Laplace;
  if (k == "steklov") return spectrum::ProblemKind::Steklov;
  throw ValidationError("kind must be laplace or steklov, got '" + k + "'");
}

metric::DensityMeasure uniform_density(const mesh::TriSurface& m, spectrum::ProblemKind kind) {
  if (kind == spectrum::ProblemKind::Steklov) {
    if (m.is_closed()) throw ValidationError("closed surface has no Steklov problem");
    return metric::boundary_measure(m);
  }
  return metric::area_measure(m);
}

metric::DensityMeasure load_density(const std::string& spec, const mesh::TriSurface& m, spectrum::ProblemKind kind,
                                    double amplitude, RunDir& run, const fs::path& base = {}) {
  auto beta = uniform_density(m, kind);
  if (spec == "uniform") return beta;
  if (spec == "perturbed") {
    if (!m.positions()) throw ValidationError("init 'perturbed' needs a mesh with an embedding");
    const auto& P = *m.positions();
    for (int v = 0; v < m.num_vertices(); ++v)
      beta.weights[v] *= std::exp(amplitude * (P[v].z() + 0.5 * P[v].x() * P[v].y()));
    return beta;
  }
  fs::path p = spec;
  if (p.is_relative() && !base.empty() && !fs::exists(p)) p = base / p;
  run.add_input(p);
  auto d = metric::density_from_json(slurp(p));
  metric::validate(d, m);
  return d;
}

// Graded torus: the patch centres. Otherwise vertex 0 and the vertex farthest from it.
std::pair<int, int> default_handle_points(const MeshSource& src) {
  if (src.centers) return *src.centers;
  const auto d = mesh::graph_distances(src.mesh, 0);
  int q = 0;
  for (int v = 0; v < src.mesh.num_vertices(); ++v)
    if (std::isfinite(d[v]) && d[v] > d[q]) q = v;
  return {0, q};
}

// First vertex of the first boundary loop and the vertex half way round it.
std::pair<int, int> default_strip_points(const mesh::TriSurface& m) {
  if (m.is_closed()) throw ValidationError("closed surface has no Steklov problem");
  const auto& loop = m.boundary_loops().front();
  std::vector<double> acc{0.0};
  for (std::size_t i = 0; i < loop.size(); ++i)
    acc.push_back(acc.back() + m.edge_length(m.find_edge(loop[i], loop[(i + 1) % loop.size()])));
  int q = loop[0];
  double best = 1e300;
  for (std::size_t i = 0; i < loop.size(); ++i)
    if (std::abs(acc[i] - 0.5 * acc.back()) < best) {
      best = std::abs(acc[i] - 0.5 * acc.back());
      q = loop[i];
    }
  return {loop[0], q};
}

void write_mesh(RunDir& run, const std::string& stem, const mesh::TriSurface& m) {
  run.write(stem + ".json", mesh::to_canonical_json(m));
  if (m.positions()) {
    std::ostringstream off;
    mesh::write_off(off, m);
    run.write(stem + ".off", off.str());
  }
}

json mesh_summary(const mesh::TriSurface& m) {
  json j;
  j["vertices"] = m.num_vertices();
  j["edges"] = m.num_edges();
  j["faces"] = m.num_faces();
  j["components"] = m.num_components();
  j["boundary_components"] = m.num_boundary_components();
  j["genus"] = m.genus();
  j["area"] = m.total_area();
  j["boundary_length"] = m.boundary_length();
  j["fingerprint"] = metric::fingerprint(m);
  return j;
}

std::string spectrum_json(const spectrum::SpectrumResult& s, const json& source) {
  auto j = json::parse(spectrum::to_json(s));
  j["source"] = source;
  j["eigenvectors"] = "eigenvectors.bin";
  return j.dump(2);
}

void write_spectrum(RunDir& run, const spectrum::SpectrumResult& s, const json& source) {
  run.write("spectrum.json", spectrum_json(s, source));
  spectrum::write_eigenvectors(run.path() / "eigenvectors.bin", s);
  run.write("eigenvectors.bin", slurp(run.path() / "eigenvectors.bin"));
}

json surgery_json(const mesh::SurgeryReport& r, const mesh::TriSurface& before, const mesh::TriSurface& after) {
  json j;
  j["eps"] = r.eps;
  j["l"] = r.aspect;
  j["n_theta"] = r.n_theta;
  j["rows"] = r.n_rows;
  j["removed_vertices"] = r.removed_vertices.size();
  j["removed_faces"] = r.removed_faces.size();
  j["inserted_vertices"] = r.inserted_vertex_end - r.inserted_vertex_begin;
  j["inserted_faces"] = r.inserted_face_end - r.inserted_face_begin;
  j["area_removed"] = r.area_removed;
  j["area_added"] = r.area_added;
  j["one_ring_fallback"] = {r.one_ring_fallback_p, r.one_ring_fallback_q};
  j["split_vertices"] = r.split_vertices;
  j["before"] = mesh_summary(before);
  j["after"] = mesh_summary(after);
  return j;
}

// ---------------------------------------------------------------------------
// Commands

struct Common {
  std::string out;
  std::uint64_t seed = 0x5eed;
  bool seed_given = false;
  int jobs = 1;
};

void cmd_mesh(RunDir& run, const std::string& spec) {
  const auto src = load_source(spec);
  record(run, src);
  write_mesh(run, "mesh", src.mesh);
  run.write("summary.json", mesh_summary(src.mesh).dump(2));
  std::cout << "mesh: " << src.mesh.num_vertices() << " vertices, genus " << src.mesh.genus() << "\n";
}

struct SpectrumArgs {
  std::string mesh, density = "uniform", kind = "laplace", mass = "lumped";
  int k = 4;
  double tol = 1e-9;
};

void cmd_spectrum(RunDir& run, const SpectrumArgs& a, std::uint64_t seed) {
  const auto src = load_source(a.mesh);
  record(run, src);
  const auto kind = parse_kind(a.kind);
  const auto beta = load_density(a.density, src.mesh, kind, 0.0, run);
  if (a.mass != "lumped" && a.mass != "consistent") throw ValidationError("mass must be lumped or consistent");
  const auto p = spectrum::assemble(src.mesh, beta, kind,
                                    a.mass == "lumped" ? spectrum::MassKind::Lumped : spectrum::MassKind::Consistent);
  spectrum::SolveOptions o;
  o.tol = a.tol;
  o.seed = seed;
  const auto s = spectrum::solve(p, a.k, o);
  json source;
  source["mesh"] = src.spec;
  source["density"] = a.density == "uniform" ? a.density : fs::absolute(a.density).lexically_normal().string();
  source["kind"] = a.kind;
  source["mass"] = a.mass;
  write_spectrum(run, s, source);
  const auto nb = spectrum::normalized(s);
  std::cout << "lambda_bar:";
  for (std::size_t i = 1; i < nb.size(); ++i) std::cout << ' ' << nb[i];
  std::cout << "\n";
}

struct OptimizeArgs {
  std::string config;
  bool dry_run = false;
};

void cmd_optimize(RunDir& run, const OptimizeArgs& a, const Common& c) {
  run.set_config(a.config);
  std::map<std::string, std::string> raw;
  auto cfg = optimizer::parse_config(slurp(a.config), &raw);
  if (c.seed_given) cfg.seed = c.seed;
  if (!raw.count("mesh")) throw ValidationError("config key 'mesh' is required");
  const fs::path base = fs::path(a.config).parent_path();
  const auto src = load_source(raw.at("mesh"), base);
  record(run, src);
  double amp = 0.5;
  if (raw.count("init_amplitude")) {
    try {
      amp = std::stod(raw.at("init_amplitude"));
    } catch (const std::exception&) {
      throw ValidationError("config key 'init_amplitude': not a number");
    }
  }
  const auto init = load_density(raw.count("init") ? raw.at("init") : "uniform", src.mesh, cfg.kind, amp, run, base);
  const auto H = variation::check_hypothesis(cfg.objective);
  if (!H.ok) throw ValidationError("objective fails hypothesis (H): " + H.violations.front());

  json resolved;
  for (const auto& [k, v] : raw) resolved[k] = v;
  resolved["seed"] = cfg.seed;
  run.write("config.json", resolved.dump(2));
  if (a.dry_run) {
    std::cout << "config ok: " << cfg.objective.name << " on " << src.mesh.num_vertices() << " vertices\n";
    return;
  }
  auto& hist = run.stream("history.jsonl");
  auto r = optimizer::minimize_E(src.mesh, cfg, init, [&](const optimizer::IterateRecord& it) {
    hist << json::parse(optimizer::to_json(it)).dump() << '\n';
    hist.flush();
  });
  run.write("summary.json", optimizer::summary_json(r));
  run.write("density.json", metric::to_json(r.density));
  run.write("conformal.json", metric::to_json(r.conformal));
  json source;
  source["mesh"] = src.spec;
  source["density"] = (run.path() / "density.json").lexically_normal().string();
  source["kind"] = cfg.kind == spectrum::ProblemKind::Laplace ? "laplace" : "steklov";
  source["mass"] = "lumped";
  // Stored with the optimizer's cluster tolerance so that certify sees the same clusters.
  auto s = r.spectrum;
  s.tau = cfg.cluster_tau;
  s.clusters = spectrum::cluster_indices(s.eigenvalues, s.next_eigenvalue, s.tau, s.last_cluster_closed);
  write_spectrum(run, s, source);
  if (r.certificate) {
    run.write("certificate.json", certificates::to_json(*r.certificate, r.conformality));
    run.write("defects.csv", certificates::defect_csv(r.conformality));
  }
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << r.termination << ": E = " << r.final_eval.E << ", lambda_bar_1 = " << r.final_eval.lambda_bar[0]
            << ", iterations = " << (r.history.empty() ? 0 : r.history.back().iteration) << "\n";
}

struct GlueArgs {
  std::string mesh;
  double eps = 0.05, l = 3.0;
  int n_theta = 48;
  int p = -1, q = -1;
  std::string orientation = "preserve";
};

mesh::StripOrientation parse_orientation(const std::string& o) {
  if (o == "preserve") return mesh::StripOrientation::Preserve;
  if (o == "reverse") return mesh::StripOrientation::Reverse;
  throw ValidationError("orientation must be preserve or reverse");
}

void cmd_glue(RunDir& run, const std::string& what, const GlueArgs& a) {
  const auto src = load_source(a.mesh);
  record(run, src);
  auto pq = what == "handle" ? default_handle_points(src) : default_strip_points(src.mesh);
  if (a.p >= 0) pq.first = a.p;
  if (a.q >= 0) pq.second = a.q;
  const auto r = what == "handle" ? mesh::attach_handle(src.mesh, pq.first, pq.second, a.eps, a.l, a.n_theta)
                                  : mesh::attach_strip(src.mesh, pq.first, pq.second, a.eps, a.l,
                                                       parse_orientation(a.orientation));
  write_mesh(run, "glued", r.surface);
  auto j = surgery_json(r.report, src.mesh, r.surface);
  j["p"] = pq.first;
  j["q"] = pq.second;
  run.write("surgery.json", j.dump(2));
  std::cout << what << ": genus " << src.mesh.genus() << " -> " << r.surface.genus() << ", "
            << r.surface.num_vertices() << " vertices\n";
}

struct SweepArgs {
  std::string mesh;
  std::string config;
  std::vector<double> eps;
  std::vector<double> ls;
  double l = -1.0;
  int n_theta = 48, k = -1, upper_index = 4, p = -1, q = -1;
  std::string orientation = "preserve";
};

void cmd_sweep_asymptotic(RunDir& run, const std::string& what, const SweepArgs& a, const Common& c) {
  const bool handle = what == "handle";
  const auto src = load_source(a.mesh.empty() ? (handle ? "graded-torus" : "disk:24") : a.mesh);
  record(run, src);
  auto pq = handle ? default_handle_points(src) : default_strip_points(src.mesh);
  if (a.p >= 0) pq.first = a.p;
  if (a.q >= 0) pq.second = a.q;
  asymptotics::SweepRecord rec;
  if (handle) {
    asymptotics::HandleSweepOptions o;
    if (a.l > 0) o.l = a.l;
    o.n_theta = a.n_theta;
    if (a.k > 0) o.k = a.k;
    o.upper_index = std::min(a.upper_index, o.k);
    o.jobs = c.jobs;
    o.solve.seed = c.seed;
    rec = asymptotics::handle_deficit_sweep(src.mesh, pq.first, pq.second, a.eps, o);
  } else {
    asymptotics::StripSweepOptions o;
    if (a.l > 0) o.l = a.l;
    if (a.k > 0) o.k = a.k;
    o.orientation = parse_orientation(a.orientation);
    o.jobs = c.jobs;
    o.solve.seed = c.seed;
    rec = asymptotics::strip_deficit_sweep(src.mesh, pq.first, pq.second, a.eps, o);
  }
  run.write("sweep.csv", asymptotics::sweep_csv(rec));
  run.write("sweep.json", asymptotics::to_json(rec));
  int ok = 0;
  for (const auto& pt : rec.points) ok += pt.ok;
  std::cout << what << " sweep: " << ok << "/" << rec.points.size() << " points, deficit slope "
            << rec.lower_deficit.slope << "\n";
}

std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// Optimizer runs over a grid of handles (eps x l) attached to the config mesh.
void cmd_sweep_optimize(RunDir& run, const SweepArgs& a, const Common& c) {
  run.set_config(a.config);
  std::map<std::string, std::string> raw;
  auto cfg = optimizer::parse_config(slurp(a.config), &raw);
  if (c.seed_given) cfg.seed = c.seed;
  if (!raw.count("mesh")) throw ValidationError("config key 'mesh' is required");
  const fs::path base = fs::path(a.config).parent_path();
  const auto src = load_source(raw.at("mesh"), base);
  record(run, src);
  const double amp = raw.count("init_amplitude") ? std::stod(raw.at("init_amplitude")) : 0.5;
  const std::string init = raw.count("init") ? raw.at("init") : "uniform";
  const auto pq = default_handle_points(src);
  const std::vector<double> ls = a.ls.empty() ? std::vector<double>{3.0} : a.ls;

  std::vector<optimizer::SweepCase> cases;
  auto add_case = [&](std::string label, std::vector<std::pair<std::string, std::string>> params,
                      const mesh::TriSurface& m) {
    optimizer::SweepCase sc{std::move(label), std::move(params), m, {}, cfg, {}};
    try {
      sc.init = load_density(init, m, cfg.kind, amp, run, base);
    } catch (const ValidationError& e) {
      sc.error = e.what();
    }
    cases.push_back(std::move(sc));
  };
  if (a.eps.empty()) add_case("base", {}, src.mesh);
  for (double e : a.eps)
    for (double l : ls) {
      const std::string es = shortest(e), lstr = shortest(l);
      const std::string label = "eps=" + es + ",l=" + lstr;
      try {
        add_case(label, {{"eps", es}, {"l", lstr}},
                 mesh::attach_handle(src.mesh, pq.first, pq.second, e, l, a.n_theta).surface);
      } catch (const ValidationError& e) {
        add_case(label, {{"eps", es}, {"l", lstr}}, src.mesh);
        cases.back().error = e.what();
      }
    }
  const auto rows = optimizer::sweep(cases, c.jobs);
  run.write("sweep.csv", optimizer::sweep_csv(rows));
  std::ostringstream rt;
  rt << "label,seconds\n";
  for (const auto& r : rows) rt << '"' << r.label << "\"," << r.seconds << '\n';
  run.write("runtimes.csv", rt.str());
  int ok = 0;
  for (const auto& r : rows) ok += r.ok;
  std::cout << "optimize sweep: " << ok << "/" << rows.size() << " runs\n";
}

struct CertifyArgs {
  std::string spectrum;
  std::string F = "inv1";
  std::string rule = "weights";
  double floor = 1e-6;
  double tau = -1.0;
  bool no_refine = false;
};

void cmd_certify(RunDir& run, const CertifyArgs& a, std::uint64_t seed) {
  run.add_input(a.spectrum);
  const auto text = slurp(a.spectrum);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("spectrum JSON: ") + e.what());
  }
  if (!j.contains("source") || !j.contains("eigenvectors"))
    throw ValidationError("spectrum JSON lacks 'source'/'eigenvectors' (write it with 'eigenglue spectrum')");
  const fs::path dir = fs::path(a.spectrum).parent_path();
  const fs::path sidecar = dir / j["eigenvectors"].get<std::string>();
  run.add_input(sidecar);
  auto s = spectrum::spectrum_from_json(text, sidecar);
  if (a.tau > 0.0) {
    s.tau = a.tau;
    s.clusters = spectrum::cluster_indices(s.eigenvalues, s.next_eigenvalue, s.tau, s.last_cluster_closed);
  }
  const auto& source = j["source"];
  const auto src = load_source(source.at("mesh").get<std::string>(), dir);
  record(run, src);
  const auto kind = parse_kind(source.at("kind").get<std::string>());
  const auto beta = load_density(source.at("density").get<std::string>(), src.mesh, kind, 0.0, run, dir);
  const auto p = spectrum::assemble(src.mesh, beta, kind,
                                    source.value("mass", std::string("lumped")) == "consistent"
                                        ? spectrum::MassKind::Consistent
                                        : spectrum::MassKind::Lumped);
  if (p.dim != s.eigenvectors.rows()) throw ValidationError("spectrum does not match its source mesh");
  const auto F = variation::parse_functional(a.F);
  if (F.m > s.k()) throw ValidationError("spectrum has fewer modes than the functional uses");
  certificates::BuildOptions o;
  o.seed = seed;
  o.refine = !a.no_refine;
  if (a.rule == "uniform") o.rule = certificates::ScaleRule::Uniform;
  else if (a.rule != "weights") throw ValidationError("rule must be weights or uniform");
  const auto t = variation::cluster_weights(F, s).t;
  const auto cert = certificates::build_eigenmap(p, s, t, o);
  const auto r = certificates::conformality_defect(cert, src.mesh, a.floor);
  run.write("certificate.json", certificates::to_json(cert, r));
  run.write("defects.csv", certificates::defect_csv(r));
  std::cout << "normalization defect sup " << cert.normalization_sup << ", conformality defect mean " << r.mean
            << ", branch candidates " << r.branch_candidates.size() << "\n";
}

std::string default_out(const std::string& command) {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return "runs/" + command + "-" + buf;
}

} // namespace
} // namespace eigenglue::cli

int main(int argc, char** argv) {
  using namespace eigenglue;
  using namespace eigenglue::cli;

  CLI::App app{"eigenglue: eigenvalue maximization, certificates and gluing asymptotics on triangle meshes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EIGENGLUE_VERSION);
  Common common;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", common.out, "run directory (default runs/<command>-<time>)");
    s->add_option("--seed", common.seed, "seed for every random choice")->each([&](const std::string&) {
      common.seed_given = true;
    });
  };

  std::string mesh_spec;
  auto* mesh_cmd = app.add_subcommand("mesh", "build or convert a mesh");
  mesh_cmd->add_option("source", mesh_spec, "file (.off/.obj/.json) or builtin (sphere:L, torus:N, ...)")->required();
  add_common(mesh_cmd);

  SpectrumArgs sa;
  auto* spec_cmd = app.add_subcommand("spectrum", "Laplace or Steklov spectrum");
  spec_cmd->add_option("--mesh", sa.mesh, "mesh file or builtin")->required();
  spec_cmd->add_option("--density", sa.density, "density JSON or 'uniform'");
  spec_cmd->add_option("--kind", sa.kind, "laplace | steklov");
  spec_cmd->add_option("--k", sa.k, "number of nonzero modes")->check(CLI::PositiveNumber);
  spec_cmd->add_option("--tol", sa.tol, "relative residual tolerance");
  spec_cmd->add_option("--mass", sa.mass, "lumped | consistent");
  add_common(spec_cmd);

  OptimizeArgs oa;
  auto* opt_cmd = app.add_subcommand("optimize", "minimize E over densities");
  opt_cmd->add_option("config", oa.config, "config file (key = value)")->required()->check(CLI::ExistingFile);
  opt_cmd->add_flag("--dry-run", oa.dry_run, "validate without solving");
  add_common(opt_cmd);

  GlueArgs ga;
  std::string glue_what;
  auto* glue_cmd = app.add_subcommand("glue", "attach a handle or a strip");
  glue_cmd->add_option("what", glue_what, "handle | strip")->required()->check(CLI::IsMember({"handle", "strip"}));
  glue_cmd->add_option("--mesh", ga.mesh, "mesh file or builtin")->required();
  glue_cmd->add_option("--eps", ga.eps, "disk radius / strip half width");
  glue_cmd->add_option("--l", ga.l, "aspect: length is l * eps");
  glue_cmd->add_option("--n-theta", ga.n_theta, "vertices around the neck");
  glue_cmd->add_option("--p", ga.p, "first vertex");
  glue_cmd->add_option("--q", ga.q, "second vertex");
  glue_cmd->add_option("--orientation", ga.orientation, "strips: preserve | reverse");
  add_common(glue_cmd);

  SweepArgs wa;
  std::string sweep_what;
  auto* sweep_cmd = app.add_subcommand("sweep", "eps sweeps of gluing deficits, or optimizer grids");
  sweep_cmd->add_option("what", sweep_what, "handle | strip | optimize")
      ->required()
      ->check(CLI::IsMember({"handle", "strip", "optimize"}));
  sweep_cmd->add_option("--mesh", wa.mesh, "base mesh (default graded-torus / disk:24)");
  sweep_cmd->add_option("--config", wa.config, "optimizer config (sweep optimize)");
  sweep_cmd->add_option("--eps", wa.eps, "comma separated, strictly decreasing")->delimiter(',');
  sweep_cmd->add_option("--l", wa.ls, "aspect (comma separated for sweep optimize)")->delimiter(',');
  sweep_cmd->add_option("--n-theta", wa.n_theta, "vertices around the neck");
  sweep_cmd->add_option("--k", wa.k, "modes per spectrum");
  sweep_cmd->add_option("--upper-index", wa.upper_index, "mode for the upper deviation fit");
  sweep_cmd->add_option("--p", wa.p, "first vertex");
  sweep_cmd->add_option("--q", wa.q, "second vertex");
  sweep_cmd->add_option("--orientation", wa.orientation, "strips: preserve | reverse");
  sweep_cmd->add_option("--jobs", common.jobs, "parallel sweep points")->check(CLI::PositiveNumber);
  add_common(sweep_cmd);

  CertifyArgs ca;
  auto* cert_cmd = app.add_subcommand("certify", "eigenmap certificate for a stored spectrum");
  cert_cmd->add_option("--spectrum", ca.spectrum, "spectrum.json written by 'spectrum' or 'optimize'")
      ->required()
      ->check(CLI::ExistingFile);
  cert_cmd->add_option("--F", ca.F, "functional, e.g. inv1, inv1+inv2, exp:1,1@0.5");
  cert_cmd->add_option("--rule", ca.rule, "weights | uniform");
  cert_cmd->add_option("--floor", ca.floor, "branch-point energy floor (relative)");
  cert_cmd->add_option("--tau", ca.tau, "cluster tolerance (default: the one stored with the spectrum)");
  cert_cmd->add_flag("--no-refine", ca.no_refine, "skip the cluster search");
  add_common(cert_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  std::vector<std::string> args(argv + 1, argv + argc);
  const std::string out = common.out.empty() ? default_out(command) : common.out;

  std::optional<RunDir> run;
  try {
    run.emplace(out, command, args, common.seed);
    if (command == "mesh") cmd_mesh(*run, mesh_spec);
    else if (command == "spectrum") cmd_spectrum(*run, sa, common.seed);
    else if (command == "optimize") cmd_optimize(*run, oa, common);
    else if (command == "glue") cmd_glue(*run, glue_what, ga);
    else if (command == "sweep") {
      if (sweep_what == "optimize") {
        if (wa.config.empty()) throw ValidationError("sweep optimize needs --config");
        cmd_sweep_optimize(*run, wa, common);
      } else {
        if (wa.eps.empty()) throw ValidationError("sweep " + sweep_what + " needs --eps");
        if (wa.ls.size() > 1) throw ValidationError("sweep " + sweep_what + " takes a single --l");
        if (!wa.ls.empty()) wa.l = wa.ls.front();
        cmd_sweep_asymptotic(*run, sweep_what, wa, common);
      }
    } else if (command == "certify") cmd_certify(*run, ca, common.seed);
    run->finish(0);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (run) run->finish(2, e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    if (run) run->finish(3, e.what());
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    if (run) run->finish(3, e.what());
    return 3;
  }
}
