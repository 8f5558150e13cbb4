#include "eigenglue/spectrum.hpp"

#include "eigenglue/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace eigenglue::spectrum {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_le(std::ostream& out, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  char b[8];
  std::memcpy(b, &u, 8);
  out.write(b, 8);
}

double get_le(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw ValidationError("eigenvector sidecar is truncated");
  std::uint64_t u;
  std::memcpy(&u, b, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}

} // namespace

std::string to_json(const SpectrumResult& s) {
  nlohmann::ordered_json j;
  j["type"] = "SpectrumResult";
  j["kind"] = s.kind == ProblemKind::Laplace ? "laplace" : "steklov";
  j["dim"] = s.eigenvectors.rows();
  j["modes"] = s.eigenvalues.size();
  j["beta_total"] = s.beta_total;
  j["eigenvalues"] = std::vector<double>(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
  j["normalized"] = normalized(s);
  j["residuals"] = s.residuals;
  j["orthonormality_defect"] = s.orthonormality_defect;
  auto cl = nlohmann::ordered_json::array();
  for (const auto& c : s.clusters) cl.push_back({c.first, c.last});
  j["clusters"] = std::move(cl);
  j["next_eigenvalue"] = s.next_eigenvalue;
  j["last_cluster_closed"] = s.last_cluster_closed;
  j["tol"] = s.tol;
  j["tau"] = s.tau;
  j["method"] = s.method;
  j["iterations"] = s.iterations;
  return j.dump(2);
}

SpectrumResult spectrum_from_json(const std::string& text, const std::optional<std::filesystem::path>& sidecar) {
  try {
    const auto j = nlohmann::json::parse(text);
    SpectrumResult s;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "laplace" && kind != "steklov") throw ValidationError("spectrum JSON: unknown kind '" + kind + "'");
    s.kind = kind == "laplace" ? ProblemKind::Laplace : ProblemKind::Steklov;
    s.beta_total = j.at("beta_total").get<double>();
    const auto ev = j.at("eigenvalues").get<std::vector<double>>();
    s.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    s.residuals = j.value("residuals", std::vector<double>(ev.size(), 0.0));
    s.orthonormality_defect = j.value("orthonormality_defect", 0.0);
    s.tol = j.value("tol", 1e-9);
    s.tau = j.value("tau", 1e-6);
    s.method = j.value("method", std::string());
    s.iterations = j.value("iterations", 0);
    const auto& nx = j.at("next_eigenvalue");
    s.next_eigenvalue = nx.is_number() ? nx.get<double>() : std::numeric_limits<double>::infinity();
    s.clusters = cluster_indices(s.eigenvalues, s.next_eigenvalue, s.tau, s.last_cluster_closed);
    if (sidecar) {
      const int rows = j.at("dim").get<int>();
      s.eigenvectors = read_eigenvectors(*sidecar, rows, static_cast<int>(ev.size()));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("spectrum JSON: ") + e.what());
  }
}

void write_eigenvectors(const std::filesystem::path& path, const SpectrumResult& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  for (Eigen::Index i = 0; i < s.eigenvectors.rows(); ++i)
    for (Eigen::Index c = 0; c < s.eigenvectors.cols(); ++c) put_le(out, s.eigenvectors(i, c));
}

Eigen::MatrixXd read_eigenvectors(const std::filesystem::path& path, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open eigenvector sidecar '" + path.string() + "'");
  Eigen::MatrixXd X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) X(i, c) = get_le(in);
  return X;
}

} // namespace eigenglue::spectrum
