#include "eigenglue/mesh.hpp"

#include "eigenglue/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace eigenglue::mesh {

namespace {

// Next line with comments stripped and content; false at EOF.
bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

void fan(const std::vector<int>& poly, std::vector<Face>& faces, const std::string& where) {
  if (poly.size() < 3) throw ValidationError(where + ": polygon with fewer than 3 vertices");
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

void put_double(std::ostream& out, double x) {
  out << std::setprecision(17) << x;
}

const std::vector<Eigen::Vector3d>& require_positions(const TriSurface& m) {
  if (!m.positions()) throw ValidationError("mesh carries no embedding; write canonical JSON instead");
  return *m.positions();
}

} // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".off") return MeshFormat::OFF;
  if (ext == ".obj") return MeshFormat::OBJ;
  throw ValidationError("unknown mesh format for '" + path.string() + "' (expected .off or .obj)");
}

TriSurface load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

TriSurface load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mesh file '" + path.string() + "'");
  return format == MeshFormat::OFF ? read_off(in) : read_obj(in);
}

TriSurface read_off(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line)) throw ValidationError("OFF: empty input");
  std::istringstream head(line);
  std::string magic;
  head >> magic;
  if (magic != "OFF") throw ValidationError("OFF: missing 'OFF' header");
  long nv = -1, nf = -1, ne = 0;
  if (!(head >> nv)) {
    if (!next_content_line(in, line)) throw ValidationError("OFF: missing counts");
    std::istringstream cs(line);
    cs >> nv >> nf >> ne;
  } else {
    head >> nf >> ne;
  }
  if (nv <= 0 || nf <= 0) throw ValidationError("OFF: need at least one vertex and one face");
  std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(nv));
  for (long v = 0; v < nv; ++v) {
    if (!next_content_line(in, line)) throw ValidationError("OFF: truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> pos[v].x() >> pos[v].y() >> pos[v].z())) throw ValidationError("OFF: bad vertex line " + std::to_string(v));
  }
  std::vector<Face> faces;
  for (long f = 0; f < nf; ++f) {
    if (!next_content_line(in, line)) throw ValidationError("OFF: truncated face list");
    std::istringstream ls(line);
    int k = 0;
    if (!(ls >> k) || k < 3) throw ValidationError("OFF: bad face line " + std::to_string(f));
    std::vector<int> poly(static_cast<std::size_t>(k));
    for (auto& i : poly) {
      if (!(ls >> i) || i < 0 || i >= nv) throw ValidationError("OFF: bad vertex index in face " + std::to_string(f));
    }
    fan(poly, faces, "OFF");
  }
  return TriSurface::from_positions(std::move(pos), std::move(faces));
}

TriSurface read_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> pos;
  std::vector<Face> faces;
  std::string line;
  while (next_content_line(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw ValidationError("OBJ: bad vertex line");
      pos.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        int idx = 0;
        try {
          idx = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw ValidationError("OBJ: bad face token '" + tok + "'");
        }
        idx = idx < 0 ? static_cast<int>(pos.size()) + idx : idx - 1;
        if (idx < 0 || idx >= static_cast<int>(pos.size())) throw ValidationError("OBJ: face index out of range");
        poly.push_back(idx);
      }
      fan(poly, faces, "OBJ");
    }
  }
  if (faces.empty()) throw ValidationError("OBJ: no faces");
  return TriSurface::from_positions(std::move(pos), std::move(faces));
}

void write_off(std::ostream& out, const TriSurface& m) {
  const auto& pos = require_positions(m);
  out << "OFF\n" << m.num_vertices() << ' ' << m.num_faces() << ' ' << m.num_edges() << '\n';
  for (const auto& p : pos) {
    put_double(out, p.x());
    out << ' ';
    put_double(out, p.y());
    out << ' ';
    put_double(out, p.z());
    out << '\n';
  }
  for (const auto& f : m.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void write_obj(std::ostream& out, const TriSurface& m) {
  const auto& pos = require_positions(m);
  for (const auto& p : pos) {
    out << "v ";
    put_double(out, p.x());
    out << ' ';
    put_double(out, p.y());
    out << ' ';
    put_double(out, p.z());
    out << '\n';
  }
  for (const auto& f : m.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_mesh(const std::filesystem::path& path, const TriSurface& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  std::string ext = path.extension().string();
  if (ext == ".json") {
    out << to_canonical_json(m) << '\n';
    return;
  }
  if (format_from_path(path) == MeshFormat::OFF)
    write_off(out, m);
  else
    write_obj(out, m);
}

std::string to_canonical_json(const TriSurface& m) {
  nlohmann::ordered_json j;
  j["type"] = "TriSurface";
  j["num_vertices"] = m.num_vertices();
  auto faces = nlohmann::ordered_json::array();
  for (const auto& f : m.faces()) faces.push_back({f[0], f[1], f[2]});
  j["faces"] = std::move(faces);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : m.edges()) edges.push_back({e[0], e[1]});
  j["edges"] = std::move(edges);
  j["edge_lengths"] = m.edge_lengths();
  j["boundary_loops"] = m.boundary_loops();
  if (m.positions()) {
    auto pos = nlohmann::ordered_json::array();
    for (const auto& p : *m.positions()) pos.push_back({p.x(), p.y(), p.z()});
    j["positions"] = std::move(pos);
  } else {
    j["positions"] = nullptr;
  }
  return j.dump();
}

TriSurface from_canonical_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("mesh JSON: ") + e.what());
  }
  try {
    const int V = j.at("num_vertices").get<int>();
    auto faces = j.at("faces").get<std::vector<Face>>();
    auto edges = j.at("edges").get<std::vector<Edge>>();
    auto lengths = j.at("edge_lengths").get<std::vector<double>>();
    if (edges.size() != lengths.size()) throw ValidationError("mesh JSON: edges and edge_lengths differ in size");
    std::map<std::pair<int, int>, double> len;
    for (std::size_t e = 0; e < edges.size(); ++e) len[std::minmax(edges[e][0], edges[e][1])] = lengths[e];
    std::vector<FaceLengths> fl;
    fl.reserve(faces.size());
    for (const auto& f : faces) {
      FaceLengths L;
      for (int k = 0; k < 3; ++k) {
        auto it = len.find(std::minmax(f[k], f[(k + 1) % 3]));
        if (it == len.end()) throw ValidationError("mesh JSON: face edge missing from edge list");
        L[k] = it->second;
      }
      fl.push_back(L);
    }
    std::optional<std::vector<Eigen::Vector3d>> pos;
    if (j.contains("positions") && !j["positions"].is_null()) {
      std::vector<Eigen::Vector3d> p;
      for (const auto& row : j["positions"]) p.emplace_back(row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>());
      pos = std::move(p);
    }
    return TriSurface::from_face_lengths(V, std::move(faces), fl, std::move(pos));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("mesh JSON: ") + e.what());
  }
}

} // namespace eigenglue::mesh
