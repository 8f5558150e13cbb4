#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eigenglue::mesh {

using Face = std::array<int, 3>;
using Edge = std::array<int, 2>; // always stored with [0] < [1]

// Per-face corner lengths: lengths[f][i] is the length of the edge from
// corner i to corner (i+1)%3 of face f.
using FaceLengths = std::array<double, 3>;

/// Oriented triangulated surface carrying an intrinsic metric (one length per
/// edge). A 3D embedding may be attached for I/O; it never enters the metric.
///
/// Instances are immutable once built; every constructor path validates
/// manifoldness, orientation consistency, strict triangle inequalities and
/// extracts the boundary loops.
class TriSurface {
public:
  /// Build from per-face corner lengths. Lengths of an edge seen from its two
  /// faces must agree to 1e-8 relative; the value from the lower face index wins.
  static TriSurface from_face_lengths(int num_vertices, std::vector<Face> faces,
                                      const std::vector<FaceLengths>& face_lengths,
                                      std::optional<std::vector<Eigen::Vector3d>> positions = std::nullopt);

  /// Build from an embedding; edge lengths are Euclidean distances.
  static TriSurface from_positions(std::vector<Eigen::Vector3d> positions, std::vector<Face> faces);

  int num_vertices() const { return num_vertices_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& edge_lengths() const { return edge_lengths_; }
  /// face_edges()[f][i] is the edge joining corner i and corner (i+1)%3.
  const std::vector<std::array<int, 3>>& face_edges() const { return face_edges_; }
  /// Up to two incident faces per edge; the second is -1 on the boundary.
  const std::vector<std::array<int, 2>>& edge_faces() const { return edge_faces_; }
  /// Boundary cycles, each oriented with the surface on its left and starting
  /// at its smallest vertex index. Loops are sorted by that first vertex.
  const std::vector<std::vector<int>>& boundary_loops() const { return boundary_loops_; }
  const std::optional<std::vector<Eigen::Vector3d>>& positions() const { return positions_; }

  double edge_length(int e) const { return edge_lengths_[static_cast<std::size_t>(e)]; }
  FaceLengths face_lengths(int f) const;
  double face_area(int f) const;
  double total_area() const;
  std::vector<double> face_areas() const;

  /// Index of edge {a,b}, or -1.
  int find_edge(int a, int b) const;

  bool is_closed() const { return boundary_loops_.empty(); }
  std::vector<bool> boundary_vertex_mask() const;
  int euler_characteristic() const { return num_vertices() - num_edges() + num_faces(); }
  int num_components() const { return num_components_; }
  int num_boundary_components() const { return static_cast<int>(boundary_loops_.size()); }
  /// Sum of component genera, from chi = 2c - 2g - b.
  int genus() const;
  double boundary_length() const;

  /// Vertex -> incident faces.
  std::vector<std::vector<int>> vertex_faces() const;
  /// Vertex -> neighbouring vertices (sorted).
  std::vector<std::vector<int>> vertex_neighbors() const;

private:
  TriSurface() = default;
  void build_topology(const std::vector<FaceLengths>* face_lengths);

  int num_vertices_ = 0;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<double> edge_lengths_;
  std::vector<std::array<int, 3>> face_edges_;
  std::vector<std::array<int, 2>> edge_faces_;
  std::vector<std::vector<int>> boundary_loops_;
  std::optional<std::vector<Eigen::Vector3d>> positions_;
  int num_components_ = 0;
};

/// Area of a triangle from its three side lengths (Heron, stable ordering).
double triangle_area(double a, double b, double c);

/// Rebuild a surface with new lengths on the same combinatorics.
TriSurface with_edge_lengths(const TriSurface& m, const std::vector<double>& lengths);

/// Shortest-path distances along edges from a source vertex.
std::vector<double> graph_distances(const TriSurface& m, int source);

// ---------------------------------------------------------------------------
// I/O

enum class MeshFormat { OFF, OBJ };

MeshFormat format_from_path(const std::filesystem::path& path);
TriSurface load_mesh(const std::filesystem::path& path);
TriSurface load_mesh(const std::filesystem::path& path, MeshFormat format);
TriSurface read_off(std::istream& in);
TriSurface read_obj(std::istream& in);
void write_off(std::ostream& out, const TriSurface& m);
void write_obj(std::ostream& out, const TriSurface& m);
void save_mesh(const std::filesystem::path& path, const TriSurface& m);

/// Canonical JSON text (fixed key order, round-trip doubles).
std::string to_canonical_json(const TriSurface& m);
TriSurface from_canonical_json(const std::string& text);

// ---------------------------------------------------------------------------
// Builtin surfaces

/// Unit icosphere after `subdivisions` loop-style midpoint subdivisions:
/// 10*4^s + 2 vertices.
TriSurface icosphere(int subdivisions, double radius = 1.0);

/// Flat torus R^2 / (Z a + Z b) meshed by an n x n grid in lattice
/// coordinates. Lengths come from the lattice; the attached embedding is a
/// ring torus used only for visualization.
TriSurface flat_torus(const Eigen::Vector2d& a, const Eigen::Vector2d& b, int n);

/// Unit disk made of `rings` concentric rings with 6j vertices on ring j.
TriSurface unit_disk(int rings);

/// Genus-g closed surface: sphere (g = 0), flat square torus (g = 1), or a
/// flat torus carrying g - 1 additional handles.
TriSurface genus_surface(int genus, int resolution);

enum class BuiltinKind { Sphere, FlatTorus, Disk, Genus };

struct BuiltinParams {
  BuiltinKind kind = BuiltinKind::Sphere;
  int resolution = 3;
  Eigen::Vector2d lattice_a{1.0, 0.0};
  Eigen::Vector2d lattice_b{0.0, 1.0};
  int genus = 0;
};

TriSurface builtin_surface(const BuiltinParams& params);

/// Square unit torus with polar-graded patches around the given lattice
/// points. Each patch replaces a (2m x 2m)-cell block of an n x n grid by
/// concentric rings of `ring_vertices` vertices whose radii include every
/// value `outer_radius * 2^(-j / rings_per_halving)` down to `inner_radius`.
/// Ring vertices share angles, so graph distance from the centre to a ring
/// vertex equals the ring radius exactly.
struct GradedTorusParams {
  int grid = 40;
  int patch_half_cells = 6;
  double outer_radius = 0.1;
  double inner_radius = 0.0015;
  int rings_per_halving = 4;
  std::vector<Eigen::Vector2d> centers{{0.25, 0.5}, {0.75, 0.5}};
};

struct GradedTorus {
  TriSurface surface;
  std::vector<int> center_vertices;
};

GradedTorus graded_flat_torus(const GradedTorusParams& params);

/// Flat disk of radius `radius` with geometric polar grading around its
/// centre (vertex 0): rings at radius * q^j down to `inner_radius`, each with
/// `ring_vertices` vertices.
TriSurface graded_flat_disk(double radius, double inner_radius, int ring_vertices, int rings_per_halving);

// ---------------------------------------------------------------------------
// Surgery

struct SurgeryReport {
  double eps = 0.0;
  double aspect = 0.0; // l
  int n_theta = 0;
  int n_rows = 0;
  std::vector<int> removed_faces;    // input face ids
  std::vector<int> removed_vertices; // input vertex ids
  int inserted_vertex_begin = 0;     // output ids [begin, end)
  int inserted_vertex_end = 0;
  int inserted_face_begin = 0;
  int inserted_face_end = 0;
  std::vector<int> rim_p; // output ids of the rim/arc at p (surface side)
  std::vector<int> rim_q;
  std::vector<int> seam_p; // equal-length seam rings, seam_p[i] <-> seam_q[i]
  std::vector<int> seam_q;
  double area_removed = 0.0;
  double area_added = 0.0;
  bool one_ring_fallback_p = false; // no face was within eps: the star was removed
  bool one_ring_fallback_q = false;
  std::vector<int> vertex_map; // input vertex -> output vertex, -1 if removed
  int split_vertices = 0;      // boundary points inserted to make arcs exact (strip)
};

struct SurgeryResult {
  TriSurface surface;
  SurgeryReport report;
};

/// Remove geodesic eps-disks around p and q and glue a flat cylinder of
/// circumference ~2 pi eps and height l*eps between the two rims.
SurgeryResult attach_handle(const TriSurface& m, int p, int q, double eps, double l, int n_theta);

/// Only the excision step of attach_handle: the surface with two holes.
SurgeryResult excise_disks(const TriSurface& m, int p, int q, double eps);

enum class StripOrientation { Preserve, Reverse };

/// Glue the rectangle [-eps, eps] x [0, l*eps] along its short sides to the
/// boundary arcs of arclength radius eps around boundary vertices p and q.
SurgeryResult attach_strip(const TriSurface& m, int p, int q, double eps, double l, StripOrientation orientation);

} // namespace eigenglue::mesh
