#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dmrfem {

/// Conforming simplicial triangulation of a polygonal (d=2) or polyhedral
/// (d=3) domain. Immutable after construction; the constructor validates
/// connectivity, orientation and boundary flags.
class Triangulation {
 public:
  static constexpr int kNoDof = -1;

  /// `coords` holds dim values per node, `cells` holds dim+1 vertex ids per
  /// element, `boundary` one flag per node. Elements with negative
  /// orientation are reordered.
  Triangulation(int dim, std::vector<double> coords, std::vector<int> cells,
                std::vector<std::uint8_t> boundary);

  int dim() const noexcept { return dim_; }
  int vertices_per_cell() const noexcept { return dim_ + 1; }
  std::size_t num_nodes() const noexcept { return boundary_.size(); }
  std::size_t num_cells() const noexcept { return cells_.size() / static_cast<std::size_t>(dim_ + 1); }
  std::size_t num_interior() const noexcept { return interior_nodes_.size(); }

  std::span<const double> node(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<const int> cell(std::size_t k) const {
    const auto nv = static_cast<std::size_t>(dim_ + 1);
    return {cells_.data() + k * nv, nv};
  }
  bool on_boundary(std::size_t i) const { return boundary_[i] != 0; }
  /// Interior dof id of node i, or kNoDof for boundary nodes.
  int interior_index(std::size_t i) const { return interior_index_[i]; }
  /// Node id of each interior dof.
  std::span<const int> interior_nodes() const { return interior_nodes_; }

  /// Signed measure (always > 0 after construction).
  double cell_measure(std::size_t k) const;

  const std::vector<double>& coords() const noexcept { return coords_; }
  const std::vector<int>& cells() const noexcept { return cells_; }
  const std::vector<std::uint8_t>& boundary_flags() const noexcept { return boundary_; }

 private:
  void validate_and_orient();

  int dim_;
  std::vector<double> coords_;
  std::vector<int> cells_;
  std::vector<std::uint8_t> boundary_;
  std::vector<int> interior_index_;
  std::vector<int> interior_nodes_;
};

/// Geometric quantities every stability / inverse estimate is phrased in.
struct MeshStats {
  int dim = 2;
  double h = 0;        ///< max element diameter
  double kappa_h = 0;  ///< min altitude over all elements
  double nu = 0;       ///< max h_K / rho_K (shape regularity)
  double gamma = 0;    ///< max h / h_K (inverse assumption)
  double total_measure = 0;
  std::vector<double> node_measures;    ///< |Lambda_j| for every node
  std::vector<double> lumped_measures;  ///< |Lambda_j| for interior dofs
};

/// Per-element geometry used by stats and tests.
struct CellGeometry {
  double measure;
  double diameter;
  double min_altitude;
  double inradius;
};

CellGeometry cell_geometry(const Triangulation& t, std::size_t k);

/// Barycentric-domain measures |Lambda_j|: each element gives |K|/(d+1) to
/// each of its vertices.
std::vector<double> barycentric_measures(const Triangulation& t);

MeshStats compute_mesh_stats(const Triangulation& t);

enum class DiagonalPattern { diagonal };

/// Unit square split into n x n cells, each cut along the diagonal from its
/// lower-left to its upper-right corner. Node (i, j) has id i + j (n + 1).
Triangulation generate_structured_mesh(int n, DiagonalPattern pattern = DiagonalPattern::diagonal);

struct AcutenessViolation {
  int node_i;
  int node_j;
  double stiffness;        ///< (grad phi_i, grad phi_j)
  double opposite_angles;  ///< sum of angles opposite the shared edge
};

struct AcutenessReport {
  bool pass = true;
  bool angle_criterion_pass = true;  ///< alpha^K + alpha^L <= pi on every interior edge
  double tolerance = 0;
  std::vector<AcutenessViolation> violating_pairs;
};

/// Checks (grad phi_i, grad phi_j) <= tol for every pair joined by an edge
/// interior to the domain (pairs along the boundary carry no Dirichlet dof).
/// The opposite-angle criterion is evaluated independently and reported.
AcutenessReport check_acuteness(const Triangulation& t);

/// Full stiffness matrix over all nodes as a dense-free triplet list
/// (row, col, value), summed per pair. Exposed for diagnostics.
struct NodePairEntry {
  int i;
  int j;
  double value;
};
std::vector<NodePairEntry> full_stiffness_entries(const Triangulation& t);

void save_mesh(const Triangulation& t, const std::filesystem::path& path,
               const std::vector<std::string>& comment_lines = {});
Triangulation load_mesh(const std::filesystem::path& path);

}  // namespace dmrfem
