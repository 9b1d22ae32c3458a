#include "dmrfem/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "dmrfem/errors.hpp"
#include "geometry.hpp"

namespace dmrfem {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t r = 0; r < a.size(); ++r) s += (a[r] - b[r]) * (a[r] - b[r]);
  return std::sqrt(s);
}

double signed_measure(const Triangulation& t, std::span<const int> c) {
  if (t.dim() == 2) {
    const auto p0 = t.node(c[0]), p1 = t.node(c[1]), p2 = t.node(c[2]);
    return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
  }
  const auto p0 = t.node(c[0]);
  double e[3][3];
  for (int j = 0; j < 3; ++j) {
    const auto pj = t.node(c[j + 1]);
    for (int r = 0; r < 3; ++r) e[j][r] = pj[r] - p0[r];
  }
  const double det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
                     e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
                     e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
  return det / 6.0;
}

// Orientation of point p relative to the face (a, b) / (a, b, c).
double side_of_face(const Triangulation& t, const std::vector<int>& face, int p) {
  std::vector<int> simplex(face);
  simplex.push_back(p);
  return signed_measure(t, simplex);
}

double angle_at(std::span<const double> apex, std::span<const double> a, std::span<const double> b) {
  const double ux = a[0] - apex[0], uy = a[1] - apex[1];
  const double vx = b[0] - apex[0], vy = b[1] - apex[1];
  return std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
}

using Face = std::vector<int>;

// Sorted face -> (cell id, opposite local vertex) for every incident cell.
std::map<Face, std::vector<std::pair<std::size_t, int>>> collect_faces(const Triangulation& t) {
  std::map<Face, std::vector<std::pair<std::size_t, int>>> faces;
  const int nv = t.vertices_per_cell();
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    for (int opp = 0; opp < nv; ++opp) {
      Face f;
      for (int j = 0; j < nv; ++j) {
        if (j != opp) f.push_back(c[j]);
      }
      std::sort(f.begin(), f.end());
      faces[f].emplace_back(k, opp);
    }
  }
  return faces;
}

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

Triangulation::Triangulation(int dim, std::vector<double> coords, std::vector<int> cells,
                             std::vector<std::uint8_t> boundary)
    : dim_(dim), coords_(std::move(coords)), cells_(std::move(cells)), boundary_(std::move(boundary)) {
  validate_and_orient();
}

double Triangulation::cell_measure(std::size_t k) const { return signed_measure(*this, cell(k)); }

void Triangulation::validate_and_orient() {
  if (dim_ != 2 && dim_ != 3) throw ValidationError("dimension must be 2 or 3");
  const std::size_t n = boundary_.size();
  if (coords_.size() != n * static_cast<std::size_t>(dim_)) {
    throw ValidationError("coordinate count does not match node count");
  }
  const auto nv = static_cast<std::size_t>(dim_ + 1);
  if (cells_.empty() || cells_.size() % nv != 0) throw ValidationError("element list is empty or ragged");
  for (double x : coords_) {
    if (!std::isfinite(x)) throw ValidationError("non-finite node coordinate");
  }

  std::vector<int> use_count(n, 0);
  for (std::size_t k = 0; k < num_cells(); ++k) {
    auto* c = cells_.data() + k * nv;
    for (std::size_t j = 0; j < nv; ++j) {
      if (c[j] < 0 || static_cast<std::size_t>(c[j]) >= n) {
        throw ValidationError("element " + std::to_string(k) + " references vertex " + std::to_string(c[j]) +
                              " out of range [0, " + std::to_string(n) + ")");
      }
      for (std::size_t i = 0; i < j; ++i) {
        if (c[i] == c[j]) throw InvalidMesh("element " + std::to_string(k) + " repeats a vertex");
      }
      ++use_count[c[j]];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (use_count[i] == 0) throw ValidationError("node " + std::to_string(i) + " belongs to no element");
  }

  // Orientation fix and degeneracy check, relative to the local edge scale.
  for (std::size_t k = 0; k < num_cells(); ++k) {
    auto* c = cells_.data() + k * nv;
    double vol = signed_measure(*this, {c, nv});
    double longest = 0;
    for (std::size_t i = 0; i < nv; ++i) {
      for (std::size_t j = i + 1; j < nv; ++j) longest = std::max(longest, distance(node(c[i]), node(c[j])));
    }
    if (!(std::abs(vol) > 1e-14 * std::pow(longest, dim_))) {
      throw InvalidMesh("degenerate element " + std::to_string(k));
    }
    if (vol < 0) std::swap(c[nv - 2], c[nv - 1]);
  }

  {
    std::map<Face, std::size_t> seen;
    for (std::size_t k = 0; k < num_cells(); ++k) {
      const auto c = cell(k);
      Face f(c.begin(), c.end());
      std::sort(f.begin(), f.end());
      if (auto [it, fresh] = seen.emplace(f, k); !fresh) {
        throw ValidationError("duplicated element " + std::to_string(k) + " (same vertices as element " +
                              std::to_string(it->second) + ")");
      }
    }
  }

  // Conformity: a face borders at most two cells, lying on opposite sides.
  std::vector<std::uint8_t> on_boundary_face(n, 0);
  for (const auto& [face, incident] : collect_faces(*this)) {
    if (incident.size() > 2) throw ValidationError("overlapping elements: a face is shared by more than two elements");
    if (incident.size() == 1) {
      for (int v : face) on_boundary_face[v] = 1;
      continue;
    }
    const int pa = cell(incident[0].first)[incident[0].second];
    const int pb = cell(incident[1].first)[incident[1].second];
    const double sa = side_of_face(*this, face, pa);
    const double sb = side_of_face(*this, face, pb);
    if (!(sa * sb < 0)) {
      throw ValidationError("overlapping elements " + std::to_string(incident[0].first) + " and " +
                            std::to_string(incident[1].first));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (on_boundary_face[i] && !boundary_[i]) {
      throw ValidationError("node " + std::to_string(i) + " lies on the boundary but is flagged interior");
    }
    if (!on_boundary_face[i] && boundary_[i]) {
      throw ValidationError("node " + std::to_string(i) + " is flagged boundary but is not on the boundary");
    }
  }

  // Interior vertices must be surrounded exactly once (no folded coverings).
  if (dim_ == 2) {
    std::vector<double> angle_sum(n, 0.0);
    for (std::size_t k = 0; k < num_cells(); ++k) {
      const auto c = cell(k);
      for (int j = 0; j < 3; ++j) {
        angle_sum[c[j]] += angle_at(node(c[j]), node(c[(j + 1) % 3]), node(c[(j + 2) % 3]));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!boundary_[i] && std::abs(angle_sum[i] - 2 * std::numbers::pi) > 1e-8) {
        throw ValidationError("elements around interior node " + std::to_string(i) + " overlap");
      }
    }
  }

  interior_index_.assign(n, kNoDof);
  interior_nodes_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!boundary_[i]) {
      interior_index_[i] = static_cast<int>(interior_nodes_.size());
      interior_nodes_.push_back(static_cast<int>(i));
    }
  }
}

CellGeometry cell_geometry(const Triangulation& t, std::size_t k) {
  const auto c = t.cell(k);
  const int nv = t.vertices_per_cell();
  CellGeometry g{};
  g.measure = std::abs(t.cell_measure(k));
  if (!(g.measure > 0)) throw InvalidMesh("degenerate element " + std::to_string(k));
  for (int i = 0; i < nv; ++i) {
    for (int j = i + 1; j < nv; ++j) g.diameter = std::max(g.diameter, distance(t.node(c[i]), t.node(c[j])));
  }
  if (t.dim() == 2) {
    double perimeter = 0, longest = 0;
    for (int j = 0; j < 3; ++j) {
      const double e = distance(t.node(c[j]), t.node(c[(j + 1) % 3]));
      perimeter += e;
      longest = std::max(longest, e);
    }
    g.min_altitude = 2.0 * g.measure / longest;
    g.inradius = 2.0 * g.measure / perimeter;
  } else {
    // Face areas from the norms of the barycentric gradients: |F_j| = d|K| |grad lambda_j|.
    const auto eg = detail::element_gradients(t, k);
    double surface = 0, largest = 0;
    for (int j = 0; j < 4; ++j) {
      const double area = 3.0 * g.measure * std::sqrt(detail::dot3(eg.grad[j], eg.grad[j]));
      surface += area;
      largest = std::max(largest, area);
    }
    g.min_altitude = 3.0 * g.measure / largest;
    g.inradius = 3.0 * g.measure / surface;
  }
  return g;
}

std::vector<double> barycentric_measures(const Triangulation& t) {
  std::vector<double> m(t.num_nodes(), 0.0);
  const double share = 1.0 / t.vertices_per_cell();
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const double part = std::abs(t.cell_measure(k)) * share;
    for (int v : t.cell(k)) m[v] += part;
  }
  return m;
}

MeshStats compute_mesh_stats(const Triangulation& t) {
  MeshStats s;
  s.dim = t.dim();
  s.kappa_h = std::numeric_limits<double>::infinity();
  double min_diameter = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto g = cell_geometry(t, k);
    s.h = std::max(s.h, g.diameter);
    s.kappa_h = std::min(s.kappa_h, g.min_altitude);
    s.nu = std::max(s.nu, g.diameter / g.inradius);
    min_diameter = std::min(min_diameter, g.diameter);
    s.total_measure += g.measure;
  }
  s.gamma = s.h / min_diameter;
  s.node_measures = barycentric_measures(t);
  s.lumped_measures.reserve(t.num_interior());
  for (int node : t.interior_nodes()) s.lumped_measures.push_back(s.node_measures[node]);
  return s;
}

Triangulation generate_structured_mesh(int n, DiagonalPattern /*pattern*/) {
  if (n < 2) throw InvalidArgument("structured mesh needs n >= 2, got " + std::to_string(n));
  const int np = n + 1;
  std::vector<double> coords;
  std::vector<std::uint8_t> boundary;
  coords.reserve(2 * np * np);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      coords.push_back(static_cast<double>(i) / n);
      coords.push_back(static_cast<double>(j) / n);
      boundary.push_back(i == 0 || j == 0 || i == n || j == n ? 1 : 0);
    }
  }
  std::vector<int> cells;
  cells.reserve(6 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int p00 = i + j * np, p10 = p00 + 1, p01 = p00 + np, p11 = p01 + 1;
      cells.insert(cells.end(), {p00, p10, p11, p00, p11, p01});
    }
  }
  return Triangulation(2, std::move(coords), std::move(cells), std::move(boundary));
}

std::vector<NodePairEntry> full_stiffness_entries(const Triangulation& t) {
  std::map<std::pair<int, int>, double> acc;
  const int nv = t.vertices_per_cell();
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto eg = detail::element_gradients(t, k);
    const auto c = t.cell(k);
    for (int a = 0; a < nv; ++a) {
      for (int b = 0; b < nv; ++b) {
        acc[{c[a], c[b]}] += eg.measure * detail::dot3(eg.grad[a], eg.grad[b]);
      }
    }
  }
  std::vector<NodePairEntry> out;
  out.reserve(acc.size());
  for (const auto& [key, v] : acc) out.push_back({key.first, key.second, v});
  return out;
}

AcutenessReport check_acuteness(const Triangulation& t) {
  AcutenessReport report;
  const auto entries = full_stiffness_entries(t);
  double scale = 0;
  for (const auto& e : entries) scale = std::max(scale, std::abs(e.value));
  report.tolerance = 1e-12 * scale;

  // Edges on the boundary (contained in a boundary face) are excluded.
  std::map<std::pair<int, int>, std::vector<double>> opposite_angles;
  std::map<std::pair<int, int>, bool> boundary_edge;
  for (const auto& [face, incident] : collect_faces(t)) {
    if (incident.size() == 1) {
      for (std::size_t a = 0; a < face.size(); ++a) {
        for (std::size_t b = a + 1; b < face.size(); ++b) boundary_edge[edge_key(face[a], face[b])] = true;
      }
    }
    if (t.dim() == 2) {
      for (const auto& [k, opp] : incident) {
        const auto c = t.cell(k);
        opposite_angles[edge_key(face[0], face[1])].push_back(
            angle_at(t.node(c[opp]), t.node(c[(opp + 1) % 3]), t.node(c[(opp + 2) % 3])));
      }
    }
  }

  for (const auto& e : entries) {
    if (e.i >= e.j) continue;
    const auto key = edge_key(e.i, e.j);
    if (boundary_edge.count(key)) continue;
    double angle_sum = 0;
    if (auto it = opposite_angles.find(key); it != opposite_angles.end()) {
      for (double a : it->second) angle_sum += a;
      if (angle_sum > std::numbers::pi + 1e-10) report.angle_criterion_pass = false;
    }
    if (e.value > report.tolerance) {
      report.pass = false;
      report.violating_pairs.push_back({e.i, e.j, e.value, angle_sum});
    }
  }
  return report;
}

void save_mesh(const Triangulation& t, const std::filesystem::path& path,
               const std::vector<std::string>& comment_lines) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& line : comment_lines) out << "# " << line << '\n';
  out << "dim " << t.dim() << '\n' << "nodes " << t.num_nodes() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < t.num_nodes(); ++i) {
    for (double x : t.node(i)) out << x << ' ';
    out << (t.on_boundary(i) ? 1 : 0) << '\n';
  }
  out << "elements " << t.num_cells() << '\n';
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    for (std::size_t j = 0; j < c.size(); ++j) out << (j ? " " : "") << c[j];
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank, non-comment line split into tokens.
  std::vector<std::string> next(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      return tokens;
    }
    throw ParseError(line_no_ + 1, std::string("unexpected end of file, expected ") + expecting);
  }

  std::size_t line() const { return line_no_; }

  template <class T>
  T number(const std::string& tok) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(line_no_, "malformed number '" + tok + "'");
    }
    return value;
  }

  std::size_t keyword(const std::vector<std::string>& toks, const std::string& key) const {
    if (toks.size() != 2 || toks[0] != key) throw ParseError(line_no_, "expected '" + key + " <count>'");
    return number<std::size_t>(toks[1]);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

Triangulation load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  LineReader reader(in);
  const int dim = static_cast<int>(reader.keyword(reader.next("dim"), "dim"));
  if (dim != 2 && dim != 3) throw ParseError(reader.line(), "dim must be 2 or 3");
  const std::size_t n = reader.keyword(reader.next("nodes"), "nodes");
  std::vector<double> coords;
  std::vector<std::uint8_t> flags;
  coords.reserve(n * dim);
  flags.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto toks = reader.next("node line");
    if (toks.size() != static_cast<std::size_t>(dim + 1)) {
      throw ParseError(reader.line(), "node line needs " + std::to_string(dim) + " coordinates and a flag");
    }
    for (int r = 0; r < dim; ++r) coords.push_back(reader.number<double>(toks[r]));
    const int flag = reader.number<int>(toks[dim]);
    if (flag != 0 && flag != 1) throw ParseError(reader.line(), "boundary flag must be 0 or 1");
    flags.push_back(static_cast<std::uint8_t>(flag));
  }
  const std::size_t m = reader.keyword(reader.next("elements"), "elements");
  std::vector<int> cells;
  cells.reserve(m * (dim + 1));
  for (std::size_t k = 0; k < m; ++k) {
    const auto toks = reader.next("element line");
    if (toks.size() != static_cast<std::size_t>(dim + 1)) {
      throw ParseError(reader.line(), "element line needs " + std::to_string(dim + 1) + " vertex indices");
    }
    for (const auto& tok : toks) cells.push_back(reader.number<int>(tok));
  }
  return Triangulation(dim, std::move(coords), std::move(cells), std::move(flags));
}

}  // namespace dmrfem
