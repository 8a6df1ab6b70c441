#include "flatstab/chain_complex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace flatstab {

namespace {

std::string cell_label(int degree, Index i) {
    return "degree " + std::to_string(degree) + " cell " + std::to_string(i);
}

}  // namespace

CellComplex::CellComplex(int ambient_dim) : ambient_dim_(ambient_dim) {
    if (ambient_dim < 1) throw InvalidDomainError("ambient dimension must be >= 1");
}

Index CellComplex::add_vertex(std::vector<double> coords) {
    if (finalized_) throw InvalidDomainError("complex is finalized");
    if (static_cast<int>(coords.size()) != ambient_dim_)
        throw InvalidDomainError("vertex coordinate size does not match ambient dimension");
    vertex_coords_.insert(vertex_coords_.end(), coords.begin(), coords.end());
    return num_vertices() - 1;
}

Index CellComplex::add_cell(int degree, std::vector<Index> vertices,
                            std::vector<IncidenceEntry> boundary, double volume) {
    if (finalized_) throw InvalidDomainError("complex is finalized");
    if (degree < 1) throw DegreeError("cells must have degree >= 1");
    if (!(volume > 0.0)) throw InvalidDomainError("cell volume must be positive");

    std::vector<Index> key = vertices;
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end())
        throw InvalidDomainError("cell vertices must be distinct");
    for (Index v : key)
        if (v < 0 || v >= num_vertices()) throw InvalidDomainError("cell vertex index out of range");

    const Index faces = degree == 1 ? num_vertices() : num_cells(degree - 1);
    for (const IncidenceEntry& e : boundary) {
        if (e.face < 0 || e.face >= faces)
            throw InvalidDomainError("boundary face index out of range");
        if (e.sign != 1 && e.sign != -1)
            throw InvalidDomainError("incidence signs must be -1 or +1");
    }

    if (static_cast<int>(cells_.size()) < degree) cells_.resize(degree);
    if (static_cast<int>(by_verts_.size()) < degree) by_verts_.resize(degree);
    auto [it, inserted] = by_verts_[degree - 1].emplace(key, static_cast<Index>(cells_[degree - 1].size()));
    if (!inserted) throw InvalidDomainError("duplicate cell (same vertex set)");

    CellData cell;
    cell.bary.assign(ambient_dim_, 0.0);
    for (Index v : vertices) {
        auto p = vertex(v);
        for (int a = 0; a < ambient_dim_; ++a) cell.bary[a] += p[a];
    }
    for (double& x : cell.bary) x /= static_cast<double>(vertices.size());
    cell.verts = std::move(vertices);
    cell.bnd = std::move(boundary);
    cell.vol = volume;
    cells_[degree - 1].push_back(std::move(cell));
    return it->second;
}

void CellComplex::finalize() {
    if (finalized_) return;
    // d(d(cell)) = 0, exact integers.
    for (int k = 2; k <= static_cast<int>(cells_.size()); ++k) {
        for (Index i = 0; i < num_cells(k); ++i) {
            std::map<Index, Coeff> acc;
            for (const IncidenceEntry& e : cells_[k - 1][i].bnd)
                for (const IncidenceEntry& f : cells_[k - 2][e.face].bnd)
                    acc[f.face] += static_cast<Coeff>(e.sign) * f.sign;
            for (const auto& [face, c] : acc)
                if (c != 0)
                    throw InvalidDomainError("boundary of boundary nonzero at " + cell_label(k, i));
        }
    }
    finalized_ = true;
}

int CellComplex::top_degree() const {
    for (int k = static_cast<int>(cells_.size()); k >= 1; --k)
        if (!cells_[k - 1].empty()) return k;
    return 0;
}

Index CellComplex::num_cells(int degree) const {
    if (degree < 0) return 0;
    if (degree == 0) return num_vertices();
    if (degree > static_cast<int>(cells_.size())) return 0;
    return static_cast<Index>(cells_[degree - 1].size());
}

std::span<const double> CellComplex::vertex(Index v) const {
    if (v < 0 || v >= num_vertices()) throw InvalidDomainError("vertex index out of range");
    return {vertex_coords_.data() + static_cast<std::size_t>(v) * ambient_dim_,
            static_cast<std::size_t>(ambient_dim_)};
}

void CellComplex::require_degree(int degree) const {
    if (degree < 1 || degree > static_cast<int>(cells_.size()))
        throw DegreeError("no cells of degree " + std::to_string(degree));
}

std::span<const Index> CellComplex::cell_vertices(int degree, Index i) const {
    require_degree(degree);
    if (i < 0 || i >= num_cells(degree)) throw InvalidDomainError("cell index out of range");
    return cells_[degree - 1][i].verts;
}

std::span<const IncidenceEntry> CellComplex::cell_boundary(int degree, Index i) const {
    require_degree(degree);
    if (i < 0 || i >= num_cells(degree)) throw InvalidDomainError("cell index out of range");
    return cells_[degree - 1][i].bnd;
}

double CellComplex::volume(int degree, Index i) const {
    if (degree == 0) {
        if (i < 0 || i >= num_vertices()) throw InvalidDomainError("vertex index out of range");
        return 1.0;
    }
    require_degree(degree);
    if (i < 0 || i >= num_cells(degree)) throw InvalidDomainError("cell index out of range");
    return cells_[degree - 1][i].vol;
}

std::span<const double> CellComplex::barycenter(int degree, Index i) const {
    if (degree == 0) return vertex(i);
    require_degree(degree);
    if (i < 0 || i >= num_cells(degree)) throw InvalidDomainError("cell index out of range");
    return cells_[degree - 1][i].bary;
}

Index CellComplex::find_cell(int degree, std::vector<Index> vertices) const {
    if (degree < 1 || degree > static_cast<int>(by_verts_.size())) return -1;
    std::sort(vertices.begin(), vertices.end());
    auto it = by_verts_[degree - 1].find(vertices);
    return it == by_verts_[degree - 1].end() ? -1 : it->second;
}

Chain::Chain(const CellComplex& complex, int degree) : complex_(&complex), degree_(degree) {
    if (degree < 0) throw DegreeError("chain degree must be >= 0");
    if (degree > complex.top_degree())
        throw DegreeError("chain degree exceeds the top degree of the complex");
}

Coeff Chain::coeff(Index cell) const {
    auto it = coeffs_.find(cell);
    return it == coeffs_.end() ? 0 : it->second;
}

void Chain::set_coeff(Index cell, Coeff c) {
    if (cell < 0 || cell >= complex_->num_cells(degree_))
        throw InvalidDomainError("chain cell index out of range");
    if (c == 0)
        coeffs_.erase(cell);
    else
        coeffs_[cell] = c;
}

void Chain::add_coeff(Index cell, Coeff c) { set_coeff(cell, coeff(cell) + c); }

std::vector<Index> Chain::support() const {
    std::vector<Index> out;
    out.reserve(coeffs_.size());
    for (const auto& [i, c] : coeffs_) out.push_back(i);
    return out;
}

void Chain::require_compatible(const Chain& other) const {
    if (complex_ != other.complex_) throw InvalidDomainError("chains live on different complexes");
    if (degree_ != other.degree_) throw DegreeError("chain degrees differ");
}

Chain& Chain::operator+=(const Chain& other) {
    require_compatible(other);
    for (const auto& [i, c] : other.coeffs_) add_coeff(i, c);
    return *this;
}

Chain& Chain::operator-=(const Chain& other) {
    require_compatible(other);
    for (const auto& [i, c] : other.coeffs_) add_coeff(i, -c);
    return *this;
}

Chain& Chain::operator*=(Coeff c) {
    if (c == 0) {
        coeffs_.clear();
    } else {
        for (auto& [i, v] : coeffs_) v *= c;
    }
    return *this;
}

bool operator==(const Chain& a, const Chain& b) {
    return a.complex_ == b.complex_ && a.degree_ == b.degree_ && a.coeffs_ == b.coeffs_;
}

Chain boundary(const Chain& T) {
    if (T.degree() == 0) throw DegreeError("boundary of a degree 0 chain is undefined");
    Chain out(T.complex(), T.degree() - 1);
    for (const auto& [i, c] : T.coeffs())
        for (const IncidenceEntry& e : T.complex().cell_boundary(T.degree(), i))
            out.add_coeff(e.face, c * e.sign);
    return out;
}

double mass(const Chain& T) {
    double m = 0.0;
    for (const auto& [i, c] : T.coeffs())
        m += static_cast<double>(std::abs(c)) * T.complex().volume(T.degree(), i);
    return m;
}

Chain restrict_where(const Chain& T, const std::function<bool(Index)>& pred) {
    Chain out(T.complex(), T.degree());
    for (const auto& [i, c] : T.coeffs())
        if (pred(i)) out.set_coeff(i, c);
    return out;
}

Chain restrict_where(const Chain& T, std::span<const char> mask) {
    if (mask.size() != static_cast<std::size_t>(T.complex().num_cells(T.degree())))
        throw InvalidArgumentError("restriction mask size does not match cell count");
    return restrict_where(T, [&](Index i) { return mask[static_cast<std::size_t>(i)] != 0; });
}

double support_distance(const Chain& T, const Chain& Sigma) {
    if (&T.complex() != &Sigma.complex())
        throw InvalidDomainError("chains live on different complexes");
    if (Sigma.is_zero()) throw InvalidArgumentError("support_distance requires a nonzero reference chain");
    if (T.is_zero()) return 0.0;

    const int m = T.complex().ambient_dim();
    double worst = 0.0;
    for (const auto& [i, ci] : T.coeffs()) {
        auto p = T.complex().barycenter(T.degree(), i);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [j, cj] : Sigma.coeffs()) {
            auto q = Sigma.complex().barycenter(Sigma.degree(), j);
            double d2 = 0.0;
            for (int a = 0; a < m; ++a) d2 += (p[a] - q[a]) * (p[a] - q[a]);
            best = std::min(best, d2);
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

namespace {

// Sorted k-subsets of {0..m-1} in lexicographic order.
std::vector<std::vector<int>> axis_subsets(int m, int k) {
    std::vector<std::vector<int>> out;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        if (std::popcount(mask) != k) continue;
        std::vector<int> axes;
        for (int a = 0; a < m; ++a)
            if (mask & (1u << a)) axes.push_back(a);
        out.push_back(std::move(axes));
    }
    return out;
}

double minor_det(const std::vector<std::vector<double>>& rows, const std::vector<int>& axes) {
    const int k = static_cast<int>(axes.size());
    if (k == 1) return rows[0][axes[0]];
    if (k == 2)
        return rows[0][axes[0]] * rows[1][axes[1]] - rows[0][axes[1]] * rows[1][axes[0]];
    const double a = rows[0][axes[0]], b = rows[0][axes[1]], c = rows[0][axes[2]];
    const double d = rows[1][axes[0]], e = rows[1][axes[1]], f = rows[1][axes[2]];
    const double g = rows[2][axes[0]], h = rows[2][axes[1]], i = rows[2][axes[2]];
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

}  // namespace

std::vector<double> orientation_kvector(const CellComplex& complex, int degree, Index cell) {
    if (degree < 1 || degree > 3) throw DegreeError("orientation k-vector supports degrees 1..3");
    auto verts = complex.cell_vertices(degree, cell);
    const int m = complex.ambient_dim();
    const std::size_t k = static_cast<std::size_t>(degree);

    std::vector<std::size_t> spanning;  // vertex positions whose offsets from verts[0] span the cell
    if (verts.size() == k + 1) {
        for (std::size_t j = 1; j <= k; ++j) spanning.push_back(j);
    } else if (verts.size() == (std::size_t{1} << k)) {
        for (std::size_t j = 0; j < k; ++j) spanning.push_back(std::size_t{1} << j);
    } else {
        throw InvalidDomainError("cell is neither a simplex nor a binary-ordered box");
    }

    std::vector<std::vector<double>> rows;
    auto v0 = complex.vertex(verts[0]);
    for (std::size_t j : spanning) {
        auto vj = complex.vertex(verts[j]);
        std::vector<double> row(m);
        for (int a = 0; a < m; ++a) row[a] = vj[a] - v0[a];
        rows.push_back(std::move(row));
    }

    std::vector<double> comps;
    for (const auto& axes : axis_subsets(m, degree)) comps.push_back(minor_det(rows, axes));
    double norm2 = 0.0;
    for (double x : comps) norm2 += x * x;
    if (!(norm2 > 0.0)) throw InvalidDomainError("degenerate cell orientation");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : comps) x *= inv;
    return comps;
}

double kvector_alignment(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgumentError("k-vector component counts differ");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

}  // namespace flatstab
