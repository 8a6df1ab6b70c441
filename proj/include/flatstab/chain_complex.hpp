#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "flatstab/errors.hpp"

namespace flatstab {

using Index = std::int32_t;
using Coeff = std::int64_t;

// One face of a cell with its incidence sign (always -1 or +1 when stored).
struct IncidenceEntry {
    Index face;
    std::int8_t sign;
};

// Oriented cell complex over ℝ^m: simplices and/or axis-aligned boxes with
// fixed reference orientations, exact integer incidences, and Euclidean
// volumes. Degree 0 cells are the vertices (volume 1). Immutable after
// finalize(); all accessors require a finalized complex.
class CellComplex {
  public:
    explicit CellComplex(int ambient_dim);

    // Construction phase. add_cell requires every boundary face index to be a
    // valid (degree-1) cell; vertices must be distinct.
    Index add_vertex(std::vector<double> coords);
    Index add_cell(int degree, std::vector<Index> vertices,
                   std::vector<IncidenceEntry> boundary, double volume);

    // Validates volumes > 0, incidence signs in {-1,+1}, and d(d(cell)) = 0 in
    // exact integer arithmetic, then locks the complex.
    void finalize();
    bool finalized() const { return finalized_; }

    int ambient_dim() const { return ambient_dim_; }
    int top_degree() const;
    Index num_cells(int degree) const;
    Index num_vertices() const { return static_cast<Index>(vertex_coords_.size() / ambient_dim_); }

    std::span<const double> vertex(Index v) const;
    std::span<const Index> cell_vertices(int degree, Index i) const;
    std::span<const IncidenceEntry> cell_boundary(int degree, Index i) const;
    double volume(int degree, Index i) const;
    std::span<const double> barycenter(int degree, Index i) const;

    // Cell with exactly this vertex set (order ignored); -1 if absent.
    Index find_cell(int degree, std::vector<Index> vertices) const;

  private:
    struct CellData {
        std::vector<Index> verts;
        std::vector<IncidenceEntry> bnd;
        double vol = 0.0;
        std::vector<double> bary;
    };

    void require_finalized() const;
    void require_degree(int degree) const;

    int ambient_dim_;
    bool finalized_ = false;
    std::vector<double> vertex_coords_;                       // flat, m per vertex
    std::vector<std::vector<CellData>> cells_;                // cells_[k-1] holds degree-k cells
    std::vector<std::map<std::vector<Index>, Index>> by_verts_;  // sorted vertex set -> index
};

// Integer chain of fixed degree on a fixed complex. Coefficient maps never
// store zeros. Value semantics; arithmetic requires matching complex+degree.
class Chain {
  public:
    Chain(const CellComplex& complex, int degree);

    const CellComplex& complex() const { return *complex_; }
    int degree() const { return degree_; }

    Coeff coeff(Index cell) const;
    void set_coeff(Index cell, Coeff c);
    void add_coeff(Index cell, Coeff c);
    const std::map<Index, Coeff>& coeffs() const { return coeffs_; }

    bool is_zero() const { return coeffs_.empty(); }
    std::size_t support_size() const { return coeffs_.size(); }
    std::vector<Index> support() const;

    Chain& operator+=(const Chain& other);
    Chain& operator-=(const Chain& other);
    Chain& operator*=(Coeff c);

    friend Chain operator+(Chain a, const Chain& b) { return a += b; }
    friend Chain operator-(Chain a, const Chain& b) { return a -= b; }
    friend Chain operator*(Coeff c, Chain a) { return a *= c; }
    friend Chain operator-(Chain a) { return a *= -1; }
    friend bool operator==(const Chain& a, const Chain& b);

  private:
    void require_compatible(const Chain& other) const;

    const CellComplex* complex_;
    int degree_;
    std::map<Index, Coeff> coeffs_;
};

// Boundary operator; exact integers. Degree 0 input is an error.
Chain boundary(const Chain& T);

// Σ |coeff| · volume.
double mass(const Chain& T);

// Keeps exactly the coefficients on cells satisfying the predicate.
Chain restrict_where(const Chain& T, const std::function<bool(Index)>& pred);
Chain restrict_where(const Chain& T, std::span<const char> mask);

// Max over support cells of T of the distance from the cell barycenter to the
// nearest support-cell barycenter of Sigma. 0 for T = 0. Sigma must be
// nonzero.
double support_distance(const Chain& T, const Chain& Sigma);

// Unit k-vector of a cell's orientation, as components over the C(m,k) sorted
// axis subsets in lexicographic order. For simplices the stored vertex order
// defines the sign; for box cells the binary-counter vertex order does.
std::vector<double> orientation_kvector(const CellComplex& complex, int degree, Index cell);

// Inner product of two such component vectors (alignment in [-1, 1]).
double kvector_alignment(std::span<const double> a, std::span<const double> b);

}  // namespace flatstab
