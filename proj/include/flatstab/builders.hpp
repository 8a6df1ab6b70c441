#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flatstab/chain_complex.hpp"

namespace flatstab {

// Axis-aligned grid complex with per-axis spacing. Box cells are enumerated
// per degree by axis mask (ascending) then base corner in row-major order
// (last axis fastest). Triangulated grids lose the mask/base lookup.
struct GridComplex {
    CellComplex complex;
    std::vector<int> extent;      // cells per axis
    std::vector<double> spacing;  // mesh step per axis
    std::vector<double> origin;
    bool triangulated = false;

    int num_axes() const { return static_cast<int>(extent.size()); }
    double cell_diameter() const;

    Index vertex_at(std::span<const int> coord) const;
    // -1 when the base corner is out of range. Box grids only.
    Index cell_at(int degree, unsigned axes_mask, std::span<const int> base) const;
    struct CellRef {
        unsigned axes_mask = 0;
        std::vector<int> base;
    };
    CellRef cell_ref(int degree, Index cell) const;
};

// Cubical grid (triangulate=false) or its Freudenthal triangulation. Supports
// 2 or 3 axes; spacing/origin default to 1/0 per axis.
GridComplex build_grid_complex(const std::vector<int>& extent, bool triangulate = false,
                               std::vector<double> spacing = {}, std::vector<double> origin = {});

// Downward closure of the given top simplices. Top cells keep their given
// vertex order (orientation); faces are stored with sorted vertices.
CellComplex make_simplicial_complex(const std::vector<std::vector<double>>& points,
                                    const std::vector<std::vector<Index>>& top_simplices);

// Apex at the origin joined to a regular ring of k vertices at the given
// radius; vertex 0 is the apex, triangle i spans (apex, ring i, ring i+1).
CellComplex build_fan_complex(int ring_size, double radius);

// Copy with the listed top-degree cells removed; all other cell indices are
// preserved.
CellComplex remove_top_cells(const CellComplex& complex, std::vector<Index> remove);

// 1-chain tracing consecutive grid vertices; steps must follow single grid
// edges. Box grids only.
Chain chain_from_vertex_path(const GridComplex& grid,
                             const std::vector<std::vector<int>>& vertices);

// Boundary of a single cell as a chain with unit coefficient.
Chain cell_boundary_chain(const CellComplex& complex, int degree, Index cell);

Chain chain_from_entries(const CellComplex& complex, int degree,
                         const std::vector<std::pair<Index, Coeff>>& entries);

}  // namespace flatstab
