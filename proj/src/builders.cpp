#include "flatstab/builders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace flatstab {

namespace {

int popcount(unsigned mask) { return std::popcount(mask); }

std::vector<int> mask_axes(unsigned mask, int m) {
    std::vector<int> axes;
    for (int a = 0; a < m; ++a)
        if (mask & (1u << a)) axes.push_back(a);
    return axes;
}

// Cell counts per axis for a mask: spanned axes contribute extent, the rest
// extent+1 corner positions.
std::vector<int> mask_dims(const std::vector<int>& extent, unsigned mask) {
    std::vector<int> dims(extent.size());
    for (std::size_t a = 0; a < extent.size(); ++a)
        dims[a] = extent[a] + ((mask & (1u << a)) ? 0 : 1);
    return dims;
}

long long dim_product(const std::vector<int>& dims) {
    long long p = 1;
    for (int d : dims) p *= d;
    return p;
}

// Row-major linear index, last axis fastest; -1 when out of range.
long long linear_index(const std::vector<int>& dims, std::span<const int> coord) {
    long long idx = 0;
    for (std::size_t a = 0; a < dims.size(); ++a) {
        if (coord[a] < 0 || coord[a] >= dims[a]) return -1;
        idx = idx * dims[a] + coord[a];
    }
    return idx;
}

std::vector<int> unlinear_index(const std::vector<int>& dims, long long idx) {
    std::vector<int> coord(dims.size());
    for (std::size_t a = dims.size(); a-- > 0;) {
        coord[a] = static_cast<int>(idx % dims[a]);
        idx /= dims[a];
    }
    return coord;
}

int sort_parity(std::vector<Index> v) {
    int parity = 1;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (v[i] > v[j]) parity = -parity;
    return parity;
}

double simplex_volume(const std::vector<std::vector<double>>& points,
                      std::span<const Index> verts) {
    const std::size_t k = verts.size() - 1;
    // Gram determinant of the edge vectors, k <= 3.
    std::vector<std::vector<double>> e(k);
    const auto& v0 = points[static_cast<std::size_t>(verts[0])];
    for (std::size_t i = 0; i < k; ++i) {
        const auto& vi = points[static_cast<std::size_t>(verts[i + 1])];
        e[i].resize(v0.size());
        for (std::size_t a = 0; a < v0.size(); ++a) e[i][a] = vi[a] - v0[a];
    }
    std::vector<std::vector<double>> g(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            g[i][j] = std::inner_product(e[i].begin(), e[i].end(), e[j].begin(), 0.0);
    double det = 0.0;
    if (k == 1) {
        det = g[0][0];
    } else if (k == 2) {
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    } else {
        det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
              g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
              g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    }
    if (!(det > 0.0)) return 0.0;
    double factorial = 1.0;
    for (std::size_t i = 2; i <= k; ++i) factorial *= static_cast<double>(i);
    return std::sqrt(det) / factorial;
}

CellComplex build_simplicial(const std::vector<std::vector<double>>& points,
                             const std::vector<std::vector<Index>>& top_simplices) {
    if (points.empty()) throw InvalidDomainError("simplicial complex needs at least one point");
    const int m = static_cast<int>(points[0].size());
    for (const auto& p : points)
        if (static_cast<int>(p.size()) != m)
            throw InvalidDomainError("inconsistent point dimensions");
    if (top_simplices.empty()) throw InvalidDomainError("no top simplices given");
    const int n = static_cast<int>(top_simplices[0].size()) - 1;
    if (n < 1 || n > m) throw InvalidDomainError("top simplex degree out of range");

    for (const auto& s : top_simplices) {
        if (static_cast<int>(s.size()) != n + 1)
            throw InvalidDomainError("top simplices must have uniform degree");
        for (Index v : s)
            if (v < 0 || v >= static_cast<Index>(points.size()))
                throw InvalidDomainError("top simplex vertex out of range");
    }

    // Downward closure; faces stored sorted, tops keep their given order.
    std::vector<std::vector<std::vector<Index>>> level(static_cast<std::size_t>(n) + 1);
    std::vector<std::map<std::vector<Index>, Index>> lookup(static_cast<std::size_t>(n) + 1);
    for (const auto& s : top_simplices) {
        std::vector<Index> key = s;
        std::sort(key.begin(), key.end());
        if (std::adjacent_find(key.begin(), key.end()) != key.end())
            throw InvalidDomainError("top simplex has repeated vertices");
        if (!lookup[n].emplace(key, static_cast<Index>(level[n].size())).second)
            throw InvalidDomainError("duplicate top simplex");
        level[n].push_back(s);
    }
    for (int k = n; k >= 2; --k) {
        for (const auto& cell : level[k]) {
            for (std::size_t drop = 0; drop < cell.size(); ++drop) {
                std::vector<Index> face;
                for (std::size_t j = 0; j < cell.size(); ++j)
                    if (j != drop) face.push_back(cell[j]);
                std::sort(face.begin(), face.end());
                if (lookup[k - 1].emplace(face, static_cast<Index>(level[k - 1].size())).second)
                    level[k - 1].push_back(face);
            }
        }
    }

    CellComplex complex(m);
    for (const auto& p : points) complex.add_vertex(p);
    for (int k = 1; k <= n; ++k) {
        for (const auto& cell : level[k]) {
            std::vector<IncidenceEntry> bnd;
            for (std::size_t drop = 0; drop < cell.size(); ++drop) {
                std::vector<Index> face;
                for (std::size_t j = 0; j < cell.size(); ++j)
                    if (j != drop) face.push_back(cell[j]);
                int sign = (drop % 2 == 0 ? 1 : -1) * sort_parity(face);
                Index fi;
                if (k == 1) {
                    fi = face[0];
                } else {
                    std::vector<Index> key = face;
                    std::sort(key.begin(), key.end());
                    fi = lookup[k - 1].at(key);
                }
                bnd.push_back({fi, static_cast<std::int8_t>(sign)});
            }
            const double vol = simplex_volume(points, cell);
            if (!(vol > 0.0)) throw InvalidDomainError("degenerate simplex");
            complex.add_cell(k, cell, std::move(bnd), vol);
        }
    }
    complex.finalize();
    return complex;
}

}  // namespace

double GridComplex::cell_diameter() const {
    double d2 = 0.0;
    for (double s : spacing) d2 += s * s;
    return std::sqrt(d2);
}

Index GridComplex::vertex_at(std::span<const int> coord) const {
    if (coord.size() != extent.size())
        throw InvalidArgumentError("vertex coordinate arity does not match the grid");
    const auto dims = mask_dims(extent, 0u);
    const long long idx = linear_index(dims, coord);
    if (idx < 0) throw InvalidArgumentError("vertex coordinate out of range");
    return static_cast<Index>(idx);
}

Index GridComplex::cell_at(int degree, unsigned axes_mask, std::span<const int> base) const {
    if (triangulated) throw InvalidArgumentError("cell_at is undefined on triangulated grids");
    const int m = num_axes();
    if (degree < 1 || degree > m || popcount(axes_mask) != degree || axes_mask >= (1u << m))
        throw InvalidArgumentError("axis mask does not match the degree");
    if (base.size() != extent.size())
        throw InvalidArgumentError("cell base arity does not match the grid");

    long long offset = 0;
    for (unsigned mask = 0; mask < axes_mask; ++mask)
        if (popcount(mask) == degree) offset += dim_product(mask_dims(extent, mask));
    const long long idx = linear_index(mask_dims(extent, axes_mask), base);
    if (idx < 0) return -1;
    return static_cast<Index>(offset + idx);
}

GridComplex::CellRef GridComplex::cell_ref(int degree, Index cell) const {
    if (triangulated) throw InvalidArgumentError("cell_ref is undefined on triangulated grids");
    const int m = num_axes();
    if (degree < 1 || degree > m) throw InvalidArgumentError("degree out of range");
    long long idx = cell;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        if (popcount(mask) != degree) continue;
        const auto dims = mask_dims(extent, mask);
        const long long count = dim_product(dims);
        if (idx < count) return {mask, unlinear_index(dims, idx)};
        idx -= count;
    }
    throw InvalidArgumentError("cell index out of range");
}

GridComplex build_grid_complex(const std::vector<int>& extent, bool triangulate,
                               std::vector<double> spacing, std::vector<double> origin) {
    const int m = static_cast<int>(extent.size());
    if (m < 2 || m > 3) throw InvalidDomainError("grids support 2 or 3 axes");
    for (int e : extent)
        if (e < 1) throw InvalidDomainError("grid extent has a zero-length axis");
    if (spacing.empty()) spacing.assign(static_cast<std::size_t>(m), 1.0);
    if (origin.empty()) origin.assign(static_cast<std::size_t>(m), 0.0);
    if (static_cast<int>(spacing.size()) != m || static_cast<int>(origin.size()) != m)
        throw InvalidDomainError("spacing/origin arity does not match the extent");
    for (double s : spacing)
        if (!(s > 0.0)) throw InvalidDomainError("grid spacing must be positive");

    const auto vdims = mask_dims(extent, 0u);
    const long long nverts = dim_product(vdims);
    std::vector<std::vector<double>> points;
    points.reserve(static_cast<std::size_t>(nverts));
    for (long long v = 0; v < nverts; ++v) {
        const auto coord = unlinear_index(vdims, v);
        std::vector<double> p(static_cast<std::size_t>(m));
        for (int a = 0; a < m; ++a) p[a] = origin[a] + coord[a] * spacing[a];
        points.push_back(std::move(p));
    }

    GridComplex grid{CellComplex(m), extent, spacing, origin, triangulate};

    if (triangulate) {
        // Freudenthal: one simplex per axis permutation per cube; shared cube
        // faces induce identical face sets, so the closure glues them.
        std::vector<int> axes(static_cast<std::size_t>(m));
        std::iota(axes.begin(), axes.end(), 0);
        std::vector<std::vector<int>> perms;
        {
            std::vector<int> p = axes;
            do {
                perms.push_back(p);
            } while (std::next_permutation(p.begin(), p.end()));
        }
        std::vector<std::vector<Index>> tops;
        const auto cdims = mask_dims(extent, (1u << m) - 1);
        const long long ncubes = dim_product(cdims);
        for (long long c = 0; c < ncubes; ++c) {
            const auto base = unlinear_index(cdims, c);
            for (const auto& perm : perms) {
                std::vector<Index> simplex;
                std::vector<int> coord = base;
                simplex.push_back(static_cast<Index>(linear_index(vdims, coord)));
                for (int step = 0; step < m; ++step) {
                    coord[perm[static_cast<std::size_t>(step)]] += 1;
                    simplex.push_back(static_cast<Index>(linear_index(vdims, coord)));
                }
                tops.push_back(std::move(simplex));
            }
        }
        grid.complex = build_simplicial(points, tops);
        return grid;
    }

    CellComplex complex(m);
    for (const auto& p : points) complex.add_vertex(p);
    for (int k = 1; k <= m; ++k) {
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            if (popcount(mask) != k) continue;
            const auto axes_list = mask_axes(mask, m);
            const auto dims = mask_dims(extent, mask);
            const long long count = dim_product(dims);
            double vol = 1.0;
            for (int a : axes_list) vol *= spacing[static_cast<std::size_t>(a)];
            for (long long idx = 0; idx < count; ++idx) {
                const auto base = unlinear_index(dims, idx);

                // Binary-counter corners: bit j of c displaces along axes_list[j].
                std::vector<Index> verts;
                for (unsigned c = 0; c < (1u << k); ++c) {
                    std::vector<int> coord = base;
                    for (int j = 0; j < k; ++j)
                        if (c & (1u << j)) coord[axes_list[static_cast<std::size_t>(j)]] += 1;
                    verts.push_back(static_cast<Index>(linear_index(vdims, coord)));
                }

                // d(box) = Σ_i (-1)^i (top_i - bottom_i) over the spanned axes.
                std::vector<IncidenceEntry> bnd;
                for (int i = 0; i < k; ++i) {
                    const int axis = axes_list[static_cast<std::size_t>(i)];
                    const unsigned face_mask = mask & ~(1u << axis);
                    const int s = (i % 2 == 0) ? 1 : -1;
                    const auto fdims = mask_dims(extent, face_mask);
                    long long face_offset = 0;
                    for (unsigned fm = 0; fm < face_mask; ++fm)
                        if (popcount(fm) == k - 1) face_offset += dim_product(mask_dims(extent, fm));
                    std::vector<int> top = base;
                    top[static_cast<std::size_t>(axis)] += 1;
                    const long long bottom_idx =
                        (k == 1) ? linear_index(vdims, base) : face_offset + linear_index(fdims, base);
                    const long long top_idx =
                        (k == 1) ? linear_index(vdims, top) : face_offset + linear_index(fdims, top);
                    bnd.push_back({static_cast<Index>(top_idx), static_cast<std::int8_t>(s)});
                    bnd.push_back({static_cast<Index>(bottom_idx), static_cast<std::int8_t>(-s)});
                }
                complex.add_cell(k, std::move(verts), std::move(bnd), vol);
            }
        }
    }
    complex.finalize();
    grid.complex = std::move(complex);
    return grid;
}

CellComplex make_simplicial_complex(const std::vector<std::vector<double>>& points,
                                    const std::vector<std::vector<Index>>& top_simplices) {
    return build_simplicial(points, top_simplices);
}

CellComplex build_fan_complex(int ring_size, double radius) {
    if (ring_size < 3) throw InvalidDomainError("fan ring needs at least 3 vertices");
    if (!(radius > 0.0)) throw InvalidDomainError("fan radius must be positive");
    std::vector<std::vector<double>> points;
    points.push_back({0.0, 0.0});
    for (int i = 0; i < ring_size; ++i) {
        const double t = 2.0 * M_PI * i / ring_size;
        points.push_back({radius * std::cos(t), radius * std::sin(t)});
    }
    std::vector<std::vector<Index>> tops;
    for (int i = 0; i < ring_size; ++i)
        tops.push_back({0, static_cast<Index>(1 + i), static_cast<Index>(1 + (i + 1) % ring_size)});
    return build_simplicial(points, tops);
}

CellComplex remove_top_cells(const CellComplex& complex, std::vector<Index> remove) {
    const int n = complex.top_degree();
    if (n < 1) throw InvalidDomainError("complex has no positive-degree cells");
    std::sort(remove.begin(), remove.end());
    remove.erase(std::unique(remove.begin(), remove.end()), remove.end());
    for (Index i : remove)
        if (i < 0 || i >= complex.num_cells(n))
            throw InvalidArgumentError("top cell index out of range");

    CellComplex out(complex.ambient_dim());
    for (Index v = 0; v < complex.num_vertices(); ++v) {
        auto p = complex.vertex(v);
        out.add_vertex(std::vector<double>(p.begin(), p.end()));
    }
    for (int k = 1; k <= n; ++k) {
        for (Index i = 0; i < complex.num_cells(k); ++i) {
            if (k == n && std::binary_search(remove.begin(), remove.end(), i)) continue;
            auto verts = complex.cell_vertices(k, i);
            auto bnd = complex.cell_boundary(k, i);
            out.add_cell(k, std::vector<Index>(verts.begin(), verts.end()),
                         std::vector<IncidenceEntry>(bnd.begin(), bnd.end()),
                         complex.volume(k, i));
        }
    }
    out.finalize();
    return out;
}

Chain chain_from_vertex_path(const GridComplex& grid,
                             const std::vector<std::vector<int>>& vertices) {
    if (vertices.size() < 2) throw InvalidArgumentError("vertex path needs at least two vertices");
    Chain out(grid.complex, 1);
    for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
        const auto& a = vertices[s];
        const auto& b = vertices[s + 1];
        if (a.size() != vertices[0].size() || b.size() != a.size() ||
            static_cast<int>(a.size()) != grid.num_axes())
            throw InvalidArgumentError("vertex path coordinate arity mismatch");
        int axis = -1, step = 0;
        for (std::size_t d = 0; d < a.size(); ++d) {
            if (a[d] == b[d]) continue;
            if (axis >= 0 || std::abs(a[d] - b[d]) != 1)
                throw InvalidArgumentError("vertex path steps must follow single grid edges");
            axis = static_cast<int>(d);
            step = b[d] - a[d];
        }
        if (axis < 0) throw InvalidArgumentError("vertex path repeats a vertex consecutively");
        std::vector<int> base = step > 0 ? a : b;
        const Index e = grid.cell_at(1, 1u << axis, base);
        if (e < 0) throw InvalidArgumentError("vertex path leaves the grid");
        out.add_coeff(e, step > 0 ? 1 : -1);
    }
    return out;
}

Chain cell_boundary_chain(const CellComplex& complex, int degree, Index cell) {
    Chain unit(complex, degree);
    unit.set_coeff(cell, 1);
    return boundary(unit);
}

Chain chain_from_entries(const CellComplex& complex, int degree,
                         const std::vector<std::pair<Index, Coeff>>& entries) {
    Chain out(complex, degree);
    for (const auto& [i, c] : entries) out.add_coeff(i, c);
    return out;
}

}  // namespace flatstab
