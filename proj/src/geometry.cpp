#include "flatstab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "flatstab/errors.hpp"

namespace flatstab {

namespace {

constexpr double kLevelTol = 1e-12;

double vertex_distance(const CellComplex& complex, Index a, Index b) {
    const auto pa = complex.vertex(a);
    const auto pb = complex.vertex(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    return std::sqrt(acc);
}

// Vertex ids of a cell; degree-0 cells are the vertices themselves.
std::vector<Index> cell_vertex_list(const CellComplex& complex, int degree, Index cell) {
    if (degree == 0) return {cell};
    const auto span = complex.cell_vertices(degree, cell);
    return {span.begin(), span.end()};
}

// Sign of the permutation sorting `verts` ascending; assumes distinct ids.
int permutation_sign(std::vector<Index> verts) {
    int sign = 1;
    for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
        for (std::size_t j = i + 1; j < verts.size(); ++j) {
            if (verts[i] > verts[j]) {
                std::swap(verts[i], verts[j]);
                sign = -sign;
            }
        }
    }
    return sign;
}

}  // namespace

LevelFunction::LevelFunction(const CellComplex& complex, std::vector<double> values,
                             double lipschitz)
    : complex_(&complex), values_(std::move(values)), lipschitz_(lipschitz) {
    if (static_cast<Index>(values_.size()) != complex.num_vertices()) {
        throw InvalidArgumentError("LevelFunction: one value per vertex required");
    }
    if (lipschitz_ < 0.0) throw InvalidArgumentError("LevelFunction: negative Lipschitz bound");
    for (double v : values_) {
        if (!(v >= 0.0)) throw InvalidArgumentError("LevelFunction: values must be nonnegative");
    }
    if (complex.top_degree() < 1) return;
    for (Index e = 0; e < complex.num_cells(1); ++e) {
        const auto verts = complex.cell_vertices(1, e);
        const double len = vertex_distance(complex, verts[0], verts[1]);
        const double jump = std::abs(value(verts[0]) - value(verts[1]));
        if (jump > lipschitz_ * len + 1e-12) {
            throw InvalidArgumentError("LevelFunction: declared Lipschitz bound violated on edge " +
                                       std::to_string(e));
        }
    }
}

LevelFunction distance_to(const Chain& sigma) {
    if (sigma.is_zero()) throw InvalidArgumentError("distance_to: empty reference chain");
    const CellComplex& X = sigma.complex();
    std::set<Index> anchors;
    for (const auto& [cell, coeff] : sigma.coeffs()) {
        (void)coeff;
        for (Index v : cell_vertex_list(X, sigma.degree(), cell)) anchors.insert(v);
    }
    std::vector<double> values(static_cast<std::size_t>(X.num_vertices()));
    for (Index v = 0; v < X.num_vertices(); ++v) {
        double best = std::numeric_limits<double>::infinity();
        for (Index a : anchors) best = std::min(best, vertex_distance(X, v, a));
        values[static_cast<std::size_t>(v)] = best;
    }
    double slope = 0.0;
    if (X.top_degree() >= 1) {
        for (Index e = 0; e < X.num_cells(1); ++e) {
            const auto verts = X.cell_vertices(1, e);
            const double len = vertex_distance(X, verts[0], verts[1]);
            if (len <= 0.0) continue;
            slope = std::max(slope, std::abs(values[static_cast<std::size_t>(verts[0])] -
                                             values[static_cast<std::size_t>(verts[1])]) /
                                        len);
        }
    }
    return LevelFunction(X, std::move(values), slope);
}

bool SublevelSet::contains(int degree, Index cell) const {
    const CellComplex& X = level->complex();
    if (degree == 0) return level->value(cell) < threshold;
    for (Index v : X.cell_vertices(degree, cell)) {
        if (!(level->value(v) < threshold)) return false;
    }
    return true;
}

SublevelSet sublevel(const LevelFunction& d, double t) {
    if (t < 0.0) throw InvalidArgumentError("sublevel: negative threshold");
    return SublevelSet{&d, t};
}

Chain restrict_to_sublevel(const Chain& S, const SublevelSet& set) {
    return restrict_where(S, [&](Index cell) { return set.contains(S.degree(), cell); });
}

Chain slice(const Chain& S, const LevelFunction& d, double t) {
    if (&S.complex() != &d.complex()) {
        throw InvalidDomainError("slice: chain and level field live on different complexes");
    }
    if (S.degree() < 1) throw DegreeError("slice: chain degree must be at least 1");
    for (Index v = 0; v < S.complex().num_vertices(); ++v) {
        if (std::abs(d.value(v) - t) <= kLevelTol) {
            throw NonRegularLevelError("slice: level hits the vertex value at vertex " +
                                       std::to_string(v));
        }
    }
    const SublevelSet B = sublevel(d, t);
    const Chain inside = restrict_to_sublevel(S, B);
    const Chain dS = boundary(S);
    Chain out = boundary(inside) -
                restrict_where(dS, [&](Index f) { return B.contains(S.degree() - 1, f); });
    for (const auto& [f, coeff] : out.coeffs()) {
        (void)coeff;
        if (!B.contains(S.degree() - 1, f)) {
            throw Error("slice: support escaped the sublevel set");
        }
    }
    return out;
}

SliceSelection select_slice(const Chain& S, const LevelFunction& d, double a, double b) {
    if (!(a < b)) throw InvalidArgumentError("select_slice: window must satisfy a < b");
    std::vector<double> cuts{a};
    for (Index v = 0; v < S.complex().num_vertices(); ++v) {
        const double val = d.value(v);
        if (val > a && val < b) cuts.push_back(val);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());

    bool found = false;
    SliceSelection best{0.0, Chain(S.complex(), S.degree() - 1), 0.0};
    double best_mass = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        const double t = 0.5 * (cuts[i] + cuts[i + 1]);
        try {
            Chain cut = slice(S, d, t);
            const double m = mass(cut);
            if (!found || m < best_mass) {
                found = true;
                best_mass = m;
                best.level = t;
                best.slice = std::move(cut);
            }
        } catch (const NonRegularLevelError&) {
            continue;  // degenerate midpoint, skip the candidate
        }
    }
    if (!found) throw EmptyWindowError("select_slice: no regular level in the window");

    double band_mass = 0.0;
    const CellComplex& X = S.complex();
    for (const auto& [cell, coeff] : S.coeffs()) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Index v : X.cell_vertices(S.degree(), cell)) {
            lo = std::min(lo, d.value(v));
            hi = std::max(hi, d.value(v));
        }
        if (lo < b && hi > a) {
            band_mass += static_cast<double>(std::abs(coeff)) * X.volume(S.degree(), cell);
        }
    }
    if (band_mass > 0.0) {
        best.ratio = best_mass * (b - a) / band_mass;
    } else {
        best.ratio = best_mass > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return best;
}

Chain cone(const Chain& X, Index apex) {
    const CellComplex& C = X.complex();
    if (apex < 0 || apex >= C.num_vertices()) throw InvalidArgumentError("cone: apex out of range");
    const int n = X.degree();
    if (n >= 1) {
        if (!boundary(X).is_zero()) throw NotACycleError("cone: chain has nonzero boundary");
    } else {
        Coeff total = 0;
        for (const auto& [cell, coeff] : X.coeffs()) {
            (void)cell;
            total += coeff;
        }
        if (total != 0) throw NotACycleError("cone: zero-degree chain with nonzero total");
    }
    if (n + 1 > C.top_degree()) {
        throw NotConeCompleteError("cone: complex has no cells of the joined degree");
    }

    Chain out(C, n + 1);
    for (const auto& [cell, coeff] : X.coeffs()) {
        std::vector<Index> verts = cell_vertex_list(C, n, cell);
        if (std::find(verts.begin(), verts.end(), apex) != verts.end()) continue;

        std::vector<Index> joined = verts;
        joined.push_back(apex);
        const Index j = C.find_cell(n + 1, joined);
        if (j < 0) {
            throw NotConeCompleteError("cone: missing joined simplex over support cell " +
                                       std::to_string(cell));
        }
        std::vector<Index> apex_first{apex};
        apex_first.insert(apex_first.end(), verts.begin(), verts.end());
        const auto stored = C.cell_vertices(n + 1, j);
        const int sign = permutation_sign(apex_first) *
                         permutation_sign(std::vector<Index>(stored.begin(), stored.end()));
        out.add_coeff(j, coeff * sign);
    }

    if (!(boundary(out) == X)) {
        throw NotConeCompleteError("cone: joined chain fails the boundary identity");
    }
    return out;
}

double cone_mass_bound(const Chain& X, Index apex) {
    const CellComplex& C = X.complex();
    if (apex < 0 || apex >= C.num_vertices()) {
        throw InvalidArgumentError("cone_mass_bound: apex out of range");
    }
    double r = 0.0;
    for (const auto& [cell, coeff] : X.coeffs()) {
        (void)coeff;
        for (Index v : cell_vertex_list(C, X.degree(), cell)) {
            r = std::max(r, vertex_distance(C, apex, v));
        }
    }
    return r / static_cast<double>(X.degree() + 1) * mass(X);
}

}  // namespace flatstab
