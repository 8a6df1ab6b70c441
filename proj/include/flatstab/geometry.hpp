#pragma once

#include <vector>

#include "flatstab/chain_complex.hpp"

namespace flatstab {

// Per-vertex scalar field with a certified edge-Lipschitz constant:
// |d(v) - d(w)| <= L * length(vw) over every edge, checked at construction.
class LevelFunction {
  public:
    LevelFunction(const CellComplex& complex, std::vector<double> values, double lipschitz);

    const CellComplex& complex() const { return *complex_; }
    double value(Index vertex) const { return values_[static_cast<std::size_t>(vertex)]; }
    const std::vector<double>& values() const { return values_; }
    double lipschitz() const { return lipschitz_; }

  private:
    const CellComplex* complex_;
    std::vector<double> values_;
    double lipschitz_;
};

// Distance to the nearest support vertex of sigma, with the computed maximum
// edge slope as the Lipschitz constant (1 on grids, up to rounding).
LevelFunction distance_to(const Chain& sigma);

// Open tubular neighborhood membership: a cell belongs iff every one of its
// vertices lies strictly below the threshold, which makes the set downward
// closed across degrees.
struct SublevelSet {
    const LevelFunction* level = nullptr;
    double threshold = 0.0;

    bool contains(int degree, Index cell) const;
    bool operator()(int degree, Index cell) const { return contains(degree, cell); }
};

SublevelSet sublevel(const LevelFunction& d, double t);

Chain restrict_to_sublevel(const Chain& S, const SublevelSet& set);

// d(S restricted below t) minus (dS) restricted below t, at a level t that
// avoids every vertex value. The result is supported strictly inside the
// sublevel set, on cells facing across the level.
Chain slice(const Chain& S, const LevelFunction& d, double t);

struct SliceSelection {
    double level = 0.0;
    Chain slice;
    // mass(slice) * (b - a) / mass of S on cells whose vertex-value range
    // meets the open band (a, b); 0 when both vanish.
    double ratio = 0.0;
};

// Evaluates the slice at every regular midpoint level induced by vertex
// values inside (a, b) and returns the mass-minimizing level.
SliceSelection select_slice(const Chain& S, const LevelFunction& d, double a, double b);

// Apex join of a cycle: each support simplex is joined to the apex vertex
// with the orientation that makes d(cone(X)) = X hold exactly (verified).
// Joins containing the apex degenerate and are skipped. Requires every
// nondegenerate joined simplex to exist in the complex.
Chain cone(const Chain& X, Index apex);

// (r / (n+1)) * mass(X) with r the farthest support vertex from the apex;
// meshes realize it up to their cone-quality factor.
double cone_mass_bound(const Chain& X, Index apex);

}  // namespace flatstab
