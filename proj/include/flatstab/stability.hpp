#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "flatstab/builders.hpp"
#include "flatstab/chain_complex.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/integrand.hpp"

namespace flatstab {

// Normal-displacement family over a straight run of grid edges: nodes are
// the run's vertices, the first and last node are clamped, interior nodes
// move along normal_axis. Two-axis box grids only.
struct GraphFamily {
    const GridComplex* grid = nullptr;
    int axis = 0;         // parametrization axis of the run
    int normal_axis = 1;  // displacement axis
    std::vector<int> base;                         // grid coordinate of node 0
    std::vector<Index> nodes;                      // path vertices at zero displacement
    std::vector<Index> cells;                      // edge i joins nodes i and i+1
    std::vector<std::vector<double>> normal_dirs;  // unit length, one per node
    std::vector<double> amplitude_grid;            // quantized displacements staying in the grid
    double layer = 0.0;                            // displacement quantum (mesh step)

    int interior_nodes() const { return static_cast<int>(nodes.size()) - 2; }
    Chain sigma() const;  // the zero-displacement chain, oriented along the run
};

// Run of `segments` edges starting at grid coordinate `start`, increasing
// along `axis`. normal_dirs default to the normal_axis unit vector; they may
// be tilted afterwards for the smooth evaluations, never for embeddings.
GraphFamily make_graph_family(const GridComplex& grid, std::span<const int> start, int axis,
                              int segments, int normal_axis);

struct GraphChain {
    Chain chain;    // staircase embedding of the displaced nodes
    Chain witness;  // region between: boundary(witness) = chain - sigma
};

// Embeds node displacements as a staircase edge path: each segment runs at
// its left node's layer, then climbs at the right node's column. Requires u
// on the amplitude grid with zero endpoints and axis-aligned normals.
GraphChain graph_chain(const GraphFamily& G, std::span<const double> u);

// Continuum-style value of the displaced polyline: per-segment Euclidean
// length times the per-unit weight of the underlying sigma cell (weights
// frozen along the displacement fibers). Accepts arbitrary real u with zero
// endpoints; no quantization.
double smooth_value(const GraphFamily& G, const Integrand& F, std::span<const double> u);

struct JacobiSpectrum {
    std::vector<std::vector<double>> Q;  // second variation on interior displacements
    std::vector<double> node_measure;    // lumped node lengths; eigenvalues below are
                                         // of the pencil Q v = lambda * diag(measure) v
    std::vector<double> eigenvalues;     // ascending
    int index = 0;                       // eigenvalues below -tol
    int nullity = 0;                     // eigenvalues within tol of zero
    bool strictly_stable = false;        // min eigenvalue >= stability_floor
    double tol = 0.0;                    // zero threshold: 1e-8 times the spectral norm
    double stability_floor = 0.0;
};

// Hessian of u -> smooth_value(G, F, u) at u = 0, assembled from per-segment
// central second differences with step 1e-4 times the mesh, then
// mass-normalized so the spectrum approximates the continuum Jacobi
// operator. Requires an F-critical run: all first-variation components must
// vanish (below 1e-8), otherwise NotCriticalError reports the gradient.
JacobiSpectrum second_variation_form(const GraphFamily& G, const Integrand& F,
                                     double stability_floor = 1e-8);

struct ProfileBin {
    double eta = 0.0;
    double g = 0.0;          // min F over the bin, valid when attained
    bool attained = false;
    bool censored = false;   // empty under a finite cap: members above it may exist
    std::optional<Chain> witness;
};

struct ProfileOptions {
    Coeff search_bound = 1;
    double tol_eta = 1e-9;  // half-width of each eta bin
    double value_cap = std::numeric_limits<double>::infinity();
    std::vector<Chain> candidates;  // when nonempty, replaces the enumerated family
    FlatCache* cache = nullptr;
};

// g(eta) = min F(S) over sigma's homology class with flat(S - sigma) within
// tol_eta of eta. Attained bins are exact even under a finite value cap:
// every pruned competitor costs more than the reported minimum. Bins no
// family member hits are attained = false, and censored when a finite cap
// could be hiding members.
std::vector<ProfileBin> stability_profile(const Chain& sigma, const Integrand& F,
                                          std::span<const double> eta_grid,
                                          const ProfileOptions& options = {});

struct GrowthFit {
    double C_fit = 0.0;
    bool pass = false;   // C_fit > 0: quadratic growth certified on the window
    int bins_used = 0;   // attained bins with 0 < eta <= eps
};

// Worst-bin quadratic constant min (g(eta) - F_sigma) / eta^2 over attained
// bins with 0 < eta <= eps. Requires at least two attained bins with
// eta <= eps, at least one of them positive.
GrowthFit quadratic_growth_fit(std::span<const ProfileBin> profile, double F_sigma, double eps);

struct NormChainReport {
    double w12_sq = 0.0;     // sum of node length * u^2 plus segment (du)^2 / h
    double l1 = 0.0;         // sum of node length * |u|
    double flat = 0.0;       // flat distance of graph(u) - sigma
    double c0 = 0.0;         // Holder constant: 1 / length(sigma)
    double c1 = 0.0;         // observed w12_sq / flat^2; 0 when flat = 0
    bool holder_ok = false;  // w12_sq >= c0 * l1^2
    bool flat_ok = false;    // flat <= l1, up to mesh tolerance
};

// The norm chain linking displacement size to flat distance: W^{1,2} controls
// L^1 by Holder, and the region between the graph and sigma bounds the flat
// distance by the L^1 norm. Requires u admissible for graph_chain.
NormChainReport norm_chain_check(const GraphFamily& G, std::span<const double> u,
                                 FlatCache* cache = nullptr);

}  // namespace flatstab
