#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flatstab/chain_complex.hpp"

namespace flatstab {

// Anisotropic cell-weight functional. Each degree-n cell carries one total
// weight per orientation (per-unit-volume weight times cell volume); the
// stored ellipticity ratio lambda certifies
// lambda^{-1} * volume <= weight_{+/-} <= lambda * volume per entry.
class Integrand {
  public:
    // Unit per-volume weight on every cell; lambda is exactly 1.
    static Integrand area(const CellComplex& complex, int degree);

    // Degree-1 only: per-unit weight wx|tau_x| + wy|tau_y| for unit
    // orientation tau, so axis-aligned edges carry wx or wy directly.
    static Integrand anisotropic_xy(const CellComplex& complex, double weight_x, double weight_y);

    // Per-unit weight unit_low on cells whose barycenter coordinate along
    // `axis` is < split, unit_high on the rest; orientation-even.
    static Integrand two_zone(const CellComplex& complex, int degree, int axis, double split,
                              double unit_low, double unit_high);

    // Explicit total weights per cell (positive, one entry per n-cell).
    static Integrand from_table(const CellComplex& complex, int degree,
                                std::vector<double> weight_plus, std::vector<double> weight_minus);

    const CellComplex& complex() const { return *complex_; }
    int degree() const { return degree_; }
    double lambda() const { return lambda_; }

    double weight_plus(Index cell) const { return weight_plus_[static_cast<std::size_t>(cell)]; }
    double weight_minus(Index cell) const { return weight_minus_[static_cast<std::size_t>(cell)]; }
    double unit_weight_plus(Index cell) const;
    double unit_weight_minus(Index cell) const;

    // Sum over cells of |coeff| times the weight for the coefficient's sign.
    double evaluate(const Chain& T) const;

  private:
    Integrand(const CellComplex& complex, int degree, std::vector<double> weight_plus,
              std::vector<double> weight_minus);

    const CellComplex* complex_;
    int degree_;
    std::vector<double> weight_plus_;
    std::vector<double> weight_minus_;
    double lambda_ = 1.0;
};

// Nearest-neighbor freezing at x: each cell adopts the per-unit weights of
// the most-aligned cell (ties broken by distance to x, then index), with the
// orientation pair swapped when the best alignment is negative. Requires x
// inside the complex's bounding box.
Integrand freeze(const Integrand& F, std::span<const double> x);

// Perturbed functional G(T) = F(T) + phi(v(T)) where v(T) accumulates the
// per-cell samples f against the F-weighted measure of T. The declared
// gradient bound must give b = sup|Dphi| * sup|f| < 1, which forces the
// comparability (1-b) F <= G <= (1+b) F.
class GFunctional {
  public:
    using Phi = std::function<double(std::span<const double>)>;

    // f_values: one vector in R^k per degree-n cell (Euclidean norms bound
    // sup|f|). sigma, when given, registers the reference chain on whose
    // support f must vanish identically.
    GFunctional(Integrand base, std::vector<std::vector<double>> f_values, Phi phi,
                double sup_dphi, const Chain* sigma = nullptr);

    const Integrand& base() const { return base_; }
    double b() const { return b_; }

    double evaluate(const Chain& T) const;

  private:
    Integrand base_;
    std::vector<std::vector<double>> f_values_;
    Phi phi_;
    double b_ = 0.0;
};

}  // namespace flatstab
