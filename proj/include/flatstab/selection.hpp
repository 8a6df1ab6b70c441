#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "flatstab/chain_complex.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/integrand.hpp"

namespace flatstab {

enum class PenaltyKind { absolute, quadratic };

// Penalized minimization problem over the homology class of sigma.
// lambda = 0 switches the penalty off (baseline F-minimization); the model
// problem itself always carries lambda > 0.
struct PenalizedProblem {
    Chain sigma;
    Integrand F;
    double eta = 0.0;
    double lambda = 1.0;
    PenaltyKind penalty = PenaltyKind::absolute;
    Coeff search_bound = 1;         // coefficient bound K for T = sigma + dR
    std::vector<Chain> candidates;  // when nonempty, replaces the enumerated family
    FlatCache* cache = nullptr;     // optional shared flat-norm memoization
};

struct MinimizerInfo {
    Chain chain;
    double value = 0.0;          // penalized value
    double f_value = 0.0;        // F alone
    double flat_distance = 0.0;  // flat distance to sigma
    double support_distance = 0.0;
};

struct MinimizerSet {
    std::vector<MinimizerInfo> minimizers;  // every chain within 1e-9 of the minimum
    double value = 0.0;
    long long searched = 0;  // distinct candidates evaluated
};

// F(T) plus lambda times |flat(T - sigma) - eta| or its square. Verifies
// that T lies in sigma's homology class.
double penalized_value(const PenalizedProblem& problem, const Chain& T);

// Exact minimum over {sigma + dR : |R coefficients| <= K} (or the explicit
// candidate list), pruned by the a-priori bound F(T) <= value at sigma.
// Returns every minimizer within the tie tolerance, in coefficient order.
MinimizerSet minimize_penalized(const PenalizedProblem& problem);

// Visits each distinct chain sigma + dR with filling coefficients in
// [-search_bound, search_bound] and F value at most value_cap, exactly once.
// Partial F-costs only grow during the search, so the cap prunes soundly:
// every family member above it is skipped, every member at or below it is
// visited. Throws CapacityError when the family exceeds the search budget.
void for_each_competitor(const Chain& sigma, const Integrand& F, Coeff search_bound,
                         double value_cap, const std::function<void(const Chain&)>& sink);

// Smallest grid lambda whose eta = 0 absolute-penalty problem has argmin
// exactly {sigma}, requiring every larger grid value to agree; +infinity
// when no suffix of the grid qualifies.
double find_lambda0(const Chain& sigma, const Integrand& F, Coeff search_bound,
                    const std::vector<double>& lambda_grid, FlatCache* cache = nullptr);

struct AlmostMinReport {
    bool pass = true;
    bool vacuous = false;   // no admissible perturbation was available to test
    long long tested = 0;   // distinct perturbations checked
    double worst_margin = 0.0;
    std::optional<Chain> violator;
    double violator_radius = 0.0;
};

// Tests F(S) <= F(S + X) + C * r * mass(S restricted near X, plus X) over
// every nonzero null-homologous cycle X with coefficients bounded by K_X
// supported in a vertex-centered ball of radius at most r_max and flat norm
// below 1. r is the tightest vertex-centered enclosing radius of X.
AlmostMinReport check_almost_minimizing(const Chain& S, const Integrand& F, double C,
                                        double r_max, Coeff K_X);

struct PerturbationReport {
    bool pass = true;
    bool vacuous = false;
    long long tested = 0;
    double worst_margin = 0.0;
    std::optional<Chain> violator;
};

// Tests F(R) <= F(R + X) + lambda * flat(X) over the same ball-supported
// cycle family (without the flat-norm cutoff); guaranteed for exact
// minimizers of the absolute-penalty problem.
PerturbationReport check_perturbation_inequality(const Chain& R, const Integrand& F,
                                                 double lambda, double r_max, Coeff K_X);

struct AlmostMinConstants {
    double C = 0.0;
    double r0 = 0.0;
};

// C = 4 Lambda^2 lambda / (n + 1) and r0 = (n + 1) / (4 lambda Lambda).
AlmostMinConstants almost_min_constant(double lambda, double Lambda, int degree);

struct CalibrationReport {
    double d_omega_sup = 0.0;    // certified linear-deficit constant
    double sigma_pairing = 0.0;  // pairing of omega with sigma (its mass when valid)
};

// Validates a unit-comass discrete form that restricts to sigma's
// orientation and returns the sup-norm of its discrete exterior derivative.
// Requires the area integrand (weights equal to volumes).
CalibrationReport verify_calibration(const std::vector<double>& omega_unit, const Chain& sigma,
                                     const Integrand& F);

// Empirical constant: max over homologous T with 0 < flat(T - sigma) <=
// epsilon of positive F-deficit divided by the flat distance; 0 when sigma
// minimizes F over the sampled family.
double linear_deficit_bound(const Chain& sigma, const Integrand& F, double epsilon,
                            Coeff search_bound, FlatCache* cache = nullptr);

}  // namespace flatstab
