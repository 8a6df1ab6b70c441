#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "flatstab/chain_complex.hpp"

namespace flatstab {

// Result of minimizing mass(S) + mass(R) over decompositions T = S + dR.
struct FlatDecomposition {
    Chain S;                   // degree-n residual
    Chain R;                   // degree-(n+1) filling
    double value = 0.0;        // mass(S) + mass(R)
    bool optimal = false;      // value certified against the relaxation bound
    bool integral = false;     // returned chains certified integral
    double lower_bound = 0.0;  // relaxation optimum; equals value when optimal
};

struct FlatOptions {
    bool force_bruteforce = false;  // skip the relaxation, enumerate directly
    bool cross_check = false;       // also enumerate and require agreement
    Coeff oracle_coeff_bound = 0;   // 0 = adaptive from the relaxed solution
};

// Flat distance of T to zero. Solves the linear relaxation warm-started at
// (S, R) = (T, 0); an integral optimum is verified exactly in integer
// arithmetic. Fractional optima fall back to the enumeration oracle on
// instances with at most 20 top-degree cells; beyond that the result is the
// trivial decomposition S = T with optimal = false and the relaxation value
// in lower_bound.
FlatDecomposition flat_norm(const Chain& T, const FlatOptions& options = {});

// Exhaustive minimum over fillings with |coefficients| <= coeff_bound.
// The optimal flag refers to that bounded family. Throws CapacityError when
// (2K+1)^count exceeds 3^20 states.
FlatDecomposition flat_norm_bruteforce(const Chain& T, Coeff coeff_bound);

// Minimal-mass integral filling R with dR = T. Throws NotACycleError when
// dT != 0, NotNullHomologousError when no filling exists, and
// FillingObstructionError when a mixed decomposition is strictly cheaper
// than every pure filling.
Chain minimal_filling(const Chain& T);

// Witness R with dR = T - Sigma, or nullopt when T and Sigma lie in
// different homology classes. Requires dT = dSigma. Throws CapacityError
// when integrality cannot be settled within the enumeration budget.
std::optional<Chain> is_homologous(const Chain& T, const Chain& Sigma);

// Memoizes flat decompositions keyed by (complex, degree, coefficients).
// Safe for concurrent use; results are deterministic so duplicated
// computation under contention is benign.
class FlatCache {
  public:
    FlatDecomposition flat_norm(const Chain& T, const FlatOptions& options = {});
    std::size_t size() const;

  private:
    using Key = std::tuple<const CellComplex*, int, std::vector<std::pair<Index, Coeff>>>;
    mutable std::mutex mutex_;
    std::map<Key, FlatDecomposition> entries_;
};

}  // namespace flatstab
