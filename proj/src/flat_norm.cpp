#include "flatstab/flat_norm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>

#include "flatstab/errors.hpp"
#include "flatstab/lp.hpp"

namespace flatstab {

namespace {

constexpr double kIntegralityTol = 1e-6;
constexpr double kValueTol = 1e-9;
constexpr long long kMaxOracleStates = 3486784401LL;  // 3^20

void require_filling_space(const Chain& T) {
    if (T.degree() + 1 > T.complex().top_degree()) {
        throw NoFillingSpaceError("no cells of degree " + std::to_string(T.degree() + 1) +
                                  " to fill against");
    }
}

bool oracle_feasible(Index cells, Coeff bound) {
    if (cells > 20) return false;
    long long states = 1;
    const long long branch = 2 * static_cast<long long>(bound) + 1;
    for (Index i = 0; i < cells; ++i) {
        if (states > kMaxOracleStates / branch) return false;
        states *= branch;
    }
    return states <= kMaxOracleStates;
}

std::vector<Coeff> dense_coeffs(const Chain& T) {
    std::vector<Coeff> out(static_cast<std::size_t>(T.complex().num_cells(T.degree())), 0);
    for (const auto& [cell, coeff] : T.coeffs()) out[static_cast<std::size_t>(cell)] = coeff;
    return out;
}

struct EnumProblem {
    const CellComplex* complex = nullptr;
    int degree = 0;             // n; fillings live in degree n + 1
    std::vector<Coeff> target;  // per n-cell
    Coeff bound = 1;
    bool exact_fill = false;  // require the filling boundary to hit target exactly
};

struct EnumResult {
    bool found = false;
    std::vector<Coeff> filling;
    double value = 0.0;  // decomposition value, or filling mass in exact_fill mode
};

// Depth-first search over filling coefficients in [-K, K], one top cell per
// level. An n-cell's residual cost becomes fixed once the last top cell
// touching it is assigned, which keeps partial costs monotone and prunable.
EnumResult enumerate_fillings(const EnumProblem& prob) {
    const CellComplex& X = *prob.complex;
    const int n = prob.degree;
    const Index E = X.num_cells(n);
    const Index C = X.num_cells(n + 1);

    std::vector<std::vector<std::pair<Index, int>>> faces(static_cast<std::size_t>(C));
    std::vector<Index> last_touch(static_cast<std::size_t>(E), -1);
    for (Index rho = 0; rho < C; ++rho) {
        for (const auto& inc : X.cell_boundary(n + 1, rho)) {
            faces[static_cast<std::size_t>(rho)].emplace_back(inc.face, inc.sign);
            last_touch[static_cast<std::size_t>(inc.face)] = rho;
        }
    }
    std::vector<std::vector<Index>> fixed_at(static_cast<std::size_t>(C));
    double base_cost = 0.0;
    for (Index e = 0; e < E; ++e) {
        const Coeff t = prob.target[static_cast<std::size_t>(e)];
        if (last_touch[static_cast<std::size_t>(e)] >= 0) {
            fixed_at[static_cast<std::size_t>(last_touch[static_cast<std::size_t>(e)])].push_back(e);
        } else if (t != 0) {
            if (prob.exact_fill) return {};  // unreachable cell, no filling can match
            base_cost += static_cast<double>(std::abs(t)) * X.volume(n, e);
        }
    }

    EnumResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<Coeff> r(static_cast<std::size_t>(C), 0);
    std::vector<Coeff> d(static_cast<std::size_t>(E), 0);

    std::function<void(Index, double)> visit = [&](Index depth, double cost) {
        if (cost >= best.value) return;
        if (depth == C) {
            best.found = true;
            best.value = cost;
            best.filling = r;
            return;
        }
        const double vol = X.volume(n + 1, depth);
        for (Coeff step = 0; step <= 2 * prob.bound; ++step) {
            // Visit 0, +1, -1, +2, -2, ... so cheap fillings surface early.
            const Coeff val = (step % 2 == 0) ? step / 2 : -(step + 1) / 2;
            const double fill_cost = vol * static_cast<double>(std::abs(val));
            // |val| is nondecreasing along the visit order, so once the fill
            // cost alone busts the bound every later value does too.
            if (cost + fill_cost >= best.value) break;
            for (const auto& [e, sign] : faces[static_cast<std::size_t>(depth)]) {
                d[static_cast<std::size_t>(e)] += sign * val;
            }
            double total = cost + fill_cost;
            bool feasible = true;
            for (Index e : fixed_at[static_cast<std::size_t>(depth)]) {
                const Coeff resid =
                    prob.target[static_cast<std::size_t>(e)] - d[static_cast<std::size_t>(e)];
                if (prob.exact_fill) {
                    if (resid != 0) {
                        feasible = false;
                        break;
                    }
                } else {
                    total += static_cast<double>(std::abs(resid)) * X.volume(n, e);
                }
            }
            if (feasible) {
                r[static_cast<std::size_t>(depth)] = val;
                visit(depth + 1, total);
                r[static_cast<std::size_t>(depth)] = 0;
            }
            for (const auto& [e, sign] : faces[static_cast<std::size_t>(depth)]) {
                d[static_cast<std::size_t>(e)] -= sign * val;
            }
        }
    };
    visit(0, base_cost);
    return best;
}

Chain chain_from_dense(const CellComplex& X, int degree, const std::vector<Coeff>& coeffs) {
    Chain out(X, degree);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (coeffs[i] != 0) out.set_coeff(static_cast<Index>(i), coeffs[i]);
    }
    return out;
}

struct RelaxedSolution {
    lp::Status status = lp::Status::Infeasible;
    double objective = 0.0;
    std::vector<double> s;  // empty when the problem has no residual block
    std::vector<double> r;
};

// Shared LP assembly. with_residual selects between the decomposition
// problem min w|s| + v|r|, s + dr = t (warm-started at s = t) and the pure
// filling problem min v|r|, dr = t.
RelaxedSolution solve_relaxation(const Chain& T, bool with_residual) {
    const CellComplex& X = T.complex();
    const int n = T.degree();
    const Index E = X.num_cells(n);
    const Index C = X.num_cells(n + 1);
    const int srows = static_cast<int>(E);
    const int scols = with_residual ? 2 * static_cast<int>(E + C) : 2 * static_cast<int>(C);
    const int roff = with_residual ? 2 * static_cast<int>(E) : 0;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(srows, scols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(srows);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(scols);

    if (with_residual) {
        for (Index e = 0; e < E; ++e) {
            A(e, e) = 1.0;
            A(e, E + e) = -1.0;
            c(e) = c(E + e) = X.volume(n, e);
        }
    }
    for (Index rho = 0; rho < C; ++rho) {
        for (const auto& inc : X.cell_boundary(n + 1, rho)) {
            A(inc.face, roff + rho) = inc.sign;
            A(inc.face, roff + C + rho) = -inc.sign;
        }
        c(roff + rho) = c(roff + C + rho) = X.volume(n + 1, rho);
    }
    for (const auto& [cell, coeff] : T.coeffs()) b(cell) = static_cast<double>(coeff);

    lp::Result sol;
    if (with_residual) {
        std::vector<int> hint(static_cast<std::size_t>(E));
        for (Index e = 0; e < E; ++e) {
            hint[static_cast<std::size_t>(e)] = b(e) >= 0.0 ? static_cast<int>(e)
                                                            : static_cast<int>(E + e);
        }
        sol = lp::minimize(A, b, c, &hint);
    } else {
        sol = lp::minimize(A, b, c);
    }

    RelaxedSolution out;
    out.status = sol.status;
    out.objective = sol.objective;
    if (sol.status == lp::Status::Optimal) {
        if (with_residual) {
            out.s.resize(static_cast<std::size_t>(E));
            for (Index e = 0; e < E; ++e) out.s[static_cast<std::size_t>(e)] = sol.x(e) - sol.x(E + e);
        }
        out.r.resize(static_cast<std::size_t>(C));
        for (Index rho = 0; rho < C; ++rho) {
            out.r[static_cast<std::size_t>(rho)] = sol.x(roff + rho) - sol.x(roff + C + rho);
        }
    }
    return out;
}

bool nearly_integral(const std::vector<double>& values) {
    for (double v : values) {
        if (std::abs(v - std::round(v)) > kIntegralityTol) return false;
    }
    return true;
}

std::vector<Coeff> round_to_coeffs(const std::vector<double>& values) {
    std::vector<Coeff> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<Coeff>(std::llround(values[i]));
    }
    return out;
}

Coeff adaptive_bound(const std::vector<double>& r) {
    Coeff bound = 1;
    for (double v : r) {
        const auto need = static_cast<Coeff>(std::ceil(std::abs(v) - 1e-9));
        bound = std::max(bound, need);
    }
    return bound;
}

// Integral filling of `target` located by exact enumeration, used when the
// relaxation comes back fractional. Returns nullopt when the bounded search
// is exhausted (inconclusive, not a proof of absence).
std::optional<Chain> exact_fill_search(const Chain& target, Coeff bound) {
    const CellComplex& X = target.complex();
    if (!oracle_feasible(X.num_cells(target.degree() + 1), bound)) {
        throw CapacityError("integral filling search exceeds the enumeration budget");
    }
    EnumProblem prob;
    prob.complex = &X;
    prob.degree = target.degree();
    prob.target = dense_coeffs(target);
    prob.bound = bound;
    prob.exact_fill = true;
    const EnumResult best = enumerate_fillings(prob);
    if (!best.found) return std::nullopt;
    return chain_from_dense(X, target.degree() + 1, best.filling);
}

}  // namespace

FlatDecomposition flat_norm_bruteforce(const Chain& T, Coeff coeff_bound) {
    require_filling_space(T);
    if (coeff_bound < 0) throw InvalidArgumentError("flat_norm_bruteforce: negative bound");
    const CellComplex& X = T.complex();
    const int n = T.degree();
    if (!oracle_feasible(X.num_cells(n + 1), coeff_bound)) {
        throw CapacityError("flat_norm_bruteforce: instance exceeds the enumeration budget");
    }

    EnumProblem prob;
    prob.complex = &X;
    prob.degree = n;
    prob.target = dense_coeffs(T);
    prob.bound = coeff_bound;
    const EnumResult best = enumerate_fillings(prob);

    FlatDecomposition out{Chain(X, n), Chain(X, n + 1), 0.0, true, true, 0.0};
    out.R = chain_from_dense(X, n + 1, best.filling);
    out.S = T - boundary(out.R);
    out.value = mass(out.S) + mass(out.R);
    out.lower_bound = out.value;
    if (std::abs(out.value - best.value) > kValueTol * (1.0 + std::abs(best.value))) {
        throw Error("flat_norm_bruteforce: cost bookkeeping mismatch");
    }
    return out;
}

FlatDecomposition flat_norm(const Chain& T, const FlatOptions& options) {
    require_filling_space(T);
    const CellComplex& X = T.complex();
    const int n = T.degree();
    const Index C = X.num_cells(n + 1);

    if (options.force_bruteforce) {
        const Coeff bound = options.oracle_coeff_bound > 0 ? options.oracle_coeff_bound : 1;
        FlatDecomposition out = flat_norm_bruteforce(T, bound);
        if (options.cross_check) {
            FlatOptions lp_only;
            const FlatDecomposition relaxed = flat_norm(T, lp_only);
            if (relaxed.optimal &&
                std::abs(relaxed.value - out.value) > kValueTol * (1.0 + out.value)) {
                throw Error("flat_norm: oracle disagrees with the relaxation");
            }
        }
        return out;
    }

    const RelaxedSolution sol = solve_relaxation(T, true);
    if (sol.status != lp::Status::Optimal) {
        throw Error("flat_norm: relaxation did not reach an optimum");
    }

    FlatDecomposition out{Chain(X, n), Chain(X, n + 1), 0.0, false, false, sol.objective};
    if (nearly_integral(sol.s) && nearly_integral(sol.r)) {
        out.S = chain_from_dense(X, n, round_to_coeffs(sol.s));
        out.R = chain_from_dense(X, n + 1, round_to_coeffs(sol.r));
        if (!(T == out.S + boundary(out.R))) {
            throw Error("flat_norm: rounded solution fails exact recomposition");
        }
        out.value = mass(out.S) + mass(out.R);
        if (std::abs(out.value - sol.objective) > kValueTol * (1.0 + std::abs(sol.objective))) {
            throw Error("flat_norm: integral value drifted from the relaxation optimum");
        }
        out.optimal = true;
        out.integral = true;
    } else {
        const Coeff bound = options.oracle_coeff_bound > 0 ? options.oracle_coeff_bound
                                                           : adaptive_bound(sol.r);
        if (oracle_feasible(C, bound)) {
            out = flat_norm_bruteforce(T, bound);
            out.lower_bound = sol.objective;
            if (out.value < sol.objective - kValueTol * (1.0 + std::abs(sol.objective))) {
                throw Error("flat_norm: enumeration undercut the relaxation bound");
            }
            // Only a match with the relaxation bound certifies global optimality.
            out.optimal =
                out.value <= sol.objective + kIntegralityTol * (1.0 + std::abs(sol.objective));
        } else {
            out.S = T;
            out.value = mass(T);
        }
    }

    if (options.cross_check && out.integral) {
        const Coeff bound = options.oracle_coeff_bound > 0 ? options.oracle_coeff_bound
                                                           : adaptive_bound(sol.r);
        if (oracle_feasible(C, bound)) {
            const FlatDecomposition oracle = flat_norm_bruteforce(T, bound);
            if (std::abs(oracle.value - out.value) > kValueTol * (1.0 + out.value)) {
                throw Error("flat_norm: relaxation disagrees with the oracle");
            }
        }
    }
    return out;
}

Chain minimal_filling(const Chain& T) {
    require_filling_space(T);
    const CellComplex& X = T.complex();
    const int n = T.degree();
    if (n >= 1 && !boundary(T).is_zero()) {
        throw NotACycleError("minimal_filling: chain has nonzero boundary");
    }

    const RelaxedSolution sol = solve_relaxation(T, false);
    if (sol.status == lp::Status::Infeasible) {
        throw NotNullHomologousError("minimal_filling: no filling exists");
    }
    if (sol.status != lp::Status::Optimal) {
        throw Error("minimal_filling: relaxation did not reach an optimum");
    }

    Chain R(X, n + 1);
    if (nearly_integral(sol.r)) {
        R = chain_from_dense(X, n + 1, round_to_coeffs(sol.r));
    } else {
        const auto found = exact_fill_search(T, adaptive_bound(sol.r));
        if (!found.has_value()) {
            throw CapacityError("minimal_filling: no integral filling within the search bound");
        }
        R = *found;
    }
    if (!(boundary(R) == T)) {
        throw Error("minimal_filling: filling fails exact verification");
    }

    const double fill_mass = mass(R);
    const FlatDecomposition flat = flat_norm(T);
    if (flat.optimal && flat.value < fill_mass - kValueTol) {
        throw FillingObstructionError(
            "minimal_filling: mixed decomposition beats every pure filling", fill_mass,
            flat.value);
    }
    return R;
}

std::optional<Chain> is_homologous(const Chain& T, const Chain& Sigma) {
    if (&T.complex() != &Sigma.complex()) {
        throw InvalidDomainError("is_homologous: chains live on different complexes");
    }
    if (T.degree() != Sigma.degree()) {
        throw DegreeError("is_homologous: degree mismatch");
    }
    require_filling_space(T);
    const int n = T.degree();
    if (n >= 1 && !(boundary(T) == boundary(Sigma))) {
        throw BoundaryMismatchError("is_homologous: boundaries differ");
    }

    const Chain D = T - Sigma;
    if (D.is_zero()) return Chain(T.complex(), n + 1);

    const RelaxedSolution sol = solve_relaxation(D, false);
    if (sol.status == lp::Status::Infeasible) return std::nullopt;
    if (sol.status != lp::Status::Optimal) {
        throw Error("is_homologous: relaxation did not reach an optimum");
    }

    if (nearly_integral(sol.r)) {
        Chain R = chain_from_dense(T.complex(), n + 1, round_to_coeffs(sol.r));
        if (!(boundary(R) == D)) {
            throw Error("is_homologous: witness fails exact verification");
        }
        return R;
    }
    const auto found = exact_fill_search(D, adaptive_bound(sol.r));
    if (!found.has_value()) {
        throw CapacityError("is_homologous: integrality unresolved within the search bound");
    }
    return *found;
}

FlatDecomposition FlatCache::flat_norm(const Chain& T, const FlatOptions& options) {
    Key key{&T.complex(), T.degree(),
            std::vector<std::pair<Index, Coeff>>(T.coeffs().begin(), T.coeffs().end())};
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    FlatDecomposition result = ::flatstab::flat_norm(T, options);
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.try_emplace(std::move(key), std::move(result)).first->second;
}

std::size_t FlatCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

}  // namespace flatstab
