#include "flatstab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "flatstab/errors.hpp"

namespace flatstab {

namespace {

constexpr double kTieTol = 1e-9;
constexpr double kCapSlack = 1e-6;
constexpr long long kMaxSearchStates = 3486784401LL;  // 3^20

bool search_feasible(Index cells, Coeff bound) {
    if (cells > 20) return false;
    long long states = 1;
    const long long branch = 2 * static_cast<long long>(bound) + 1;
    for (Index i = 0; i < cells; ++i) {
        if (states > kMaxSearchStates / branch) return false;
        states *= branch;
    }
    return states <= kMaxSearchStates;
}

using ChainKey = std::vector<std::pair<Index, Coeff>>;

ChainKey key_of(const Chain& T) {
    return ChainKey(T.coeffs().begin(), T.coeffs().end());
}

Chain chain_from_key(const CellComplex& complex, int degree, const ChainKey& key) {
    Chain out(complex, degree);
    for (const auto& [cell, coeff] : key) out.set_coeff(cell, coeff);
    return out;
}

double flat_distance(FlatCache* cache, const Chain& D) {
    if (D.is_zero()) return 0.0;
    return cache ? cache->flat_norm(D).value : flat_norm(D).value;
}

double penalty_of(const PenalizedProblem& problem, double flat) {
    const double dev = flat - problem.eta;
    if (problem.penalty == PenaltyKind::absolute) return problem.lambda * std::abs(dev);
    return problem.lambda * dev * dev;
}

void validate_problem(const PenalizedProblem& problem) {
    if (&problem.F.complex() != &problem.sigma.complex()) {
        throw InvalidDomainError("penalized problem: integrand and sigma on different complexes");
    }
    if (problem.F.degree() != problem.sigma.degree()) {
        throw DegreeError("penalized problem: integrand and sigma degree mismatch");
    }
    if (problem.sigma.is_zero()) {
        throw InvalidArgumentError("penalized problem: sigma must be nonzero");
    }
    if (problem.lambda < 0.0) {
        throw InvalidArgumentError("penalized problem: negative lambda");
    }
    if (problem.eta < 0.0) {
        throw InvalidArgumentError("penalized problem: negative eta");
    }
    if (problem.search_bound < 1) {
        throw InvalidArgumentError("penalized problem: search bound must be at least 1");
    }
}

// Translates every flavor of "not in sigma's class" into HomologyError.
void require_homologous(const Chain& T, const Chain& sigma) {
    std::optional<Chain> witness;
    try {
        witness = is_homologous(T, sigma);
    } catch (const BoundaryMismatchError&) {
        throw HomologyError("chain carries a different boundary than sigma");
    } catch (const NoFillingSpaceError&) {
        if (T == sigma) return;
        throw HomologyError("chain differs from sigma with no filling space available");
    }
    if (!witness.has_value()) {
        throw HomologyError("chain is not homologous to sigma");
    }
}

double edge_cost(const Integrand& F, Index cell, Coeff t) {
    if (t == 0) return 0.0;
    const double w = t > 0 ? F.weight_plus(cell) : F.weight_minus(cell);
    return static_cast<double>(std::abs(t)) * w;
}

}  // namespace

// A degree-n cell's contribution to F is fixed once the last (n+1)-cell
// touching it has been assigned, so partial costs only grow and pruning at
// the cap never discards a member at or below it.
void for_each_competitor(const Chain& base, const Integrand& F, Coeff bound, double cap,
                         const std::function<void(const Chain&)>& sink) {
    const CellComplex& cx = base.complex();
    const int n = base.degree();
    if (n + 1 > cx.top_degree()) {
        if (F.evaluate(base) <= cap) sink(base);
        return;
    }
    const Index E = cx.num_cells(n);
    const Index C = cx.num_cells(n + 1);
    if (!search_feasible(C, bound)) {
        throw CapacityError("competitor family exceeds the enumeration budget");
    }

    std::vector<std::vector<std::pair<Index, int>>> faces(static_cast<std::size_t>(C));
    std::vector<Index> last_touch(static_cast<std::size_t>(E), -1);
    for (Index rho = 0; rho < C; ++rho) {
        for (const auto& inc : cx.cell_boundary(n + 1, rho)) {
            faces[static_cast<std::size_t>(rho)].emplace_back(inc.face, inc.sign);
            last_touch[static_cast<std::size_t>(inc.face)] = rho;
        }
    }
    std::vector<std::vector<Index>> fixed_at(static_cast<std::size_t>(C));
    std::vector<Coeff> sig(static_cast<std::size_t>(E), 0);
    for (const auto& [cell, coeff] : base.coeffs()) sig[static_cast<std::size_t>(cell)] = coeff;
    double base_cost = 0.0;
    for (Index e = 0; e < E; ++e) {
        if (last_touch[static_cast<std::size_t>(e)] >= 0) {
            fixed_at[static_cast<std::size_t>(last_touch[static_cast<std::size_t>(e)])].push_back(e);
        } else {
            base_cost += edge_cost(F, e, sig[static_cast<std::size_t>(e)]);
        }
    }

    std::set<ChainKey> seen;
    std::vector<Coeff> d(static_cast<std::size_t>(E), 0);
    std::function<void(Index, double)> visit = [&](Index depth, double cost) {
        if (depth == C) {
            Chain T(cx, n);
            for (Index e = 0; e < E; ++e) {
                const Coeff t = sig[static_cast<std::size_t>(e)] + d[static_cast<std::size_t>(e)];
                if (t != 0) T.set_coeff(e, t);
            }
            if (seen.insert(key_of(T)).second) sink(T);
            return;
        }
        for (Coeff val = -bound; val <= bound; ++val) {
            for (const auto& [e, sign] : faces[static_cast<std::size_t>(depth)]) {
                d[static_cast<std::size_t>(e)] += sign * val;
            }
            double total = cost;
            for (Index e : fixed_at[static_cast<std::size_t>(depth)]) {
                total += edge_cost(F, e,
                                   sig[static_cast<std::size_t>(e)] + d[static_cast<std::size_t>(e)]);
            }
            if (total <= cap) visit(depth + 1, total);
            for (const auto& [e, sign] : faces[static_cast<std::size_t>(depth)]) {
                d[static_cast<std::size_t>(e)] -= sign * val;
            }
        }
    };
    if (base_cost <= cap) visit(0, base_cost);
}

namespace {

double vertex_distance(const CellComplex& cx, Index a, Index b) {
    const auto pa = cx.vertex(a);
    const auto pb = cx.vertex(b);
    double sq = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double diff = pa[i] - pb[i];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

std::vector<Index> cell_vertex_list(const CellComplex& cx, int degree, Index cell) {
    if (degree == 0) return {cell};
    const auto span = cx.cell_vertices(degree, cell);
    return std::vector<Index>(span.begin(), span.end());
}

// Distinct nonzero cycles with coefficients in [-bound, bound] supported in
// some vertex-centered ball of radius r_max, in canonical coefficient order.
// Degree 0 uses total coefficient zero as the cycle condition.
std::vector<Chain> enumerate_ball_cycles(const CellComplex& cx, int n, double r_max, Coeff bound) {
    const Index N = cx.num_cells(n);
    const Index V = cx.num_vertices();
    const double reach = r_max + 1e-12;

    std::set<ChainKey> keys;
    for (Index center = 0; center < V; ++center) {
        std::vector<Index> cells;
        for (Index i = 0; i < N; ++i) {
            bool inside = true;
            for (Index v : cell_vertex_list(cx, n, i)) {
                if (vertex_distance(cx, center, v) > reach) {
                    inside = false;
                    break;
                }
            }
            if (inside) cells.push_back(i);
        }
        if (cells.empty()) continue;
        if (!search_feasible(static_cast<Index>(cells.size()), bound)) {
            throw CapacityError("ball perturbation family exceeds the enumeration budget");
        }

        std::vector<Coeff> assign(cells.size(), 0);
        const auto emit = [&]() {
            ChainKey key;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (assign[i] != 0) key.emplace_back(cells[i], assign[i]);
            }
            if (!key.empty()) keys.insert(std::move(key));
        };

        if (n == 0) {
            std::function<void(std::size_t, Coeff)> visit = [&](std::size_t depth, Coeff total) {
                if (depth == cells.size()) {
                    if (total == 0) emit();
                    return;
                }
                for (Coeff val = -bound; val <= bound; ++val) {
                    assign[depth] = val;
                    visit(depth + 1, total + val);
                }
                assign[depth] = 0;
            };
            visit(0, 0);
            continue;
        }

        // Faces touched by ball cells must cancel exactly; a face's sum is
        // final once the last ball cell containing it has been assigned.
        const Index faces_total = cx.num_cells(n - 1);
        std::vector<std::size_t> last_touch(static_cast<std::size_t>(faces_total),
                                            cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            for (const auto& inc : cx.cell_boundary(n, cells[i])) {
                last_touch[static_cast<std::size_t>(inc.face)] = i;
            }
        }
        std::vector<std::vector<Index>> fixed_at(cells.size());
        for (Index f = 0; f < faces_total; ++f) {
            if (last_touch[static_cast<std::size_t>(f)] < cells.size()) {
                fixed_at[last_touch[static_cast<std::size_t>(f)]].push_back(f);
            }
        }
        std::vector<Coeff> d(static_cast<std::size_t>(faces_total), 0);
        std::function<void(std::size_t)> visit = [&](std::size_t depth) {
            if (depth == cells.size()) {
                emit();
                return;
            }
            for (Coeff val = -bound; val <= bound; ++val) {
                for (const auto& inc : cx.cell_boundary(n, cells[depth])) {
                    d[static_cast<std::size_t>(inc.face)] += inc.sign * val;
                }
                bool closed = true;
                for (Index f : fixed_at[depth]) {
                    if (d[static_cast<std::size_t>(f)] != 0) {
                        closed = false;
                        break;
                    }
                }
                if (closed) {
                    assign[depth] = val;
                    visit(depth + 1);
                    assign[depth] = 0;
                }
                for (const auto& inc : cx.cell_boundary(n, cells[depth])) {
                    d[static_cast<std::size_t>(inc.face)] -= inc.sign * val;
                }
            }
        };
        visit(0);
    }

    std::vector<Chain> out;
    out.reserve(keys.size());
    for (const ChainKey& key : keys) out.push_back(chain_from_key(cx, n, key));
    return out;
}

bool null_homologous(const Chain& X) {
    try {
        return is_homologous(X, Chain(X.complex(), X.degree())).has_value();
    } catch (const NoFillingSpaceError&) {
        return false;
    }
}

// Tightest vertex-centered ball around the support of X: minimal enclosing
// radius over all vertex centers, lowest vertex id on ties.
std::pair<Index, double> enclosing_ball(const Chain& X) {
    const CellComplex& cx = X.complex();
    std::set<Index> spt;
    for (const auto& [cell, coeff] : X.coeffs()) {
        for (Index v : cell_vertex_list(cx, X.degree(), cell)) spt.insert(v);
    }
    Index best_center = 0;
    double best_r = std::numeric_limits<double>::infinity();
    for (Index u = 0; u < cx.num_vertices(); ++u) {
        double enc = 0.0;
        for (Index v : spt) enc = std::max(enc, vertex_distance(cx, u, v));
        if (enc < best_r - 1e-12) {
            best_r = enc;
            best_center = u;
        }
    }
    return {best_center, best_r};
}

}  // namespace

double penalized_value(const PenalizedProblem& problem, const Chain& T) {
    validate_problem(problem);
    if (&T.complex() != &problem.sigma.complex()) {
        throw InvalidDomainError("penalized value: chain on a different complex");
    }
    if (T.degree() != problem.sigma.degree()) {
        throw DegreeError("penalized value: chain degree mismatch");
    }
    require_homologous(T, problem.sigma);
    const double f = problem.F.evaluate(T);
    return f + penalty_of(problem, flat_distance(problem.cache, T - problem.sigma));
}

MinimizerSet minimize_penalized(const PenalizedProblem& problem) {
    validate_problem(problem);
    const CellComplex& cx = problem.sigma.complex();
    const int n = problem.sigma.degree();
    const double sigma_value =
        problem.F.evaluate(problem.sigma) + penalty_of(problem, 0.0);

    struct Eval {
        double value;
        double f_value;
        double flat;
    };
    std::map<ChainKey, Eval> table;
    const auto evaluate_into = [&](const Chain& T) {
        ChainKey key = key_of(T);
        if (table.find(key) != table.end()) return;
        const double f = problem.F.evaluate(T);
        const double flat = flat_distance(problem.cache, T - problem.sigma);
        table.emplace(std::move(key), Eval{f + penalty_of(problem, flat), f, flat});
    };

    if (!problem.candidates.empty()) {
        for (const Chain& T : problem.candidates) {
            if (&T.complex() != &cx) {
                throw InvalidDomainError("minimize_penalized: candidate on a different complex");
            }
            if (T.degree() != n) {
                throw DegreeError("minimize_penalized: candidate degree mismatch");
            }
            require_homologous(T, problem.sigma);
            evaluate_into(T);
        }
    } else {
        // Any minimizer T obeys F(T) <= penalized(T) <= penalized(sigma),
        // so partial F-costs above that cap prune soundly.
        const double cap = sigma_value + kCapSlack;
        for_each_competitor(problem.sigma, problem.F, problem.search_bound, cap, evaluate_into);
    }

    MinimizerSet out;
    out.searched = static_cast<long long>(table.size());
    out.value = std::numeric_limits<double>::infinity();
    for (const auto& [key, eval] : table) out.value = std::min(out.value, eval.value);

    const bool sigma_in_family = table.find(key_of(problem.sigma)) != table.end();
    for (const auto& [key, eval] : table) {
        if (eval.value > out.value + kTieTol) continue;
        Chain T = chain_from_key(cx, n, key);
        const double spread = support_distance(T, problem.sigma);
        MinimizerInfo info{std::move(T), eval.value, eval.f_value, eval.flat, spread};
        if (info.f_value > info.value + kTieTol ||
            (sigma_in_family && info.value > sigma_value + kTieTol)) {
            throw Error("minimize_penalized: minimizer bound chain violated");
        }
        out.minimizers.push_back(std::move(info));
    }
    return out;
}

double find_lambda0(const Chain& sigma, const Integrand& F, Coeff search_bound,
                    const std::vector<double>& lambda_grid, FlatCache* cache) {
    if (lambda_grid.empty()) {
        throw InvalidArgumentError("find_lambda0: empty lambda grid");
    }
    for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
        if (lambda_grid[i] < lambda_grid[i - 1]) {
            throw InvalidArgumentError("find_lambda0: lambda grid must be sorted ascending");
        }
    }
    FlatCache local;
    FlatCache* shared = cache ? cache : &local;

    std::vector<char> exact(lambda_grid.size(), 0);
    for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
        PenalizedProblem problem{sigma,       F,  0.0, lambda_grid[j], PenaltyKind::absolute,
                                 search_bound, {}, shared};
        const MinimizerSet found = minimize_penalized(problem);
        exact[j] = found.minimizers.size() == 1 && found.minimizers[0].chain == sigma;
    }
    std::size_t start = lambda_grid.size();
    for (std::size_t j = lambda_grid.size(); j-- > 0;) {
        if (!exact[j]) break;
        start = j;
    }
    if (start == lambda_grid.size()) return std::numeric_limits<double>::infinity();
    return lambda_grid[start];
}

AlmostMinReport check_almost_minimizing(const Chain& S, const Integrand& F, double C,
                                        double r_max, Coeff K_X) {
    const CellComplex& cx = S.complex();
    const int n = S.degree();
    if (&F.complex() != &cx) {
        throw InvalidDomainError("almost-minimality check: integrand on a different complex");
    }
    if (F.degree() != n) {
        throw DegreeError("almost-minimality check: integrand degree mismatch");
    }
    if (!(r_max > 0.0)) {
        throw InvalidArgumentError("almost-minimality check: r_max must be positive");
    }
    if (C < 0.0) {
        throw InvalidArgumentError("almost-minimality check: negative constant");
    }
    if (K_X < 1) {
        throw InvalidArgumentError("almost-minimality check: coefficient bound must be at least 1");
    }

    const double f_s = F.evaluate(S);
    AlmostMinReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    Chain worst_chain(cx, n);
    double worst_radius = 0.0;

    for (const Chain& X : enumerate_ball_cycles(cx, n, r_max, K_X)) {
        if (!null_homologous(X)) continue;
        if (flat_norm(X).value >= 1.0 - kTieTol) continue;
        const auto [center, radius] = enclosing_ball(X);

        std::vector<char> near(static_cast<std::size_t>(cx.num_cells(n)), 0);
        for (Index i = 0; i < cx.num_cells(n); ++i) {
            bool inside = true;
            for (Index v : cell_vertex_list(cx, n, i)) {
                if (vertex_distance(cx, center, v) > radius + 1e-12) {
                    inside = false;
                    break;
                }
            }
            near[static_cast<std::size_t>(i)] = inside ? 1 : 0;
        }
        const double local_mass = mass(restrict_where(S, near) + X);
        const double margin = F.evaluate(S + X) + C * radius * local_mass - f_s;
        ++report.tested;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            worst_chain = X;
            worst_radius = radius;
        }
    }

    if (report.tested == 0) {
        report.vacuous = true;
        report.worst_margin = 0.0;
    } else if (report.worst_margin < -kTieTol) {
        report.pass = false;
        report.violator = worst_chain;
        report.violator_radius = worst_radius;
    }
    return report;
}

PerturbationReport check_perturbation_inequality(const Chain& R, const Integrand& F,
                                                 double lambda, double r_max, Coeff K_X) {
    const CellComplex& cx = R.complex();
    const int n = R.degree();
    if (&F.complex() != &cx) {
        throw InvalidDomainError("perturbation check: integrand on a different complex");
    }
    if (F.degree() != n) {
        throw DegreeError("perturbation check: integrand degree mismatch");
    }
    if (!(r_max > 0.0)) {
        throw InvalidArgumentError("perturbation check: r_max must be positive");
    }
    if (lambda < 0.0) {
        throw InvalidArgumentError("perturbation check: negative lambda");
    }
    if (K_X < 1) {
        throw InvalidArgumentError("perturbation check: coefficient bound must be at least 1");
    }

    const double f_r = F.evaluate(R);
    PerturbationReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    Chain worst_chain(cx, n);

    for (const Chain& X : enumerate_ball_cycles(cx, n, r_max, K_X)) {
        if (!null_homologous(X)) continue;
        const double flat = flat_norm(X).value;
        const double margin = F.evaluate(R + X) + lambda * flat - f_r;
        ++report.tested;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            worst_chain = X;
        }
    }

    if (report.tested == 0) {
        report.vacuous = true;
        report.worst_margin = 0.0;
    } else if (report.worst_margin < -kTieTol) {
        report.pass = false;
        report.violator = worst_chain;
    }
    return report;
}

AlmostMinConstants almost_min_constant(double lambda, double Lambda, int degree) {
    if (!(lambda > 0.0)) {
        throw InvalidArgumentError("almost_min_constant: lambda must be positive");
    }
    if (!(Lambda >= 1.0)) {
        throw InvalidArgumentError("almost_min_constant: ellipticity ratio must be at least 1");
    }
    if (degree < 0) {
        throw InvalidArgumentError("almost_min_constant: negative degree");
    }
    const double np1 = static_cast<double>(degree + 1);
    return {4.0 * Lambda * Lambda * lambda / np1, np1 / (4.0 * lambda * Lambda)};
}

CalibrationReport verify_calibration(const std::vector<double>& omega_unit, const Chain& sigma,
                                     const Integrand& F) {
    const CellComplex& cx = sigma.complex();
    const int n = sigma.degree();
    if (&F.complex() != &cx) {
        throw InvalidDomainError("calibration: integrand on a different complex");
    }
    if (F.degree() != n) {
        throw DegreeError("calibration: integrand degree mismatch");
    }
    const Index N = cx.num_cells(n);
    if (omega_unit.size() != static_cast<std::size_t>(N)) {
        throw InvalidArgumentError("calibration: one form value per cell required");
    }
    for (Index e = 0; e < N; ++e) {
        const double vol = cx.volume(n, e);
        if (std::abs(F.weight_plus(e) - vol) > 1e-12 * (1.0 + vol) ||
            std::abs(F.weight_minus(e) - vol) > 1e-12 * (1.0 + vol)) {
            throw InvalidArgumentError("calibration: area integrand required");
        }
    }

    constexpr double kFormTol = 1e-12;
    for (Index e = 0; e < N; ++e) {
        if (std::abs(omega_unit[static_cast<std::size_t>(e)]) > 1.0 + kFormTol) {
            throw NotACalibrationError("calibration: comass exceeds 1");
        }
    }
    for (const auto& [cell, coeff] : sigma.coeffs()) {
        const double want = coeff > 0 ? 1.0 : -1.0;
        if (std::abs(omega_unit[static_cast<std::size_t>(cell)] - want) > kFormTol) {
            throw NotACalibrationError(
                "calibration: form does not restrict to sigma's orientation");
        }
    }

    CalibrationReport report;
    if (n + 1 <= cx.top_degree()) {
        for (Index rho = 0; rho < cx.num_cells(n + 1); ++rho) {
            double pairing = 0.0;
            for (const auto& inc : cx.cell_boundary(n + 1, rho)) {
                pairing += static_cast<double>(inc.sign) *
                           omega_unit[static_cast<std::size_t>(inc.face)] *
                           cx.volume(n, inc.face);
            }
            report.d_omega_sup =
                std::max(report.d_omega_sup, std::abs(pairing) / cx.volume(n + 1, rho));
        }
    }
    for (const auto& [cell, coeff] : sigma.coeffs()) {
        report.sigma_pairing += omega_unit[static_cast<std::size_t>(cell)] *
                                static_cast<double>(coeff) * cx.volume(n, cell);
    }
    return report;
}

double linear_deficit_bound(const Chain& sigma, const Integrand& F, double epsilon,
                            Coeff search_bound, FlatCache* cache) {
    if (&F.complex() != &sigma.complex()) {
        throw InvalidDomainError("linear deficit: integrand on a different complex");
    }
    if (F.degree() != sigma.degree()) {
        throw DegreeError("linear deficit: integrand degree mismatch");
    }
    if (!(epsilon > 0.0)) {
        throw InvalidArgumentError("linear deficit: epsilon must be positive");
    }
    if (search_bound < 1) {
        throw InvalidArgumentError("linear deficit: search bound must be at least 1");
    }

    const double f_sigma = F.evaluate(sigma);
    FlatCache local;
    FlatCache* shared = cache ? cache : &local;

    // Only competitors with F(T) < F(sigma) contribute a positive deficit.
    double best = 0.0;
    const auto consider = [&](const Chain& T) {
        if (T == sigma) return;
        const double deficit = f_sigma - F.evaluate(T);
        if (deficit <= 0.0) return;
        const double flat = flat_distance(shared, T - sigma);
        if (flat <= kTieTol || flat > epsilon + 1e-12) return;
        best = std::max(best, deficit / flat);
    };
    for_each_competitor(sigma, F, search_bound, f_sigma + kCapSlack, consider);
    return best;
}

}  // namespace flatstab
