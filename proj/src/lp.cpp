#include "flatstab/lp.hpp"

#include <cmath>
#include <limits>

#include "flatstab/errors.hpp"

namespace flatstab::lp {

namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kCostEps = 1e-9;
constexpr double kFeasEps = 1e-7;

struct Tableau {
    Eigen::MatrixXd body;     // m x ncols
    Eigen::VectorXd rhs;      // m, kept >= 0
    Eigen::VectorXd cost;     // reduced costs, ncols
    double obj = 0.0;         // current objective of the active cost row
    std::vector<int> basis;   // column index per row
    std::vector<char> alive;  // redundant rows are retired, not erased

    void pivot(int row, int col) {
        const double piv = body(row, col);
        body.row(row) /= piv;
        rhs(row) /= piv;
        for (int i = 0; i < body.rows(); ++i) {
            if (i == row) continue;
            const double f = body(i, col);
            if (f == 0.0) continue;
            body.row(i) -= f * body.row(row);
            rhs(i) -= f * rhs(row);
        }
        const double fc = cost(col);
        if (fc != 0.0) {
            cost -= fc * body.row(row).transpose();
            obj += fc * rhs(row);
        }
        basis[static_cast<std::size_t>(row)] = col;
    }
};

// Reduced costs and objective for raw costs `raw` under the current basis.
void install_cost_row(Tableau& tab, const Eigen::VectorXd& raw) {
    tab.cost = raw;
    tab.obj = 0.0;
    for (std::size_t r = 0; r < tab.basis.size(); ++r) {
        if (!tab.alive[r]) continue;
        const double cb = raw(tab.basis[r]);
        if (cb == 0.0) continue;
        tab.cost -= cb * tab.body.row(static_cast<int>(r)).transpose();
        tab.obj += cb * tab.rhs(static_cast<int>(r));
    }
}

int entering_column(const Tableau& tab, int limit, bool bland) {
    int best = -1;
    double best_cost = -kCostEps;
    for (int j = 0; j < limit; ++j) {
        const double cj = tab.cost(j);
        if (cj >= -kCostEps) continue;
        if (bland) return j;
        if (cj < best_cost) {
            best_cost = cj;
            best = j;
        }
    }
    return best;
}

int leaving_row(const Tableau& tab, int col) {
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < tab.body.rows(); ++i) {
        if (!tab.alive[static_cast<std::size_t>(i)]) continue;
        const double a = tab.body(i, col);
        if (a <= kPivotEps) continue;
        const double ratio = tab.rhs(i) / a;
        if (ratio < best_ratio - kPivotEps ||
            (ratio < best_ratio + kPivotEps && best >= 0 &&
             tab.basis[static_cast<std::size_t>(i)] < tab.basis[static_cast<std::size_t>(best)])) {
            best_ratio = std::min(ratio, best_ratio);
            best = i;
        }
    }
    return best;
}

// Returns false on unboundedness. `limit` excludes artificial columns in
// phase 2; phase 1 cannot be unbounded because its objective is >= 0.
bool run_simplex(Tableau& tab, int limit, int& iterations) {
    const int m = static_cast<int>(tab.body.rows());
    const int bland_after = 50 * (m + limit);
    const int hard_cap = 1000 + 200 * (m + limit);
    for (;;) {
        const bool bland = iterations > bland_after;
        const int col = entering_column(tab, limit, bland);
        if (col < 0) return true;
        const int row = leaving_row(tab, col);
        if (row < 0) return false;
        tab.pivot(row, col);
        if (++iterations > hard_cap) throw Error("simplex iteration cap exceeded");
    }
}

}  // namespace

Result minimize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                const std::vector<int>* basis_hint) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    if (b.size() != m || c.size() != n) throw InvalidArgumentError("lp::minimize: shape mismatch");

    Result res;
    res.x = Eigen::VectorXd::Zero(n);
    if (m == 0) {
        // Only x = 0 is sensible without constraints given c >= 0 callers;
        // negative costs would be unbounded.
        for (int j = 0; j < n; ++j) {
            if (c(j) < -kCostEps) {
                res.status = Status::Unbounded;
                return res;
            }
        }
        res.status = Status::Optimal;
        return res;
    }

    Tableau tab;
    tab.alive.assign(static_cast<std::size_t>(m), 1);
    tab.basis.resize(static_cast<std::size_t>(m));

    bool hinted = false;
    if (basis_hint != nullptr && static_cast<int>(basis_hint->size()) == m) {
        hinted = true;
        for (int r = 0; r < m; ++r) {
            const int col = (*basis_hint)[static_cast<std::size_t>(r)];
            if (col < 0 || col >= n || std::abs(A(r, col)) <= kPivotEps) {
                hinted = false;
                break;
            }
        }
        if (hinted) {
            tab.body = A;
            tab.rhs = b;
            for (int r = 0; r < m && hinted; ++r) {
                const int col = (*basis_hint)[static_cast<std::size_t>(r)];
                tab.basis[static_cast<std::size_t>(r)] = col;
                const double piv = tab.body(r, col);
                if (std::abs(piv) <= kPivotEps) {
                    hinted = false;  // earlier eliminations degenerated this pivot
                    break;
                }
                tab.body.row(r) /= piv;
                tab.rhs(r) /= piv;
                for (int i = 0; i < m; ++i) {
                    if (i == r) continue;
                    const double f = tab.body(i, col);
                    if (f == 0.0) continue;
                    tab.body.row(i) -= f * tab.body.row(r);
                    tab.rhs(i) -= f * tab.rhs(r);
                }
            }
            for (int r = 0; r < m; ++r) {
                if (tab.rhs(r) < -kPivotEps) {
                    hinted = false;  // hint not primal feasible, fall back
                    break;
                }
                if (tab.rhs(r) < 0.0) tab.rhs(r) = 0.0;
            }
        }
    }

    int iterations = 0;
    if (!hinted) {
        // Phase 1 with one artificial per row.
        tab.body.resize(m, n + m);
        tab.body.leftCols(n) = A;
        tab.body.rightCols(m) = Eigen::MatrixXd::Identity(m, m);
        tab.rhs = b;
        for (int r = 0; r < m; ++r) {
            if (tab.rhs(r) < 0.0) {
                tab.body.row(r) = -tab.body.row(r);
                tab.rhs(r) = -tab.rhs(r);
            }
            tab.basis[static_cast<std::size_t>(r)] = n + r;
        }
        Eigen::VectorXd phase1(n + m);
        phase1.setZero();
        phase1.tail(m).setOnes();
        install_cost_row(tab, phase1);
        run_simplex(tab, n + m, iterations);
        if (tab.obj > kFeasEps) {
            res.status = Status::Infeasible;
            res.iterations = iterations;
            return res;
        }
        // Drive artificials out of the basis; rows that resist are redundant.
        for (int r = 0; r < m; ++r) {
            if (tab.basis[static_cast<std::size_t>(r)] < n) continue;
            int col = -1;
            for (int j = 0; j < n; ++j) {
                if (std::abs(tab.body(r, j)) > kPivotEps) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) {
                tab.pivot(r, col);
            } else {
                tab.alive[static_cast<std::size_t>(r)] = 0;
            }
        }
    }

    Eigen::VectorXd phase2(tab.body.cols());
    phase2.setZero();
    phase2.head(n) = c;
    install_cost_row(tab, phase2);
    if (!run_simplex(tab, n, iterations)) {
        res.status = Status::Unbounded;
        res.iterations = iterations;
        return res;
    }

    for (std::size_t r = 0; r < tab.basis.size(); ++r) {
        if (!tab.alive[r]) continue;
        const int col = tab.basis[r];
        if (col < n) res.x(col) = tab.rhs(static_cast<int>(r));
    }
    res.status = Status::Optimal;
    res.objective = c.dot(res.x);
    res.iterations = iterations;
    return res;
}

}  // namespace flatstab::lp
