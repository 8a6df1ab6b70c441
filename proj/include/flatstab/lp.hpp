#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flatstab::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
    Status status = Status::Infeasible;
    double objective = 0.0;
    Eigen::VectorXd x;
    int iterations = 0;
};

// Minimize c·x subject to A x = b, x >= 0, by a dense two-phase primal
// simplex. Deterministic: Dantzig pivoting with index tie-breaks, switching
// to Bland's rule after 50(m+n) iterations to rule out cycling. basis_hint
// optionally names one column per row that already forms a feasible basis
// (skips phase 1); it is ignored if the hinted basis is not primal feasible.
Result minimize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                const std::vector<int>* basis_hint = nullptr);

}  // namespace flatstab::lp
