#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "flatstab/builders.hpp"
#include "flatstab/chain_complex.hpp"
#include "flatstab/errors.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/integrand.hpp"
#include "flatstab/selection.hpp"

using namespace flatstab;

namespace {

Chain bottom_row(const GridComplex& grid, int length) {
    std::vector<std::vector<int>> stations;
    for (int x = 0; x <= length; ++x) stations.push_back({x, 0});
    return chain_from_vertex_path(grid, stations);
}

Chain unit_cell_long_path(const GridComplex& grid) {
    return chain_from_vertex_path(grid, {{0, 0}, {0, 1}, {1, 1}, {1, 0}});
}

PenalizedProblem prob(const Chain& sigma, const Integrand& F, double eta, double lambda,
                      PenaltyKind kind = PenaltyKind::absolute, Coeff search_bound = 1,
                      FlatCache* cache = nullptr) {
    return PenalizedProblem{sigma, F, eta, lambda, kind, search_bound, {}, cache};
}

bool has_minimizer(const MinimizerSet& found, const Chain& T) {
    for (const auto& info : found.minimizers) {
        if (info.chain == T) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("penalized value reproduces the frozen unit-cell numbers") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);
    const Chain longer = unit_cell_long_path(grid);

    CHECK(penalized_value(prob(sigma, F, 0.0, 1.0), sigma) == doctest::Approx(1.0));
    CHECK(penalized_value(prob(sigma, F, 0.0, 1.0), longer) == doctest::Approx(4.0));
    CHECK(penalized_value(prob(sigma, F, 0.7, 1.0), sigma) == doctest::Approx(1.7));

    const PenalizedProblem quad = prob(sigma, F, 0.7, 2.0, PenaltyKind::quadratic);
    CHECK(penalized_value(quad, sigma) == doctest::Approx(1.0 + 2.0 * 0.49));
    CHECK(penalized_value(quad, longer) == doctest::Approx(3.0 + 2.0 * 0.09));
}

TEST_CASE("penalized value validates its inputs") {
    const GridComplex grid = build_grid_complex({1, 1});
    const GridComplex other = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);

    CHECK_THROWS_AS(penalized_value(prob(sigma, F, -0.1, 1.0), sigma), InvalidArgumentError);
    CHECK_THROWS_AS(penalized_value(prob(sigma, F, 0.0, -1.0), sigma), InvalidArgumentError);
    CHECK_THROWS_AS(
        penalized_value(prob(sigma, F, 0.0, 1.0, PenaltyKind::absolute, 0), sigma),
        InvalidArgumentError);
    CHECK_THROWS_AS(penalized_value(prob(Chain(grid.complex, 1), F, 0.0, 1.0), sigma),
                    InvalidArgumentError);
    CHECK_THROWS_AS(
        penalized_value(
            prob(bottom_row(other, 1), Integrand::area(other.complex, 1), 0.0, 1.0), sigma),
        InvalidDomainError);
    CHECK_THROWS_AS(penalized_value(prob(sigma, F, 0.0, 1.0), Chain(grid.complex, 2)),
                    DegreeError);

    // Same degree, different boundary: the right edge is not comparable.
    const Chain right = chain_from_vertex_path(grid, {{1, 0}, {1, 1}});
    CHECK_THROWS_AS(penalized_value(prob(sigma, F, 0.0, 1.0), right), HomologyError);
    CHECK_THROWS_AS(penalized_value(prob(sigma, F, 0.0, 1.0), Chain(grid.complex, 1)),
                    HomologyError);
}

TEST_CASE("penalized value needs a homologous chain even when boundaries agree") {
    GridComplex grid = build_grid_complex({3, 3});
    const CellComplex punctured = remove_top_cells(grid.complex, {4});
    const Integrand F = Integrand::area(punctured, 1);

    // Cycle around the removed face: closed but no longer a boundary.
    Chain hole(punctured, 1);
    for (const auto& inc : grid.complex.cell_boundary(2, 4)) {
        hole.add_coeff(inc.face, inc.sign);
    }
    CHECK(boundary(hole).is_zero());
    const Chain corner = cell_boundary_chain(punctured, 2, 0);
    CHECK_THROWS_AS(penalized_value(prob(corner, F, 0.0, 1.0), hole), HomologyError);
}

TEST_CASE("threshold between the reference path and the mass minimizer sits at lambda 2") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = unit_cell_long_path(grid);
    const Chain bottom = bottom_row(grid, 1);

    const MinimizerSet low = minimize_penalized(prob(sigma, F, 0.0, 1.0));
    CHECK(low.minimizers.size() == 1);
    CHECK(low.minimizers[0].chain == bottom);
    CHECK(low.value == doctest::Approx(2.0));
    CHECK(low.searched == 2);  // the doubled competitor is pruned by the F cap
    CHECK(low.minimizers[0].f_value == doctest::Approx(1.0));
    CHECK(low.minimizers[0].flat_distance == doctest::Approx(1.0));
    CHECK(low.minimizers[0].support_distance == doctest::Approx(std::sqrt(0.5)));

    const MinimizerSet high = minimize_penalized(prob(sigma, F, 0.0, 3.0));
    CHECK(high.minimizers.size() == 1);
    CHECK(high.minimizers[0].chain == sigma);
    CHECK(high.value == doctest::Approx(3.0));
    CHECK(high.minimizers[0].flat_distance == doctest::Approx(0.0));
    CHECK(high.minimizers[0].support_distance == doctest::Approx(0.0));

    const MinimizerSet tie = minimize_penalized(prob(sigma, F, 0.0, 2.0));
    CHECK(tie.minimizers.size() == 2);
    CHECK(tie.value == doctest::Approx(3.0));
    CHECK(has_minimizer(tie, sigma));
    CHECK(has_minimizer(tie, bottom));
}

TEST_CASE("a large lambda pins a reference that uniquely minimizes mass") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 0.0, 10.0));
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == sigma);
    CHECK(found.value == doctest::Approx(1.0));
    CHECK(found.searched == 1);  // every competitor exceeds the F cap
}

TEST_CASE("lambda zero returns the plain F minimizers of the class") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = unit_cell_long_path(grid);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 0.0, 0.0));
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == bottom_row(grid, 1));
    CHECK(found.value == doctest::Approx(1.0));
}

TEST_CASE("a positive eta pulls the minimizer away from the reference") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 1.0, 10.0));
    CHECK(found.searched == 3);
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == unit_cell_long_path(grid));
    CHECK(found.value == doctest::Approx(3.0));
    CHECK(found.minimizers[0].flat_distance == doctest::Approx(1.0));
}

TEST_CASE("ties at the target distance are all returned with their diagnostics") {
    const GridComplex grid = build_grid_complex({3, 2});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 3);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 1.0, 3.0));
    // sigma, three single bumps, two adjacent double bumps, the full lift:
    // interior verticals cancel, so all of these stay under the F cap.
    CHECK(found.searched == 7);
    CHECK(found.minimizers.size() == 3);
    CHECK(found.value == doctest::Approx(5.0));
    for (int j = 0; j < 3; ++j) {
        const Index face = grid.cell_at(2, 3u, std::vector<int>{j, 0});
        const Chain bump = sigma - cell_boundary_chain(grid.complex, 2, face);
        CHECK(has_minimizer(found, bump));
    }
    for (const auto& info : found.minimizers) {
        CHECK(info.f_value == doctest::Approx(5.0));
        CHECK(info.flat_distance == doctest::Approx(1.0));
        CHECK(info.support_distance == doctest::Approx(1.0));
    }
}

TEST_CASE("explicit candidate lists replace the enumerated family") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);
    const Chain longer = unit_cell_long_path(grid);

    PenalizedProblem problem = prob(sigma, F, 0.0, 1.0);
    problem.candidates = {longer, sigma, longer};
    const MinimizerSet found = minimize_penalized(problem);
    CHECK(found.searched == 2);  // duplicates collapse
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == sigma);

    problem.candidates = {chain_from_vertex_path(grid, {{1, 0}, {1, 1}})};
    CHECK_THROWS_AS(minimize_penalized(problem), HomologyError);
}

TEST_CASE("the family guard trips on wide complexes unless candidates are supplied") {
    const GridComplex grid = build_grid_complex({21, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 21);

    PenalizedProblem problem = prob(sigma, F, 0.0, 1.0);
    CHECK_THROWS_AS(minimize_penalized(problem), CapacityError);
    CHECK_THROWS_AS(linear_deficit_bound(sigma, F, 1.0, 1), CapacityError);

    problem.candidates = {sigma};
    const MinimizerSet found = minimize_penalized(problem);
    CHECK(found.minimizers.size() == 1);
    CHECK(found.value == doctest::Approx(21.0));
}

TEST_CASE("a top-degree reference is alone in its family") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 2);
    Chain sigma(grid.complex, 2);
    sigma.set_coeff(0, 1);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 0.0, 1.0));
    CHECK(found.searched == 1);
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == sigma);
    CHECK(penalized_value(prob(sigma, F, 0.25, 2.0), sigma) == doctest::Approx(1.5));
}

TEST_CASE("shared flat caches make repeated minimization deterministic") {
    const GridComplex grid = build_grid_complex({3, 2});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 3);

    FlatCache cache;
    const PenalizedProblem problem = prob(sigma, F, 1.0, 3.0, PenaltyKind::absolute, 1, &cache);
    const MinimizerSet first = minimize_penalized(problem);
    const std::size_t warm = cache.size();
    const MinimizerSet second = minimize_penalized(problem);
    CHECK(warm > 0);
    CHECK(cache.size() == warm);
    CHECK(first.value == second.value);
    CHECK(first.minimizers.size() == second.minimizers.size());
}

TEST_CASE("find_lambda0 returns the first grid value past the tie threshold") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain longer = unit_cell_long_path(grid);
    const Chain bottom = bottom_row(grid, 1);

    const std::vector<double> grid6 = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    CHECK(find_lambda0(longer, F, 1, grid6) == doctest::Approx(2.5));
    CHECK(find_lambda0(bottom, F, 1, {0.5, 1.0}) == doctest::Approx(0.5));
    CHECK(std::isinf(find_lambda0(longer, F, 1, {0.5, 1.5})));

    CHECK_THROWS_AS(find_lambda0(longer, F, 1, {}), InvalidArgumentError);
    CHECK_THROWS_AS(find_lambda0(longer, F, 1, {1.0, 0.5}), InvalidArgumentError);
}

TEST_CASE("an equal-F competitor at positive flat distance loses for every lambda") {
    const GridComplex grid = build_grid_complex({2, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain corner = chain_from_vertex_path(grid, {{0, 1}, {0, 0}, {1, 0}});
    const Chain across = chain_from_vertex_path(grid, {{0, 1}, {1, 1}, {1, 0}});

    const MinimizerSet flat = minimize_penalized(prob(corner, F, 0.0, 0.0));
    CHECK(flat.minimizers.size() == 2);
    CHECK(has_minimizer(flat, corner));
    CHECK(has_minimizer(flat, across));

    CHECK(find_lambda0(corner, F, 1, {0.25, 0.75}) == doctest::Approx(0.25));
}

TEST_CASE("almost-minimality constants follow the closed form") {
    const AlmostMinConstants a = almost_min_constant(1.0, 1.0, 1);
    CHECK(a.C == doctest::Approx(2.0));
    CHECK(a.r0 == doctest::Approx(0.5));

    const AlmostMinConstants b = almost_min_constant(2.0, 1.0, 1);
    CHECK(b.C == doctest::Approx(4.0));
    CHECK(b.r0 == doctest::Approx(0.25));

    std::mt19937_64 rng(411);
    for (int trial = 0; trial < 10; ++trial) {
        const double lambda = 0.25 + static_cast<double>(rng() % 1000) / 250.0;
        const double Lambda = 1.0 + static_cast<double>(rng() % 1000) / 500.0;
        const int n = static_cast<int>(rng() % 3) + 1;
        const AlmostMinConstants base = almost_min_constant(lambda, Lambda, n);
        const AlmostMinConstants doubled = almost_min_constant(2.0 * lambda, Lambda, n);
        CHECK(doubled.C == doctest::Approx(2.0 * base.C));
        CHECK(doubled.r0 == doctest::Approx(0.5 * base.r0));
    }

    CHECK_THROWS_AS(almost_min_constant(0.0, 1.0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(almost_min_constant(1.0, 0.5, 1), InvalidArgumentError);
    CHECK_THROWS_AS(almost_min_constant(1.0, 1.0, -1), InvalidArgumentError);
}

TEST_CASE("unit-spacing grids admit no perturbation below the flat cutoff") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);

    // Every cycle in reach is a multiple of the cell boundary with flat norm
    // at least 1, so the admissible family is empty.
    const AlmostMinReport wide = check_almost_minimizing(sigma, F, 0.0, 1.5, 1);
    CHECK(wide.vacuous);
    CHECK(wide.pass);
    CHECK(wide.tested == 0);

    const AlmostMinReport tiny = check_almost_minimizing(sigma, F, 2.0, 0.1, 1);
    CHECK(tiny.vacuous);
    CHECK(tiny.pass);
}

TEST_CASE("class minimizers are almost minimizing at every nonnegative constant") {
    const GridComplex grid = build_grid_complex({3, 2}, false, {0.25, 0.25});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 3);

    const AlmostMinReport zero = check_almost_minimizing(sigma, F, 0.0, 0.5, 1);
    CHECK_FALSE(zero.vacuous);
    CHECK(zero.pass);
    CHECK(zero.tested > 0);
    CHECK(zero.worst_margin >= -1e-9);

    // Theoretical constants for lambda = 1 on curves: C = 2, r0 = 0.5.
    const AlmostMinConstants c = almost_min_constant(1.0, F.lambda(), 1);
    const AlmostMinReport scaled = check_almost_minimizing(sigma, F, c.C, c.r0, 1);
    CHECK_FALSE(scaled.vacuous);
    CHECK(scaled.pass);
    CHECK(scaled.worst_margin >= zero.worst_margin);
}

TEST_CASE("a planted bump fails the zero-constant check with the removing cycle") {
    const GridComplex grid = build_grid_complex({3, 3}, false, {1.0 / 3.0, 1.0 / 3.0});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Index mid = grid.cell_at(2, 3u, std::vector<int>{1, 1});
    const Chain bump = cell_boundary_chain(grid.complex, 2, mid);
    const Chain S = bottom_row(grid, 3) + bump;

    const AlmostMinReport report = check_almost_minimizing(S, F, 0.0, 0.5, 1);
    CHECK_FALSE(report.pass);
    CHECK_FALSE(report.vacuous);
    CHECK(report.worst_margin == doctest::Approx(-4.0 / 3.0));
    REQUIRE(report.violator.has_value());
    CHECK(*report.violator == -bump);
    CHECK(report.violator_radius == doctest::Approx(std::sqrt(2.0) / 3.0));

    CHECK_THROWS_AS(check_almost_minimizing(S, F, -1.0, 0.5, 1), InvalidArgumentError);
    CHECK_THROWS_AS(check_almost_minimizing(S, F, 0.0, 0.0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(check_almost_minimizing(S, F, 0.0, 0.5, 0), InvalidArgumentError);
}

TEST_CASE("the perturbation inequality holds for penalized minimizers") {
    const GridComplex unit = build_grid_complex({1, 1});
    const Integrand F1 = Integrand::area(unit.complex, 1);
    const Chain bottom = bottom_row(unit, 1);

    const PerturbationReport direct = check_perturbation_inequality(bottom, F1, 1.0, 1.5, 1);
    CHECK_FALSE(direct.vacuous);
    CHECK(direct.tested == 2);  // both orientations of the cell boundary
    CHECK(direct.pass);
    CHECK(direct.worst_margin == doctest::Approx(3.0));

    const GridComplex dense = build_grid_complex({3, 2}, false, {0.25, 0.25});
    const Integrand F2 = Integrand::area(dense.complex, 1);
    const Chain sigma = bottom_row(dense, 3);
    FlatCache cache;
    for (const double eta : {0.0625, 0.125}) {
        for (const double lambda : {1.0, 2.0}) {
            const MinimizerSet found = minimize_penalized(
                prob(sigma, F2, eta, lambda, PenaltyKind::absolute, 1, &cache));
            for (const auto& info : found.minimizers) {
                const PerturbationReport report =
                    check_perturbation_inequality(info.chain, F2, lambda, 0.36, 1);
                CHECK_FALSE(report.vacuous);
                CHECK(report.pass);
            }
        }
    }

    CHECK_THROWS_AS(check_perturbation_inequality(bottom, F1, -1.0, 1.5, 1),
                    InvalidArgumentError);
}

TEST_CASE("the dense strip problem keeps its frozen minimizer value") {
    const GridComplex grid = build_grid_complex({3, 2}, false, {0.25, 0.25});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 3);

    const MinimizerSet found = minimize_penalized(prob(sigma, F, 0.0625, 1.0));
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == sigma);
    CHECK(found.value == doctest::Approx(0.8125));
}

TEST_CASE("a closed horizontal form certifies the strip reference as mass minimizing") {
    const GridComplex grid = build_grid_complex({4, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 4);

    std::vector<double> omega(static_cast<std::size_t>(grid.complex.num_cells(1)), 0.0);
    for (Index e = 0; e < 8; ++e) omega[static_cast<std::size_t>(e)] = 1.0;  // x-edges first
    const CalibrationReport report = verify_calibration(omega, sigma, F);
    CHECK(report.d_omega_sup == doctest::Approx(0.0));
    CHECK(report.sigma_pairing == doctest::Approx(4.0));

    // Zero derivative certifies a zero deficit; the enumerated class agrees.
    CHECK(linear_deficit_bound(sigma, F, 10.0, 1) == doctest::Approx(0.0));
    const MinimizerSet found = minimize_penalized(prob(sigma, F, 0.0, 0.0));
    CHECK(found.minimizers.size() == 1);
    CHECK(found.minimizers[0].chain == sigma);
    CHECK(found.value == doctest::Approx(4.0));
}

TEST_CASE("every admissible form dominates the enumerated deficit ratio") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain longer = unit_cell_long_path(grid);

    const double deficit = linear_deficit_bound(longer, F, 10.0, 1);
    CHECK(deficit == doctest::Approx(2.0));

    std::mt19937_64 rng(6408);
    for (int trial = 0; trial < 20; ++trial) {
        const double w0 = -1.0 + 2.0 * static_cast<double>(rng() % 10001) / 10000.0;
        // Pinned to the long path's orientation: +1 on top and left, -1 on
        // the right edge; the free bottom value spans the admissible range.
        const std::vector<double> omega = {w0, 1.0, 1.0, -1.0};
        const CalibrationReport report = verify_calibration(omega, longer, F);
        CHECK(report.d_omega_sup == doctest::Approx(3.0 - w0));
        CHECK(report.d_omega_sup >= deficit - 1e-9);
    }
}

TEST_CASE("calibration rejects inadmissible or mismatched forms") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = bottom_row(grid, 1);

    CHECK_THROWS_AS(verify_calibration({1.2, 0.0, 0.0, 0.0}, sigma, F), NotACalibrationError);
    CHECK_THROWS_AS(verify_calibration({-1.0, 0.0, 0.0, 0.0}, sigma, F), NotACalibrationError);
    CHECK_THROWS_AS(verify_calibration({1.0, 0.0, 0.0}, sigma, F), InvalidArgumentError);
    CHECK_THROWS_AS(verify_calibration({1.0, 0.0, 0.0, 0.0}, sigma,
                                       Integrand::two_zone(grid.complex, 1, 0, 0.5, 0.5, 2.0)),
                    InvalidArgumentError);
    CHECK(verify_calibration({1.0, 0.5, -0.5, 0.25}, sigma, F).d_omega_sup ==
          doctest::Approx(1.25));
}

TEST_CASE("linear deficit bounds respect the sampling window") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain longer = unit_cell_long_path(grid);
    const Chain bottom = bottom_row(grid, 1);

    CHECK(linear_deficit_bound(longer, F, 10.0, 1) == doctest::Approx(2.0));
    CHECK(linear_deficit_bound(longer, F, 0.5, 1) == doctest::Approx(0.0));
    CHECK(linear_deficit_bound(bottom, F, 10.0, 1) == doctest::Approx(0.0));

    CHECK_THROWS_AS(linear_deficit_bound(longer, F, 0.0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(linear_deficit_bound(longer, F, 1.0, 0), InvalidArgumentError);
}
