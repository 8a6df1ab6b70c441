#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flatstab/builders.hpp"
#include "flatstab/selection.hpp"
#include "flatstab/stability.hpp"

namespace flatstab {

// Declarative experiment description, parsed from a JSON config. A scenario
// fixes one grid complex, one integrand, and a reference chain, then runs the
// configured stages: a penalized (eta, lambda) sweep with almost-minimality
// diagnostics, a stability profile with a quadratic growth fit, and a Jacobi
// spectrum of a straight graph family.

struct ComplexSpec {
    std::vector<int> extent;
    bool triangulated = false;
    std::vector<double> spacing;  // empty = unit
    std::vector<double> origin;   // empty = zero
};

struct SigmaSpec {
    enum class Kind { bottom_row, vertex_path, chain };
    Kind kind = Kind::bottom_row;
    std::vector<std::vector<int>> stations;          // vertex_path
    int degree = 1;                                  // chain
    std::vector<std::pair<Index, Coeff>> entries;    // chain
};

struct IntegrandSpec {
    enum class Kind { area, anisotropic_xy, two_zone, table };
    Kind kind = Kind::area;
    double weight_x = 1.0, weight_y = 1.0;                   // anisotropic_xy
    int axis = 0;                                            // two_zone
    double split = 0.0, low = 1.0, high = 1.0;               // two_zone
    int degree = 1;                                          // table
    std::vector<std::pair<double, double>> rows;             // table: (w+, w-) per cell
};

struct SelectionStageSpec {
    std::optional<SigmaSpec> sigma;    // defaults to the scenario sigma
    bool assert_localization = false;  // requires a strictly decreasing eta grid
};

struct ProfileStageSpec {
    std::optional<SigmaSpec> sigma;
    std::vector<double> eta_bins;
    std::optional<double> epsilon;    // growth-fit window; defaults to scenario epsilon
    std::optional<double> value_cap;  // enumeration cap; empty = exhaustive
};

struct SpectrumStageSpec {
    std::vector<int> start;
    int axis = 0;
    int segments = 1;
    int normal_axis = 1;
    double stability_floor = 1e-8;
};

// Expected values asserted by the summary; absent entries assert nothing.
struct Expectations {
    std::optional<double> f_sigma;
    std::optional<double> lambda0;
    std::optional<double> lambda0_grid;
    std::optional<double> c_fit;
    std::vector<std::pair<double, double>> profile_g;  // (eta bin, expected g)
    std::optional<double> min_eig_pct_of_pi2;          // |min_eig - pi^2| within pct%
    std::optional<int> index;
    std::optional<int> nullity;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    ComplexSpec complex_spec;
    SigmaSpec sigma;
    IntegrandSpec integrand;
    PenaltyKind penalty = PenaltyKind::absolute;
    Coeff search_bound = 1;
    std::vector<double> eta_grid;
    std::vector<double> lambda_grid;
    double epsilon = 1.0;
    double perturb_radius = 0.0;  // 0 = 1.05 * cell diameter
    Coeff perturb_bound = 1;
    std::optional<SelectionStageSpec> selection;
    std::optional<ProfileStageSpec> profile;
    std::optional<SpectrumStageSpec> spectrum;
    Expectations expect;
};

// Parse + validate. Throws ConfigError with origin:line:col (syntax) or
// origin:/json/path (schema) positions.
Scenario parse_scenario(const std::string& text, const std::string& origin);
Scenario load_scenario(const std::string& path);

// One (eta, lambda) cell of the selection sweep. Ball-check reports are
// aggregated over every returned minimizer.
struct SelectionCell {
    double eta = 0.0;
    double lambda = 0.0;
    MinimizerSet set;
    AlmostMinConstants constants;
    bool almost_pass = true;
    bool almost_vacuous = true;
    long long almost_tested = 0;
    bool perturb_pass = true;
    bool perturb_vacuous = true;
    long long perturb_tested = 0;
};

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Owns the complex the recorded chains point into; move-only.
struct ScenarioResult {
    std::string name;
    std::uint64_t seed = 0;
    std::unique_ptr<GridComplex> domain;

    std::optional<Chain> selection_sigma;
    double selection_f_sigma = 0.0;
    std::vector<double> eta_grid;
    std::vector<double> lambda_grid;
    std::vector<SelectionCell> cells;  // row-major: eta outer, lambda inner
    double lambda0 = 0.0;
    double lambda0_grid = 0.0;
    double cell_diameter = 0.0;

    std::optional<Chain> profile_sigma;
    double profile_f_sigma = 0.0;
    std::vector<ProfileBin> bins;
    std::optional<GrowthFit> fit;
    bool sigma_unique_minimizer = false;
    bool strict_minimality = false;
    double profile_epsilon = 0.0;

    std::optional<JacobiSpectrum> spectrum;

    std::vector<Assertion> assertions;
    bool pass = true;
};

struct RunOptions {
    int jobs = 1;
    bool verbose = false;
    // Re-derives every recorded flat value through the enumeration oracle
    // where feasible, and re-verifies the decomposition identity elsewhere.
    bool oracle = false;
};

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

// Writes <out_dir>/<name>/{selection.csv, profile.csv, spectrum.csv,
// summary.json} for the stages present; returns the paths written. Nothing
// is written until the whole bundle is rendered.
std::vector<std::string> write_bundle(const ScenarioResult& result, const std::string& out_dir);

// Plot-ready table from a written bundle: "profile" -> (eta, g) ascending,
// "spectrum" -> (k, eigenvalue), "lambda-sweep" -> (lambda, minimizers,
// sigma_unique) at the smallest recorded eta. Throws AbsentStageError when
// the stage's CSV is missing from the bundle.
std::string emit_plotdata(const std::string& bundle_dir, const std::string& what);

}  // namespace flatstab
