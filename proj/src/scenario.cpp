#include "flatstab/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "flatstab/errors.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/io.hpp"
#include "json_util.hpp"

namespace flatstab {

namespace {

using jsonutil::json;
using jsonutil::Node;

constexpr double kValueTol = 1e-9;
constexpr double kPi = 3.14159265358979323846;

SigmaSpec parse_sigma(const Node& node) {
    SigmaSpec spec;
    const std::string kind = node.at("kind").as_string();
    if (kind == "bottom-row") {
        node.only_keys({"kind"});
        spec.kind = SigmaSpec::Kind::bottom_row;
    } else if (kind == "vertex-path") {
        node.only_keys({"kind", "stations"});
        spec.kind = SigmaSpec::Kind::vertex_path;
        const Node stations = node.at("stations");
        if (stations.size() < 2) stations.fail_here("need at least two stations");
        for (std::size_t i = 0; i < stations.size(); ++i) {
            const Node st = stations.item(i);
            std::vector<int> coord;
            for (std::size_t d = 0; d < st.size(); ++d) {
                coord.push_back(static_cast<int>(st.item(d).as_int()));
            }
            spec.stations.push_back(std::move(coord));
        }
    } else if (kind == "chain") {
        node.only_keys({"kind", "degree", "entries"});
        spec.kind = SigmaSpec::Kind::chain;
        spec.degree = static_cast<int>(node.at("degree").as_int());
        const Node entries = node.at("entries");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const Node entry = entries.item(i);
            if (entry.size() != 2) entry.fail_here("expected [cell, coefficient]");
            spec.entries.emplace_back(static_cast<Index>(entry.item(0).as_int()),
                                      entry.item(1).as_int());
        }
    } else {
        node.at("kind").fail_here("unknown sigma kind \"" + kind + "\"");
    }
    return spec;
}

IntegrandSpec parse_integrand(const Node& node) {
    IntegrandSpec spec;
    const std::string kind = node.at("kind").as_string();
    if (kind == "area") {
        node.only_keys({"kind"});
        spec.kind = IntegrandSpec::Kind::area;
    } else if (kind == "anisotropic-xy") {
        node.only_keys({"kind", "weight_x", "weight_y"});
        spec.kind = IntegrandSpec::Kind::anisotropic_xy;
        spec.weight_x = node.at("weight_x").as_double();
        spec.weight_y = node.at("weight_y").as_double();
    } else if (kind == "two-zone") {
        node.only_keys({"kind", "axis", "split", "low", "high"});
        spec.kind = IntegrandSpec::Kind::two_zone;
        spec.axis = static_cast<int>(node.at("axis").as_int());
        spec.split = node.at("split").as_double();
        spec.low = node.at("low").as_double();
        spec.high = node.at("high").as_double();
    } else if (kind == "table") {
        node.only_keys({"kind", "degree", "rows"});
        spec.kind = IntegrandSpec::Kind::table;
        spec.degree = static_cast<int>(node.at("degree").as_int());
        const Node rows = node.at("rows");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Node row = rows.item(i);
            if (row.size() != 2) row.fail_here("expected [weight_plus, weight_minus]");
            spec.rows.emplace_back(row.item(0).as_double(), row.item(1).as_double());
        }
    } else {
        node.at("kind").fail_here("unknown integrand kind \"" + kind + "\"");
    }
    return spec;
}

std::vector<double> parse_grid(const Node& node, bool allow_zero) {
    std::vector<double> grid;
    for (std::size_t i = 0; i < node.size(); ++i) {
        const double x = node.item(i).as_double();
        if (!std::isfinite(x) || x < 0.0 || (!allow_zero && x == 0.0)) {
            node.item(i).fail_here(allow_zero ? "expected a finite value >= 0"
                                              : "expected a finite value > 0");
        }
        grid.push_back(x);
    }
    if (grid.empty()) node.fail_here("grid must be nonempty");
    return grid;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    const json doc = jsonutil::parse_document(text, origin);
    const Node node = jsonutil::root(doc, origin);
    jsonutil::check_format(node, "scenario", kFormatVersion);
    node.only_keys({"format", "name", "seed", "complex", "sigma", "integrand", "penalty",
                    "search_bound", "eta_grid", "lambda_grid", "epsilon", "perturb_radius",
                    "perturb_bound", "stages", "expect"});

    Scenario sc;
    sc.name = node.at("name").as_string();
    if (sc.name.empty() || sc.name.find('/') != std::string::npos) {
        node.at("name").fail_here("name must be nonempty and slash-free");
    }
    if (const auto seed = node.maybe("seed")) sc.seed = static_cast<std::uint64_t>(seed->as_int());

    const Node cx = node.at("complex");
    cx.only_keys({"kind", "extent", "triangulated", "spacing", "origin"});
    if (cx.at("kind").as_string() != "grid") cx.at("kind").fail_here("only \"grid\" is supported");
    const Node extent = cx.at("extent");
    for (std::size_t i = 0; i < extent.size(); ++i) {
        const long long e = extent.item(i).as_int();
        if (e < 1) extent.item(i).fail_here("extent must be positive");
        sc.complex_spec.extent.push_back(static_cast<int>(e));
    }
    if (sc.complex_spec.extent.size() < 2 || sc.complex_spec.extent.size() > 3) {
        extent.fail_here("expected 2 or 3 axes");
    }
    if (const auto tri = cx.maybe("triangulated")) sc.complex_spec.triangulated = tri->as_bool();
    if (const auto spacing = cx.maybe("spacing")) {
        if (spacing->size() != sc.complex_spec.extent.size()) {
            spacing->fail_here("spacing length must match extent");
        }
        for (std::size_t i = 0; i < spacing->size(); ++i) {
            const double h = spacing->item(i).as_double();
            if (!(h > 0.0) || !std::isfinite(h)) spacing->item(i).fail_here("spacing must be > 0");
            sc.complex_spec.spacing.push_back(h);
        }
    }
    if (const auto origin_node = cx.maybe("origin")) {
        if (origin_node->size() != sc.complex_spec.extent.size()) {
            origin_node->fail_here("origin length must match extent");
        }
        for (std::size_t i = 0; i < origin_node->size(); ++i) {
            sc.complex_spec.origin.push_back(origin_node->item(i).as_double());
        }
    }

    sc.sigma = parse_sigma(node.at("sigma"));
    sc.integrand = parse_integrand(node.at("integrand"));

    if (const auto penalty = node.maybe("penalty")) {
        const std::string kind = penalty->as_string();
        if (kind == "absolute") {
            sc.penalty = PenaltyKind::absolute;
        } else if (kind == "quadratic") {
            sc.penalty = PenaltyKind::quadratic;
        } else {
            penalty->fail_here("penalty must be \"absolute\" or \"quadratic\"");
        }
    }
    if (const auto bound = node.maybe("search_bound")) {
        sc.search_bound = bound->as_int();
        if (sc.search_bound < 1) bound->fail_here("search_bound must be at least 1");
    }
    if (const auto eps = node.maybe("epsilon")) {
        sc.epsilon = eps->as_double();
        if (!(sc.epsilon > 0.0) || !std::isfinite(sc.epsilon)) {
            eps->fail_here("epsilon must be a finite value > 0");
        }
    }
    if (const auto r = node.maybe("perturb_radius")) {
        sc.perturb_radius = r->as_double();
        if (!(sc.perturb_radius >= 0.0) || !std::isfinite(sc.perturb_radius)) {
            r->fail_here("perturb_radius must be finite and >= 0");
        }
    }
    if (const auto b = node.maybe("perturb_bound")) {
        sc.perturb_bound = b->as_int();
        if (sc.perturb_bound < 1) b->fail_here("perturb_bound must be at least 1");
    }

    const Node stages = node.at("stages");
    if (stages.size() == 0) stages.fail_here("at least one stage is required");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const Node stage = stages.item(i);
        const std::string kind = stage.at("kind").as_string();
        if (kind == "selection") {
            if (sc.selection) stage.fail_here("duplicate selection stage");
            stage.only_keys({"kind", "sigma", "assert_localization"});
            SelectionStageSpec spec;
            if (const auto sg = stage.maybe("sigma")) spec.sigma = parse_sigma(*sg);
            if (const auto loc = stage.maybe("assert_localization")) {
                spec.assert_localization = loc->as_bool();
            }
            sc.selection = std::move(spec);
        } else if (kind == "profile") {
            if (sc.profile) stage.fail_here("duplicate profile stage");
            stage.only_keys({"kind", "sigma", "eta_bins", "epsilon", "value_cap"});
            ProfileStageSpec spec;
            if (const auto sg = stage.maybe("sigma")) spec.sigma = parse_sigma(*sg);
            spec.eta_bins = parse_grid(stage.at("eta_bins"), true);
            if (const auto eps = stage.maybe("epsilon")) {
                spec.epsilon = eps->as_double();
                if (!(*spec.epsilon > 0.0)) eps->fail_here("epsilon must be > 0");
            }
            if (const auto cap = stage.maybe("value_cap")) {
                spec.value_cap = cap->as_double();
                if (!(*spec.value_cap > 0.0)) cap->fail_here("value_cap must be > 0");
            }
            sc.profile = std::move(spec);
        } else if (kind == "spectrum") {
            if (sc.spectrum) stage.fail_here("duplicate spectrum stage");
            stage.only_keys({"kind", "start", "axis", "segments", "normal_axis",
                             "stability_floor"});
            SpectrumStageSpec spec;
            const Node start = stage.at("start");
            for (std::size_t d = 0; d < start.size(); ++d) {
                spec.start.push_back(static_cast<int>(start.item(d).as_int()));
            }
            if (const auto axis = stage.maybe("axis")) spec.axis = static_cast<int>(axis->as_int());
            spec.segments = static_cast<int>(stage.at("segments").as_int());
            if (spec.segments < 1) stage.at("segments").fail_here("segments must be >= 1");
            if (const auto na = stage.maybe("normal_axis")) {
                spec.normal_axis = static_cast<int>(na->as_int());
            }
            if (const auto floor = stage.maybe("stability_floor")) {
                spec.stability_floor = floor->as_double();
                if (!(spec.stability_floor > 0.0)) {
                    floor->fail_here("stability_floor must be > 0");
                }
            }
            sc.spectrum = std::move(spec);
        } else {
            stage.at("kind").fail_here("unknown stage kind \"" + kind + "\"");
        }
    }

    if (sc.selection) {
        sc.eta_grid = parse_grid(node.at("eta_grid"), true);
        sc.lambda_grid = parse_grid(node.at("lambda_grid"), false);
        for (std::size_t i = 1; i < sc.lambda_grid.size(); ++i) {
            if (!(sc.lambda_grid[i] > sc.lambda_grid[i - 1])) {
                node.at("lambda_grid").fail_here("lambda grid must be strictly ascending");
            }
        }
        if (sc.selection->assert_localization) {
            if (sc.eta_grid.size() < 2) {
                node.at("eta_grid").fail_here("localization needs at least two eta values");
            }
            for (std::size_t i = 1; i < sc.eta_grid.size(); ++i) {
                if (!(sc.eta_grid[i] < sc.eta_grid[i - 1])) {
                    node.at("eta_grid").fail_here(
                        "localization needs a strictly decreasing eta grid");
                }
            }
        }
    }

    if (const auto expect = node.maybe("expect")) {
        expect->only_keys({"f_sigma", "lambda0", "lambda0_grid", "c_fit", "profile_g",
                           "min_eig_pct_of_pi2", "index", "nullity"});
        if (const auto v = expect->maybe("f_sigma")) sc.expect.f_sigma = v->as_double();
        if (const auto v = expect->maybe("lambda0")) sc.expect.lambda0 = v->as_double();
        if (const auto v = expect->maybe("lambda0_grid")) sc.expect.lambda0_grid = v->as_double();
        if (const auto v = expect->maybe("c_fit")) sc.expect.c_fit = v->as_double();
        if (const auto v = expect->maybe("profile_g")) {
            for (std::size_t i = 0; i < v->size(); ++i) {
                const Node pair = v->item(i);
                if (pair.size() != 2) pair.fail_here("expected [eta, g]");
                sc.expect.profile_g.emplace_back(pair.item(0).as_double(),
                                                 pair.item(1).as_double());
            }
        }
        if (const auto v = expect->maybe("min_eig_pct_of_pi2")) {
            sc.expect.min_eig_pct_of_pi2 = v->as_double();
        }
        if (const auto v = expect->maybe("index")) sc.expect.index = static_cast<int>(v->as_int());
        if (const auto v = expect->maybe("nullity")) {
            sc.expect.nullity = static_cast<int>(v->as_int());
        }
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    return parse_scenario(read_text_file(path), path);
}

namespace {

Chain build_sigma(const GridComplex& grid, const SigmaSpec& spec) {
    switch (spec.kind) {
        case SigmaSpec::Kind::bottom_row: {
            std::vector<std::vector<int>> stations;
            for (int x = 0; x <= grid.extent[0]; ++x) {
                std::vector<int> coord(static_cast<std::size_t>(grid.num_axes()), 0);
                coord[0] = x;
                stations.push_back(std::move(coord));
            }
            return chain_from_vertex_path(grid, stations);
        }
        case SigmaSpec::Kind::vertex_path:
            return chain_from_vertex_path(grid, spec.stations);
        case SigmaSpec::Kind::chain:
            return chain_from_entries(grid.complex, spec.degree, spec.entries);
    }
    throw InvalidArgumentError("unreachable sigma kind");
}

Integrand build_integrand(const CellComplex& cx, const IntegrandSpec& spec) {
    switch (spec.kind) {
        case IntegrandSpec::Kind::area:
            return Integrand::area(cx, 1);
        case IntegrandSpec::Kind::anisotropic_xy:
            return Integrand::anisotropic_xy(cx, spec.weight_x, spec.weight_y);
        case IntegrandSpec::Kind::two_zone:
            return Integrand::two_zone(cx, 1, spec.axis, spec.split, spec.low, spec.high);
        case IntegrandSpec::Kind::table: {
            std::vector<double> plus;
            std::vector<double> minus;
            plus.reserve(spec.rows.size());
            for (const auto& [p, m] : spec.rows) {
                plus.push_back(p);
                minus.push_back(m);
            }
            return Integrand::from_table(cx, spec.degree, std::move(plus), std::move(minus));
        }
    }
    throw InvalidArgumentError("unreachable integrand kind");
}

template <typename Fn>
void run_pool(std::size_t total, int jobs, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) break;
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                break;
            }
        }
    };
    if (jobs <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(total, 1)));
        pool.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
}

void push_assertion(ScenarioResult& result, std::string name, bool pass, std::string detail) {
    result.pass = result.pass && pass;
    result.assertions.push_back({std::move(name), pass, std::move(detail)});
}

std::string approx_detail(double got, double want) {
    return "got " + format_double(got) + ", want " + format_double(want);
}

bool approx_eq(double got, double want) { return std::abs(got - want) <= kValueTol; }

// Single capped sweep answering both uniqueness questions: is sigma the
// unique F-minimizer of the family, and does every member within the flat
// window cost strictly more.
void minimality_sweep(const Chain& sigma, const Integrand& F, Coeff search_bound, double epsilon,
                      FlatCache& cache, bool& unique, bool& strict) {
    const double f_sigma = F.evaluate(sigma);
    unique = true;
    strict = true;
    for_each_competitor(sigma, F, search_bound, f_sigma + 1e-6, [&](const Chain& T) {
        if (T == sigma) return;
        const double f = F.evaluate(T);
        if (f > f_sigma + kValueTol) return;
        unique = false;
        if (f <= f_sigma + 1e-12 &&
            cache.flat_norm(T - sigma).value <= epsilon + 1e-12) {
            strict = false;
        }
    });
}

void oracle_recheck(ScenarioResult& result, const std::vector<Chain>& diffs) {
    long long enumerated = 0;
    long long identity_only = 0;
    bool pass = true;
    std::string detail;
    for (const Chain& diff : diffs) {
        if (diff.is_zero()) continue;
        FlatOptions options;
        options.cross_check = true;
        try {
            flat_norm(diff, options);
            ++enumerated;
        } catch (const CapacityError&) {
            const FlatDecomposition d = flat_norm(diff);
            const bool identity = (d.S + boundary(d.R)) == diff;
            const bool arithmetic = std::abs(d.value - (mass(d.S) + mass(d.R))) <= 1e-12;
            if (!identity || !arithmetic || !d.integral) {
                pass = false;
                detail = "decomposition identity failed on a capacity-limited instance";
                break;
            }
            ++identity_only;
        } catch (const Error& e) {
            pass = false;
            detail = e.what();
            break;
        }
    }
    if (pass) {
        detail = format_int(enumerated) + " enumerated, " + format_int(identity_only) +
                 " identity-checked";
    }
    push_assertion(result, "oracle-flat", pass, detail);
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options) {
    ScenarioResult result;
    result.name = scenario.name;
    result.seed = scenario.seed;
    result.domain = std::make_unique<GridComplex>(
        build_grid_complex(scenario.complex_spec.extent, scenario.complex_spec.triangulated,
                           scenario.complex_spec.spacing, scenario.complex_spec.origin));
    const GridComplex& grid = *result.domain;
    const Integrand F = build_integrand(grid.complex, scenario.integrand);
    result.cell_diameter = grid.cell_diameter();
    FlatCache cache;

    std::vector<Chain> oracle_diffs;

    if (scenario.selection) {
        try {
            const Chain sigma =
                build_sigma(grid, scenario.selection->sigma.value_or(scenario.sigma));
            result.selection_sigma = sigma;
            result.selection_f_sigma = F.evaluate(sigma);
            result.eta_grid = scenario.eta_grid;
            result.lambda_grid = scenario.lambda_grid;

            const double radius = scenario.perturb_radius > 0.0
                                      ? scenario.perturb_radius
                                      : 1.05 * grid.cell_diameter();
            const std::size_t L = scenario.lambda_grid.size();
            result.cells.resize(scenario.eta_grid.size() * L);
            run_pool(result.cells.size(), options.jobs, [&](std::size_t i) {
                SelectionCell& cell = result.cells[i];
                cell.eta = scenario.eta_grid[i / L];
                cell.lambda = scenario.lambda_grid[i % L];
                PenalizedProblem problem{sigma,          F,
                                         cell.eta,       cell.lambda,
                                         scenario.penalty, scenario.search_bound,
                                         {},             &cache};
                cell.set = minimize_penalized(problem);
                cell.constants =
                    almost_min_constant(cell.lambda, F.lambda(), sigma.degree());
                const double r_alm = cell.constants.r0 * (1.0 - 1e-9);
                for (const MinimizerInfo& m : cell.set.minimizers) {
                    const AlmostMinReport alm = check_almost_minimizing(
                        m.chain, F, cell.constants.C, r_alm, scenario.perturb_bound);
                    cell.almost_pass = cell.almost_pass && alm.pass;
                    cell.almost_vacuous = cell.almost_vacuous && alm.vacuous;
                    cell.almost_tested += alm.tested;
                    const PerturbationReport pert = check_perturbation_inequality(
                        m.chain, F, cell.lambda, radius, scenario.perturb_bound);
                    cell.perturb_pass = cell.perturb_pass && pert.pass;
                    cell.perturb_vacuous = cell.perturb_vacuous && pert.vacuous;
                    cell.perturb_tested += pert.tested;
                }
            });

            result.lambda0 = linear_deficit_bound(sigma, F,
                                                  std::numeric_limits<double>::infinity(),
                                                  scenario.search_bound, &cache);
            result.lambda0_grid = find_lambda0(sigma, F, scenario.search_bound,
                                               scenario.lambda_grid, &cache);

            if (options.oracle) {
                for (const SelectionCell& cell : result.cells) {
                    for (const MinimizerInfo& m : cell.set.minimizers) {
                        oracle_diffs.push_back(m.chain - sigma);
                    }
                }
            }
            if (options.verbose) {
                for (const SelectionCell& cell : result.cells) {
                    std::cout << "[" << scenario.name << "] eta=" << format_double(cell.eta)
                              << " lambda=" << format_double(cell.lambda)
                              << " minimizers=" << cell.set.minimizers.size()
                              << " value=" << format_double(cell.set.value)
                              << " searched=" << cell.set.searched << "\n";
                }
            }
        } catch (const CapacityError& e) {
            throw CapacityError("selection stage: " + std::string(e.what()));
        }
    }

    if (scenario.profile) {
        try {
            const Chain sigma =
                build_sigma(grid, scenario.profile->sigma.value_or(scenario.sigma));
            result.profile_sigma = sigma;
            result.profile_f_sigma = F.evaluate(sigma);
            result.profile_epsilon = scenario.profile->epsilon.value_or(scenario.epsilon);

            ProfileOptions popts;
            popts.search_bound = scenario.search_bound;
            popts.cache = &cache;
            if (scenario.profile->value_cap) popts.value_cap = *scenario.profile->value_cap;
            result.bins = stability_profile(sigma, F, scenario.profile->eta_bins, popts);

            try {
                result.fit = quadratic_growth_fit(result.bins, result.profile_f_sigma,
                                                  result.profile_epsilon);
            } catch (const InsufficientDataError&) {
                result.fit.reset();
            }
            minimality_sweep(sigma, F, scenario.search_bound, result.profile_epsilon, cache,
                             result.sigma_unique_minimizer, result.strict_minimality);

            if (options.oracle) {
                for (const ProfileBin& bin : result.bins) {
                    if (bin.witness) oracle_diffs.push_back(*bin.witness - sigma);
                }
            }
            if (options.verbose) {
                for (const ProfileBin& bin : result.bins) {
                    std::cout << "[" << scenario.name << "] bin eta=" << format_double(bin.eta)
                              << (bin.attained ? " g=" + format_double(bin.g)
                                               : std::string(bin.censored ? " censored"
                                                                          : " empty"))
                              << "\n";
                }
            }
        } catch (const CapacityError& e) {
            throw CapacityError("profile stage: " + std::string(e.what()));
        }
    }

    if (scenario.spectrum) {
        try {
            const GraphFamily family =
                make_graph_family(grid, scenario.spectrum->start, scenario.spectrum->axis,
                                  scenario.spectrum->segments, scenario.spectrum->normal_axis);
            result.spectrum =
                second_variation_form(family, F, scenario.spectrum->stability_floor);
            if (options.verbose) {
                std::cout << "[" << scenario.name
                          << "] spectrum min=" << format_double(result.spectrum->eigenvalues.front())
                          << " index=" << result.spectrum->index
                          << " nullity=" << result.spectrum->nullity << "\n";
            }
        } catch (const CapacityError& e) {
            throw CapacityError("spectrum stage: " + std::string(e.what()));
        }
    }

    // Assertions, in a fixed order so summaries diff cleanly.
    const Expectations& expect = scenario.expect;
    if (expect.f_sigma) {
        const double got =
            scenario.selection ? result.selection_f_sigma : result.profile_f_sigma;
        push_assertion(result, "expect:f-sigma", approx_eq(got, *expect.f_sigma),
                       approx_detail(got, *expect.f_sigma));
    }
    if (scenario.selection) {
        long long almost_bad = 0;
        long long perturb_bad = 0;
        long long almost_tested = 0;
        long long perturb_tested = 0;
        for (const SelectionCell& cell : result.cells) {
            almost_bad += cell.almost_pass ? 0 : 1;
            perturb_bad += cell.perturb_pass ? 0 : 1;
            almost_tested += cell.almost_tested;
            perturb_tested += cell.perturb_tested;
        }
        push_assertion(result, "almost-minimality", almost_bad == 0,
                       format_int(static_cast<long long>(result.cells.size())) + " cells, " +
                           format_int(almost_tested) + " perturbations, " +
                           format_int(almost_bad) + " violations");
        push_assertion(result, "perturbation-inequality", perturb_bad == 0,
                       format_int(static_cast<long long>(result.cells.size())) + " cells, " +
                           format_int(perturb_tested) + " perturbations, " +
                           format_int(perturb_bad) + " violations");
        if (scenario.selection->assert_localization) {
            bool ok = true;
            std::string detail;
            const std::size_t L = result.lambda_grid.size();
            for (std::size_t j = 0; j < L; ++j) {
                double prev = std::numeric_limits<double>::infinity();
                double last = 0.0;
                for (std::size_t i = 0; i < result.eta_grid.size(); ++i) {
                    const double d =
                        result.cells[i * L + j].set.minimizers.front().support_distance;
                    if (d > prev + 1e-12) ok = false;
                    prev = d;
                    last = d;
                }
                if (last > result.cell_diameter + 1e-12) ok = false;
                if (!detail.empty()) detail += "; ";
                detail += "lambda=" + format_double(result.lambda_grid[j]) + " final=" +
                          format_double(last);
            }
            push_assertion(result, "localization", ok, detail);
        }
        if (expect.lambda0) {
            push_assertion(result, "expect:lambda0", approx_eq(result.lambda0, *expect.lambda0),
                           approx_detail(result.lambda0, *expect.lambda0));
        }
        if (expect.lambda0_grid) {
            push_assertion(result, "expect:lambda0-grid",
                           approx_eq(result.lambda0_grid, *expect.lambda0_grid),
                           approx_detail(result.lambda0_grid, *expect.lambda0_grid));
        }
    }
    if (scenario.profile) {
        if (result.sigma_unique_minimizer) {
            push_assertion(result, "growth-positive", result.fit && result.fit->pass,
                           result.fit ? "C_fit = " + format_double(result.fit->C_fit)
                                      : "no usable bins in the window");
            push_assertion(result, "strict-minimality", result.strict_minimality,
                           "window epsilon = " + format_double(result.profile_epsilon));
        }
        if (expect.c_fit) {
            const bool ok = result.fit && approx_eq(result.fit->C_fit, *expect.c_fit);
            push_assertion(result, "expect:c-fit", ok,
                           result.fit ? approx_detail(result.fit->C_fit, *expect.c_fit)
                                      : "no fit");
        }
        for (const auto& [eta, want] : expect.profile_g) {
            const ProfileBin* found = nullptr;
            for (const ProfileBin& bin : result.bins) {
                if (std::abs(bin.eta - eta) <= kValueTol) {
                    found = &bin;
                    break;
                }
            }
            const bool ok = found && found->attained && approx_eq(found->g, want);
            push_assertion(result, "expect:profile-g@" + format_double(eta), ok,
                           found && found->attained ? approx_detail(found->g, want)
                                                    : "bin missing or unattained");
        }
    }
    if (scenario.spectrum && result.spectrum) {
        if (expect.min_eig_pct_of_pi2) {
            const double min_eig = result.spectrum->eigenvalues.front();
            const double budget = *expect.min_eig_pct_of_pi2 / 100.0 * kPi * kPi;
            push_assertion(result, "expect:min-eig", std::abs(min_eig - kPi * kPi) <= budget,
                           "min_eig = " + format_double(min_eig) + ", pi^2 = " +
                               format_double(kPi * kPi));
        }
        if (expect.index) {
            push_assertion(result, "expect:index", result.spectrum->index == *expect.index,
                           "got " + format_int(result.spectrum->index));
        }
        if (expect.nullity) {
            push_assertion(result, "expect:nullity", result.spectrum->nullity == *expect.nullity,
                           "got " + format_int(result.spectrum->nullity));
        }
    }
    if (options.oracle) oracle_recheck(result, oracle_diffs);

    return result;
}

namespace {

std::string render_selection_csv(const ScenarioResult& result) {
    CsvTable table;
    table.kind = "selection";
    table.columns = {"eta",          "lambda",         "searched",      "minimizers",
                     "value",        "f_value",        "flat_distance", "support_distance",
                     "almost_C",     "almost_r0",      "almost_pass",   "almost_vacuous",
                     "almost_tested", "perturb_pass",  "perturb_vacuous", "perturb_tested"};
    for (const SelectionCell& cell : result.cells) {
        const MinimizerInfo& first = cell.set.minimizers.front();
        table.rows.push_back({format_double(cell.eta), format_double(cell.lambda),
                              format_int(cell.set.searched),
                              format_int(static_cast<long long>(cell.set.minimizers.size())),
                              format_double(cell.set.value), format_double(first.f_value),
                              format_double(first.flat_distance),
                              format_double(first.support_distance),
                              format_double(cell.constants.C), format_double(cell.constants.r0),
                              cell.almost_pass ? "1" : "0", cell.almost_vacuous ? "1" : "0",
                              format_int(cell.almost_tested), cell.perturb_pass ? "1" : "0",
                              cell.perturb_vacuous ? "1" : "0",
                              format_int(cell.perturb_tested)});
    }
    return write_csv(table);
}

std::string render_profile_csv(const ScenarioResult& result) {
    CsvTable table;
    table.kind = "profile";
    table.columns = {"eta", "g", "attained", "censored", "witness_cells"};
    for (const ProfileBin& bin : result.bins) {
        table.rows.push_back({format_double(bin.eta),
                              bin.attained ? format_double(bin.g) : "nan",
                              bin.attained ? "1" : "0", bin.censored ? "1" : "0",
                              format_int(bin.witness
                                             ? static_cast<long long>(bin.witness->support_size())
                                             : 0)});
    }
    return write_csv(table);
}

std::string render_spectrum_csv(const ScenarioResult& result) {
    CsvTable table;
    table.kind = "spectrum";
    table.columns = {"k", "eigenvalue"};
    const auto& eigs = result.spectrum->eigenvalues;
    for (std::size_t k = 0; k < eigs.size(); ++k) {
        table.rows.push_back({format_int(static_cast<long long>(k + 1)),
                              format_double(eigs[k])});
    }
    return write_csv(table);
}

json finite_or_null(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

std::string render_summary(const ScenarioResult& result) {
    json assertions = json::array();
    for (const Assertion& a : result.assertions) {
        assertions.push_back(json{{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    }
    json doc{{"format", "flatstab-summary/" + std::to_string(kFormatVersion)},
             {"name", result.name},
             {"seed", result.seed},
             {"pass", result.pass},
             {"assertions", std::move(assertions)}};

    if (result.selection_sigma) {
        long long almost_bad = 0;
        long long perturb_bad = 0;
        for (const SelectionCell& cell : result.cells) {
            almost_bad += cell.almost_pass ? 0 : 1;
            perturb_bad += cell.perturb_pass ? 0 : 1;
        }
        doc["selection"] = json{{"f_sigma", result.selection_f_sigma},
                                {"lambda0", result.lambda0},
                                {"lambda0_grid", finite_or_null(result.lambda0_grid)},
                                {"cells", result.cells.size()},
                                {"almost_violations", almost_bad},
                                {"perturb_violations", perturb_bad},
                                {"cell_diameter", result.cell_diameter}};
    } else {
        doc["selection"] = nullptr;
    }

    if (result.profile_sigma) {
        json g1 = nullptr;
        for (const ProfileBin& bin : result.bins) {
            if (std::abs(bin.eta - 1.0) <= 1e-12 && bin.attained) g1 = bin.g;
        }
        doc["profile"] = json{
            {"f_sigma", result.profile_f_sigma},
            {"epsilon", result.profile_epsilon},
            {"c_fit", result.fit ? json(result.fit->C_fit) : json(nullptr)},
            {"growth_pass", result.fit ? json(result.fit->pass) : json(nullptr)},
            {"bins_used", result.fit ? json(result.fit->bins_used) : json(nullptr)},
            {"g1", std::move(g1)},
            {"sigma_unique_minimizer", result.sigma_unique_minimizer},
            {"strict_minimality", result.strict_minimality}};
    } else {
        doc["profile"] = nullptr;
    }

    if (result.spectrum) {
        doc["spectrum"] = json{{"min_eig", result.spectrum->eigenvalues.front()},
                               {"max_eig", result.spectrum->eigenvalues.back()},
                               {"index", result.spectrum->index},
                               {"nullity", result.spectrum->nullity},
                               {"strictly_stable", result.spectrum->strictly_stable},
                               {"tol", result.spectrum->tol},
                               {"nodes", result.spectrum->eigenvalues.size()}};
    } else {
        doc["spectrum"] = nullptr;
    }
    return doc.dump(2) + "\n";
}

}  // namespace

std::vector<std::string> write_bundle(const ScenarioResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(out_dir) / result.name;

    // Render everything before touching the filesystem: a failed run leaves
    // no partial bundle behind.
    std::vector<std::pair<std::string, std::string>> files;
    if (result.selection_sigma) files.emplace_back("selection.csv", render_selection_csv(result));
    if (result.profile_sigma) files.emplace_back("profile.csv", render_profile_csv(result));
    if (result.spectrum) files.emplace_back("spectrum.csv", render_spectrum_csv(result));
    files.emplace_back("summary.json", render_summary(result));

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError(dir.string() + ": cannot create bundle directory");

    std::vector<std::string> written;
    for (const auto& [name, content] : files) {
        const std::string path = (dir / name).string();
        write_text_file(path, content);
        written.push_back(path);
    }
    return written;
}

std::string emit_plotdata(const std::string& bundle_dir, const std::string& what) {
    namespace fs = std::filesystem;
    const auto load = [&](const char* file) {
        const fs::path path = fs::path(bundle_dir) / file;
        if (!fs::exists(path)) {
            throw AbsentStageError(std::string(file) + " not present in " + bundle_dir);
        }
        return read_csv(read_text_file(path.string()), path.string());
    };

    CsvTable out;
    if (what == "profile") {
        const CsvTable table = load("profile.csv");
        out.kind = "plot-profile";
        out.columns = {"eta", "g"};
        std::vector<std::pair<double, double>> rows;
        for (const auto& row : table.rows) {
            if (row[2] == "1") rows.emplace_back(std::strtod(row[0].c_str(), nullptr),
                                                 std::strtod(row[1].c_str(), nullptr));
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [eta, g] : rows) {
            out.rows.push_back({format_double(eta), format_double(g)});
        }
    } else if (what == "spectrum") {
        const CsvTable table = load("spectrum.csv");
        out.kind = "plot-spectrum";
        out.columns = {"k", "eigenvalue"};
        out.rows = table.rows;
    } else if (what == "lambda-sweep") {
        const CsvTable table = load("selection.csv");
        out.kind = "plot-lambda-sweep";
        out.columns = {"lambda", "minimizers", "sigma_unique"};
        double min_eta = std::numeric_limits<double>::infinity();
        for (const auto& row : table.rows) {
            min_eta = std::min(min_eta, std::strtod(row[0].c_str(), nullptr));
        }
        for (const auto& row : table.rows) {
            if (std::strtod(row[0].c_str(), nullptr) != min_eta) continue;
            const long long minimizers = std::atoll(row[3].c_str());
            const double flat = std::strtod(row[6].c_str(), nullptr);
            const bool unique_sigma = minimizers == 1 && flat == 0.0;
            out.rows.push_back({row[1], row[3], unique_sigma ? "1" : "0"});
        }
    } else {
        throw InvalidArgumentError("plot kind must be profile, spectrum, or lambda-sweep");
    }
    return write_csv(out);
}

}  // namespace flatstab
