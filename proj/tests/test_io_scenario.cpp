#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "flatstab/builders.hpp"
#include "flatstab/chain_complex.hpp"
#include "flatstab/errors.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/integrand.hpp"
#include "flatstab/io.hpp"
#include "flatstab/scenario.hpp"

using namespace flatstab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir =
        fs::temp_directory_path() / ("flatstab-io-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kUnitCellConfig = R"({
  "format": "flatstab-scenario/1",
  "name": "unit-cell",
  "seed": 1,
  "complex": {"kind": "grid", "extent": [1, 1]},
  "sigma": {"kind": "bottom-row"},
  "integrand": {"kind": "area"},
  "search_bound": 1,
  "eta_grid": [0.0],
  "lambda_grid": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
  "epsilon": 1.0,
  "perturb_radius": 1.5,
  "stages": [
    {"kind": "selection",
     "sigma": {"kind": "vertex-path", "stations": [[0, 0], [0, 1], [1, 1], [1, 0]]}},
    {"kind": "profile", "eta_bins": [0.0, 1.0]}
  ],
  "expect": {"f_sigma": 3.0, "lambda0": 2.0, "lambda0_grid": 2.5, "c_fit": 2.0,
             "profile_g": [[0.0, 1.0], [1.0, 3.0]]}
})";

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    const std::size_t at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("complexes survive a serialization round trip") {
    const GridComplex grid = build_grid_complex({3, 2}, false, {0.5, 0.25}, {-1.0, 2.0});
    const CellComplex back = read_complex(write_complex(grid.complex));

    REQUIRE(back.num_vertices() == grid.complex.num_vertices());
    REQUIRE(back.top_degree() == grid.complex.top_degree());
    for (int k = 1; k <= back.top_degree(); ++k) {
        REQUIRE(back.num_cells(k) == grid.complex.num_cells(k));
        for (Index i = 0; i < back.num_cells(k); ++i) {
            CHECK(back.volume(k, i) == grid.complex.volume(k, i));
            const auto bv = back.cell_vertices(k, i);
            const auto gv = grid.complex.cell_vertices(k, i);
            CHECK(std::equal(bv.begin(), bv.end(), gv.begin(), gv.end()));
            CHECK(back.cell_boundary(k, i).size() == grid.complex.cell_boundary(k, i).size());
        }
    }
    for (Index v = 0; v < back.num_vertices(); ++v) {
        const auto bc = back.vertex(v);
        const auto gc = grid.complex.vertex(v);
        CHECK(std::equal(bc.begin(), bc.end(), gc.begin(), gc.end()));
    }

    const CellComplex fan = build_fan_complex(7, 2.0);
    const CellComplex fan_back = read_complex(write_complex(fan));
    REQUIRE(fan_back.num_cells(2) == fan.num_cells(2));
    for (Index i = 0; i < fan_back.num_cells(2); ++i) {
        CHECK(fan_back.volume(2, i) == fan.volume(2, i));
    }
}

TEST_CASE("chains and flat decompositions round trip exactly") {
    const GridComplex grid = build_grid_complex({2, 2});
    const Chain sigma = chain_from_vertex_path(grid, {{0, 0}, {1, 0}, {2, 0}});
    const Chain loop = cell_boundary_chain(grid.complex, 2, 0);

    const Chain sigma_back = read_chain(write_chain(sigma), grid.complex);
    CHECK(sigma_back == sigma);

    const FlatDecomposition d = flat_norm(loop);
    const FlatDecomposition d_back = read_decomposition(write_decomposition(d), grid.complex);
    CHECK(d_back.value == d.value);
    CHECK(d_back.S == d.S);
    CHECK(d_back.R == d.R);
    CHECK(d_back.optimal == d.optimal);
    CHECK(d_back.integral == d.integral);
    CHECK(d_back.lower_bound == d.lower_bound);

    CHECK_THROWS_AS(read_chain(R"({"format":"flatstab-chain/1","degree":1,"entries":[[99,1]]})",
                               grid.complex),
                    ConfigError);
    CHECK_THROWS_AS(
        read_chain(R"({"format":"flatstab-chain/1","degree":1,"entries":[[0,1],[0,2]]})",
                   grid.complex),
        ConfigError);
}

TEST_CASE("integrands round trip through their weight tables") {
    const GridComplex grid = build_grid_complex({3, 2}, false, {0.25, 0.25});
    const Integrand F = Integrand::two_zone(grid.complex, 1, 0, 0.5, 1.0, 1.25);
    const Integrand back = read_integrand(write_integrand(F), grid.complex);

    CHECK(back.lambda() == doctest::Approx(F.lambda()).epsilon(1e-12));
    const Chain sigma = chain_from_vertex_path(grid, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    CHECK(back.evaluate(sigma) == doctest::Approx(F.evaluate(sigma)).epsilon(1e-12));
    for (Index i = 0; i < grid.complex.num_cells(1); ++i) {
        CHECK(back.weight_plus(i) == F.weight_plus(i));
        CHECK(back.weight_minus(i) == F.weight_minus(i));
    }

    // A tampered ellipticity ratio no longer matches the re-derived one.
    const std::string tampered =
        replace_once(write_integrand(F), "\"lambda\": 1.25", "\"lambda\": 2.0");
    CHECK_THROWS_AS(read_integrand(tampered, grid.complex), ConfigError);
}

TEST_CASE("syntax errors carry line and column, schema errors carry the json path") {
    const GridComplex grid = build_grid_complex({1, 1});
    try {
        read_chain("{\n  \"format\": \"flatstab-chain/1\",\n  \"degree\": oops\n}",
                   grid.complex, "bad.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.json:3:") != std::string::npos);
    }

    try {
        read_chain(R"({"format":"flatstab-chain/1","degree":1,"entries":[[0,1,7]]})",
                   grid.complex, "bad.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.json:/entries/0") != std::string::npos);
    }

    // Unknown keys are rejected, with the enclosing object named.
    try {
        read_chain(R"({"format":"flatstab-chain/1","degree":1,"entries":[],"extra":0})",
                   grid.complex, "bad.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("bad.json:/") != std::string::npos);
        CHECK(what.find("extra") != std::string::npos);
    }

    CHECK_THROWS_AS(read_chain(R"({"format":"flatstab-chain/2","degree":1,"entries":[]})",
                               grid.complex),
                    ConfigError);
}

TEST_CASE("minimizer records carry the sweep cell and its diagnostics") {
    const GridComplex grid = build_grid_complex({1, 1});
    const Integrand F = Integrand::area(grid.complex, 1);
    const Chain sigma = chain_from_vertex_path(grid, {{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    PenalizedProblem problem{sigma, F, 0.0, 0.5, PenaltyKind::absolute, 1, {}, nullptr};
    const MinimizerSet set = minimize_penalized(problem);

    const std::string text = write_minimizer_record(set, 0.0, 0.5);
    CHECK(text.find("\"format\": \"flatstab-minimizers/1\"") != std::string::npos);
    CHECK(text.find("\"eta\": 0.0,") != std::string::npos);
    CHECK(text.find("\"lambda\": 0.5") != std::string::npos);
    CHECK(text.find("\"flat_distance\": 1.0") != std::string::npos);
    CHECK(text.find("\"searched\": 2") != std::string::npos);
}

TEST_CASE("csv tables round trip and reject malformed headers") {
    CsvTable table;
    table.kind = "demo";
    table.columns = {"a", "b"};
    table.rows = {{format_double(0.1), format_int(-3)},
                  {format_double(2.5e-300), format_int(1LL << 40)}};
    const std::string text = write_csv(table);
    CHECK(text.rfind("# flatstab-csv/1 demo\na,b\n", 0) == 0);

    const CsvTable back = read_csv(text);
    CHECK(back.kind == "demo");
    CHECK(back.version == kFormatVersion);
    CHECK(back.columns == table.columns);
    CHECK(back.rows == table.rows);
    CHECK(std::strtod(back.rows[0][0].c_str(), nullptr) == 0.1);
    CHECK(std::strtod(back.rows[1][0].c_str(), nullptr) == 2.5e-300);

    CHECK_THROWS_AS(read_csv("a,b\n1,2\n"), ConfigError);
    CHECK_THROWS_AS(read_csv("# flatstab-csv/9 demo\na,b\n"), ConfigError);
    CHECK_THROWS_AS(read_csv("# flatstab-csv/1 demo\na,b\n1\n"), ConfigError);
}

TEST_CASE("parse_scenario reads the full unit-cell config") {
    const Scenario sc = parse_scenario(kUnitCellConfig, "unit-cell.json");
    CHECK(sc.name == "unit-cell");
    CHECK(sc.seed == 1);
    CHECK(sc.complex_spec.extent == std::vector<int>{1, 1});
    CHECK(!sc.complex_spec.triangulated);
    CHECK(sc.sigma.kind == SigmaSpec::Kind::bottom_row);
    CHECK(sc.integrand.kind == IntegrandSpec::Kind::area);
    CHECK(sc.search_bound == 1);
    CHECK(sc.lambda_grid.size() == 6);
    CHECK(sc.perturb_radius == 1.5);
    REQUIRE(sc.selection);
    REQUIRE(sc.selection->sigma);
    CHECK(sc.selection->sigma->kind == SigmaSpec::Kind::vertex_path);
    CHECK(sc.selection->sigma->stations.size() == 4);
    REQUIRE(sc.profile);
    CHECK(sc.profile->eta_bins == std::vector<double>{0.0, 1.0});
    CHECK(!sc.spectrum);
    CHECK(sc.expect.f_sigma == 3.0);
    CHECK(sc.expect.lambda0 == 2.0);
    CHECK(sc.expect.profile_g.size() == 2);
}

TEST_CASE("parse_scenario rejects invalid configs with positioned errors") {
    const std::string base = kUnitCellConfig;
    const auto reject = [&](const std::string& text, const char* needle) {
        try {
            parse_scenario(text, "cfg.json");
            FAIL("expected ConfigError for ", needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    reject(replace_once(base, "\"extent\": [1, 1]", "\"extent\": [0, 1]"),
           "/complex/extent/0");
    reject(replace_once(base, "\"lambda_grid\": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]",
                        "\"lambda_grid\": [2.0, 1.0]"),
           "ascending");
    reject(replace_once(base, "\"lambda_grid\": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]",
                        "\"lambda_grid\": [0.0]"),
           "/lambda_grid/0");
    reject(replace_once(base, "\"kind\": \"area\"", "\"kind\": \"volume\""),
           "/integrand/kind");
    reject(replace_once(base, "{\"kind\": \"profile\", \"eta_bins\": [0.0, 1.0]}",
                        "{\"kind\": \"profile\", \"eta_bins\": []}"),
           "eta_bins");
    reject(replace_once(base, "\"name\": \"unit-cell\"", "\"name\": \"a/b\""), "/name");
    reject(replace_once(base, "\"format\": \"flatstab-scenario/1\"",
                        "\"format\": \"flatstab-scenario/3\""),
           "format");

    // Localization demands a strictly decreasing eta grid.
    std::string loc = replace_once(base, "{\"kind\": \"selection\",",
                                   "{\"kind\": \"selection\", \"assert_localization\": true,");
    reject(loc, "eta");

    // Duplicate stages are rejected.
    reject(replace_once(base, "{\"kind\": \"profile\", \"eta_bins\": [0.0, 1.0]}",
                        "{\"kind\": \"profile\", \"eta_bins\": [0.0]}, "
                        "{\"kind\": \"profile\", \"eta_bins\": [1.0]}"),
           "duplicate");
}

TEST_CASE("the unit-cell scenario reproduces its closed-form summary") {
    const Scenario sc = parse_scenario(kUnitCellConfig, "unit-cell.json");
    const ScenarioResult result = run_scenario(sc);

    CHECK(result.pass);
    CHECK(result.selection_f_sigma == 3.0);
    CHECK(result.lambda0 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(result.lambda0_grid == 2.5);
    REQUIRE(result.cells.size() == 6);

    // lambda below lambda0 selects the cheaper competitor, above selects sigma.
    CHECK(result.cells[0].set.minimizers.front().flat_distance == doctest::Approx(1.0));
    CHECK(result.cells[3].set.minimizers.size() == 2);  // exactly at the tie
    CHECK(result.cells[4].set.minimizers.size() == 1);
    CHECK(result.cells[4].set.minimizers.front().flat_distance == 0.0);

    REQUIRE(result.fit);
    CHECK(result.fit->C_fit == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(result.fit->pass);
    CHECK(result.sigma_unique_minimizer);
    CHECK(result.strict_minimality);
    REQUIRE(result.bins.size() == 2);
    CHECK(result.bins[1].g == 3.0);

    for (const Assertion& a : result.assertions) CHECK(a.pass);
    const std::size_t named = result.assertions.size();
    CHECK(named == 10);
}

TEST_CASE("failed expectations flip the exit status but still build a bundle") {
    const std::string text =
        replace_once(kUnitCellConfig, "\"lambda0\": 2.0", "\"lambda0\": 1.75");
    const ScenarioResult result = run_scenario(parse_scenario(text, "cfg.json"));
    CHECK(!result.pass);

    bool saw_failure = false;
    for (const Assertion& a : result.assertions) {
        if (a.name == "expect:lambda0") {
            CHECK(!a.pass);
            CHECK(a.detail.find("got 2") != std::string::npos);
            saw_failure = true;
        }
    }
    CHECK(saw_failure);

    const fs::path dir = fresh_dir("failed-expect");
    const std::vector<std::string> written = write_bundle(result, dir.string());
    CHECK(written.size() == 3);
    for (const std::string& path : written) CHECK(fs::exists(path));
    fs::remove_all(dir);
}

TEST_CASE("bundles are byte-identical across worker counts") {
    const Scenario sc = parse_scenario(kUnitCellConfig, "unit-cell.json");

    RunOptions serial;
    serial.jobs = 1;
    RunOptions parallel;
    parallel.jobs = 4;

    const fs::path dir1 = fresh_dir("jobs1");
    const fs::path dir2 = fresh_dir("jobs4");
    write_bundle(run_scenario(sc, serial), dir1.string());
    write_bundle(run_scenario(sc, parallel), dir2.string());

    for (const char* name : {"selection.csv", "profile.csv", "summary.json"}) {
        const std::string a = read_text_file((dir1 / "unit-cell" / name).string());
        const std::string b = read_text_file((dir2 / "unit-cell" / name).string());
        CHECK(a == b);
        CHECK(!a.empty());
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("the oracle pass re-certifies every recorded flat value") {
    const Scenario sc = parse_scenario(kUnitCellConfig, "unit-cell.json");
    RunOptions options;
    options.oracle = true;
    const ScenarioResult result = run_scenario(sc, options);

    bool saw_oracle = false;
    for (const Assertion& a : result.assertions) {
        if (a.name == "oracle-flat") {
            CHECK(a.pass);
            CHECK(a.detail.find("enumerated") != std::string::npos);
            saw_oracle = true;
        }
    }
    CHECK(saw_oracle);
    CHECK(result.pass);
}

TEST_CASE("emit_plotdata extracts plot tables from a written bundle") {
    const Scenario sc = parse_scenario(kUnitCellConfig, "unit-cell.json");
    const fs::path dir = fresh_dir("plot");
    write_bundle(run_scenario(sc), dir.string());
    const std::string bundle = (dir / "unit-cell").string();

    const CsvTable profile = read_csv(emit_plotdata(bundle, "profile"));
    CHECK(profile.kind == "plot-profile");
    REQUIRE(profile.rows.size() == 2);
    CHECK(profile.rows[0] == std::vector<std::string>{"0", "1"});
    CHECK(profile.rows[1] == std::vector<std::string>{"1", "3"});

    const CsvTable sweep = read_csv(emit_plotdata(bundle, "lambda-sweep"));
    CHECK(sweep.kind == "plot-lambda-sweep");
    REQUIRE(sweep.rows.size() == 6);
    CHECK(sweep.rows[3] == std::vector<std::string>{"2", "2", "0"});
    CHECK(sweep.rows[4] == std::vector<std::string>{"2.5", "1", "1"});
    CHECK(sweep.rows[5] == std::vector<std::string>{"3", "1", "1"});

    CHECK_THROWS_AS(emit_plotdata(bundle, "spectrum"), AbsentStageError);
    CHECK_THROWS_AS(emit_plotdata(bundle, "hexbin"), InvalidArgumentError);
    fs::remove_all(dir);
}

TEST_CASE("load_scenario reports unreadable and malformed files") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/path.json"), ConfigError);

    const fs::path dir = fresh_dir("malformed");
    const fs::path bad = dir / "bad.json";
    write_text_file(bad.string(), "{\"format\": \"flatstab-scenario/1\",\n  \"name\": [}\n");
    try {
        load_scenario(bad.string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(bad.string() + ":2") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("spectrum scenarios populate the spectrum bundle") {
    const char* config = R"({
      "format": "flatstab-scenario/1",
      "name": "segment",
      "complex": {"kind": "grid", "extent": [16, 1],
                  "spacing": [0.0625, 0.0625]},
      "sigma": {"kind": "bottom-row"},
      "integrand": {"kind": "area"},
      "stages": [
        {"kind": "spectrum", "start": [0, 0], "segments": 16}
      ],
      "expect": {"min_eig_pct_of_pi2": 4.0, "index": 0, "nullity": 0}
    })";
    const ScenarioResult result = run_scenario(parse_scenario(config, "segment.json"));
    CHECK(result.pass);
    REQUIRE(result.spectrum);
    CHECK(result.spectrum->eigenvalues.size() == 15);

    const fs::path dir = fresh_dir("spectrum");
    write_bundle(result, dir.string());
    const CsvTable plot = read_csv(emit_plotdata((dir / "segment").string(), "spectrum"));
    CHECK(plot.kind == "plot-spectrum");
    REQUIRE(plot.rows.size() == 15);
    CHECK(plot.rows[0][0] == "1");
    CHECK(std::strtod(plot.rows[0][1].c_str(), nullptr) ==
          doctest::Approx(3.14159265358979 * 3.14159265358979).epsilon(0.04));
    fs::remove_all(dir);
}
