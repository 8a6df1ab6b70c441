#pragma once

#include <string>
#include <vector>

#include "flatstab/chain_complex.hpp"
#include "flatstab/flat_norm.hpp"
#include "flatstab/integrand.hpp"
#include "flatstab/selection.hpp"

namespace flatstab {

// Version tag stamped into every document ("flatstab-<kind>/<version>") and
// CSV header comment. Bump on any field or column change.
inline constexpr int kFormatVersion = 1;

// Structured-text documents are JSON. Writers are deterministic: keys are
// emitted sorted and numbers use the shortest round-trip decimal form.
// Readers throw ConfigError carrying "<origin>:<line>:<col>" for syntax
// errors and "<origin>:<json path>" for schema violations.

// Vertex coordinate array plus per-degree cell records (vertex indices,
// oriented faces, volume). Reading rebuilds and finalizes the complex, so
// incidence integrity is re-validated on load.
std::string write_complex(const CellComplex& cx);
CellComplex read_complex(const std::string& text, const std::string& origin = "complex");

// Sparse (cell, coefficient) entries of one fixed degree.
std::string write_chain(const Chain& T);
Chain read_chain(const std::string& text, const CellComplex& cx,
                 const std::string& origin = "chain");

// Full weight table (cell, weight_plus, weight_minus) plus the ellipticity
// ratio, which is re-derived on load and must agree with the stored value.
std::string write_integrand(const Integrand& F);
Integrand read_integrand(const std::string& text, const CellComplex& cx,
                         const std::string& origin = "integrand");

// Flat decomposition: value, certification flags, and the two chains.
std::string write_decomposition(const FlatDecomposition& d);
FlatDecomposition read_decomposition(const std::string& text, const CellComplex& cx,
                                     const std::string& origin = "decomposition");

// Record of one penalized minimization cell (write-only diagnostics).
std::string write_minimizer_record(const MinimizerSet& set, double eta, double lambda);

// CSV with a leading "# flatstab-csv/<version> <kind>" comment line and a
// column header row. Cells are raw strings; the caller formats values.
struct CsvTable {
    std::string kind;
    int version = kFormatVersion;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::string write_csv(const CsvTable& table);
CsvTable read_csv(const std::string& text, const std::string& origin = "csv");

// Shortest decimal strings that parse back to the exact same value.
std::string format_double(double x);
std::string format_int(long long x);

// Whole-file helpers; failures throw ConfigError naming the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace flatstab
