#include "flatstab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json_util.hpp"

namespace flatstab {

namespace {

using jsonutil::json;
using jsonutil::Node;

std::string tag(const char* kind) {
    return std::string("flatstab-") + kind + "/" + std::to_string(kFormatVersion);
}

json chain_to_json(const Chain& T) {
    json entries = json::array();
    for (const auto& [cell, coeff] : T.coeffs()) {
        entries.push_back(json::array({cell, coeff}));
    }
    return json{{"degree", T.degree()}, {"entries", std::move(entries)}};
}

Chain chain_from_node(const Node& node, const CellComplex& cx) {
    node.only_keys({"format", "degree", "entries"});
    const long long degree = node.at("degree").as_int();
    if (degree < 0 || degree > cx.top_degree()) {
        node.at("degree").fail_here("degree outside the complex");
    }
    Chain T(cx, static_cast<int>(degree));
    const Node entries = node.at("entries");
    const Index count = cx.num_cells(static_cast<int>(degree));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Node entry = entries.item(i);
        if (entry.size() != 2) entry.fail_here("expected [cell, coefficient]");
        const long long cell = entry.item(0).as_int();
        const long long coeff = entry.item(1).as_int();
        if (cell < 0 || cell >= count) entry.item(0).fail_here("cell index out of range");
        if (T.coeff(static_cast<Index>(cell)) != 0) {
            entry.item(0).fail_here("duplicate cell index");
        }
        T.set_coeff(static_cast<Index>(cell), coeff);
    }
    return T;
}

}  // namespace

std::string write_complex(const CellComplex& cx) {
    json vertices = json::array();
    for (Index v = 0; v < cx.num_vertices(); ++v) {
        const auto p = cx.vertex(v);
        vertices.push_back(json(std::vector<double>(p.begin(), p.end())));
    }
    json degrees = json::array();
    for (int k = 1; k <= cx.top_degree(); ++k) {
        json items = json::array();
        for (Index i = 0; i < cx.num_cells(k); ++i) {
            const auto verts = cx.cell_vertices(k, i);
            json faces = json::array();
            for (const auto& inc : cx.cell_boundary(k, i)) {
                faces.push_back(json::array({inc.face, static_cast<int>(inc.sign)}));
            }
            items.push_back(json{{"vertices", std::vector<Index>(verts.begin(), verts.end())},
                                 {"faces", std::move(faces)},
                                 {"volume", cx.volume(k, i)}});
        }
        degrees.push_back(json{{"degree", k}, {"items", std::move(items)}});
    }
    const json doc{{"format", tag("complex")},
                   {"ambient_dim", cx.ambient_dim()},
                   {"vertices", std::move(vertices)},
                   {"cells", std::move(degrees)}};
    return doc.dump(2) + "\n";
}

CellComplex read_complex(const std::string& text, const std::string& origin) {
    const json doc = jsonutil::parse_document(text, origin);
    const Node node = jsonutil::root(doc, origin);
    jsonutil::check_format(node, "complex", kFormatVersion);
    node.only_keys({"format", "ambient_dim", "vertices", "cells"});

    const long long ambient = node.at("ambient_dim").as_int();
    if (ambient < 1 || ambient > 16) node.at("ambient_dim").fail_here("ambient_dim out of range");
    CellComplex cx(static_cast<int>(ambient));

    const Node vertices = node.at("vertices");
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        const Node coords = vertices.item(v);
        if (coords.size() != static_cast<std::size_t>(ambient)) {
            coords.fail_here("coordinate count differs from ambient_dim");
        }
        std::vector<double> p;
        for (std::size_t d = 0; d < coords.size(); ++d) p.push_back(coords.item(d).as_double());
        cx.add_vertex(std::move(p));
    }

    const Node degrees = node.at("cells");
    for (std::size_t b = 0; b < degrees.size(); ++b) {
        const Node block = degrees.item(b);
        block.only_keys({"degree", "items"});
        const long long k = block.at("degree").as_int();
        if (k != static_cast<long long>(b) + 1) {
            block.at("degree").fail_here("degree blocks must ascend from 1 without gaps");
        }
        const Node items = block.at("items");
        for (std::size_t i = 0; i < items.size(); ++i) {
            const Node cell = items.item(i);
            cell.only_keys({"vertices", "faces", "volume"});
            std::vector<Index> verts;
            const Node vlist = cell.at("vertices");
            for (std::size_t v = 0; v < vlist.size(); ++v) {
                verts.push_back(static_cast<Index>(vlist.item(v).as_int()));
            }
            std::vector<IncidenceEntry> faces;
            const Node flist = cell.at("faces");
            for (std::size_t f = 0; f < flist.size(); ++f) {
                const Node pair = flist.item(f);
                if (pair.size() != 2) pair.fail_here("expected [face, sign]");
                const long long face = pair.item(0).as_int();
                const long long sign = pair.item(1).as_int();
                if (sign != 1 && sign != -1) pair.item(1).fail_here("sign must be +1 or -1");
                faces.push_back({static_cast<Index>(face), static_cast<std::int8_t>(sign)});
            }
            const double volume = cell.at("volume").as_double();
            try {
                cx.add_cell(static_cast<int>(k), std::move(verts), std::move(faces), volume);
            } catch (const Error& e) {
                cell.fail_here(e.what());
            }
        }
    }
    try {
        cx.finalize();
    } catch (const Error& e) {
        node.fail_here(e.what());
    }
    return cx;
}

std::string write_chain(const Chain& T) {
    json doc = chain_to_json(T);
    doc["format"] = tag("chain");
    return doc.dump(2) + "\n";
}

Chain read_chain(const std::string& text, const CellComplex& cx, const std::string& origin) {
    const json doc = jsonutil::parse_document(text, origin);
    const Node node = jsonutil::root(doc, origin);
    jsonutil::check_format(node, "chain", kFormatVersion);
    return chain_from_node(node, cx);
}

std::string write_integrand(const Integrand& F) {
    json rows = json::array();
    for (Index i = 0; i < F.complex().num_cells(F.degree()); ++i) {
        rows.push_back(json::array({i, F.weight_plus(i), F.weight_minus(i)}));
    }
    const json doc{{"format", tag("integrand")},
                   {"degree", F.degree()},
                   {"lambda", F.lambda()},
                   {"weights", std::move(rows)}};
    return doc.dump(2) + "\n";
}

Integrand read_integrand(const std::string& text, const CellComplex& cx,
                         const std::string& origin) {
    const json doc = jsonutil::parse_document(text, origin);
    const Node node = jsonutil::root(doc, origin);
    jsonutil::check_format(node, "integrand", kFormatVersion);
    node.only_keys({"format", "degree", "lambda", "weights"});

    const long long degree = node.at("degree").as_int();
    if (degree < 1 || degree > cx.top_degree()) {
        node.at("degree").fail_here("degree outside the complex");
    }
    const Index count = cx.num_cells(static_cast<int>(degree));
    const Node rows = node.at("weights");
    if (rows.size() != static_cast<std::size_t>(count)) {
        rows.fail_here("expected one row per degree-" + std::to_string(degree) + " cell");
    }
    std::vector<double> plus(static_cast<std::size_t>(count));
    std::vector<double> minus(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Node row = rows.item(i);
        if (row.size() != 3) row.fail_here("expected [cell, weight_plus, weight_minus]");
        const long long cell = row.item(0).as_int();
        if (cell != static_cast<long long>(i)) {
            row.item(0).fail_here("rows must list cells 0..N-1 in order");
        }
        plus[i] = row.item(1).as_double();
        minus[i] = row.item(2).as_double();
    }
    Integrand F = [&] {
        try {
            return Integrand::from_table(cx, static_cast<int>(degree), std::move(plus),
                                         std::move(minus));
        } catch (const Error& e) {
            rows.fail_here(e.what());
        }
    }();
    const double stored = node.at("lambda").as_double();
    if (std::abs(stored - F.lambda()) > 1e-9 * std::max(1.0, std::abs(stored))) {
        node.at("lambda").fail_here("stored lambda disagrees with the weight table");
    }
    return F;
}

std::string write_decomposition(const FlatDecomposition& d) {
    const json doc{{"format", tag("flat")},
                   {"value", d.value},
                   {"lower_bound", d.lower_bound},
                   {"optimal", d.optimal},
                   {"integral", d.integral},
                   {"S", chain_to_json(d.S)},
                   {"R", chain_to_json(d.R)}};
    return doc.dump(2) + "\n";
}

FlatDecomposition read_decomposition(const std::string& text, const CellComplex& cx,
                                     const std::string& origin) {
    const json doc = jsonutil::parse_document(text, origin);
    const Node node = jsonutil::root(doc, origin);
    jsonutil::check_format(node, "flat", kFormatVersion);
    node.only_keys({"format", "value", "lower_bound", "optimal", "integral", "S", "R"});
    FlatDecomposition d{chain_from_node(node.at("S"), cx), chain_from_node(node.at("R"), cx),
                        node.at("value").as_double(), node.at("optimal").as_bool(),
                        node.at("integral").as_bool(), node.at("lower_bound").as_double()};
    if (d.R.degree() != d.S.degree() + 1) {
        node.at("R").fail_here("filling degree must exceed the residual degree by one");
    }
    return d;
}

std::string write_minimizer_record(const MinimizerSet& set, double eta, double lambda) {
    json list = json::array();
    for (const MinimizerInfo& m : set.minimizers) {
        json entry = chain_to_json(m.chain);
        entry["value"] = m.value;
        entry["f_value"] = m.f_value;
        entry["flat_distance"] = m.flat_distance;
        entry["support_distance"] = m.support_distance;
        list.push_back(std::move(entry));
    }
    const json doc{{"format", tag("minimizers")}, {"eta", eta},
                   {"lambda", lambda},           {"value", set.value},
                   {"searched", set.searched},   {"minimizers", std::move(list)}};
    return doc.dump(2) + "\n";
}

std::string write_csv(const CsvTable& table) {
    std::string out = "# flatstab-csv/" + std::to_string(table.version) + " " + table.kind + "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += row[c];
        }
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (const char ch : line) {
        if (ch == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

}  // namespace

CsvTable read_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    CsvTable table;

    if (!std::getline(in, line)) throw ConfigError(origin + ":1:1: empty document");
    ++lineno;
    const std::string prefix = "# flatstab-csv/";
    if (line.rfind(prefix, 0) != 0) {
        throw ConfigError(origin + ":1:1: missing \"" + prefix + "<version> <kind>\" header");
    }
    std::size_t pos = prefix.size();
    std::size_t space = line.find(' ', pos);
    if (space == std::string::npos) {
        throw ConfigError(origin + ":1:1: header missing the table kind");
    }
    table.version = std::atoi(line.substr(pos, space - pos).c_str());
    if (table.version != kFormatVersion) {
        throw ConfigError(origin + ":1:1: unsupported csv version " +
                          line.substr(pos, space - pos));
    }
    table.kind = line.substr(space + 1);
    if (table.kind.empty()) throw ConfigError(origin + ":1:1: empty table kind");

    if (!std::getline(in, line)) throw ConfigError(origin + ":2:1: missing column header");
    ++lineno;
    table.columns = split_csv_line(line);

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.columns.size()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ":1: expected " + std::to_string(table.columns.size()) +
                              " cells, got " + std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_int(long long x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ConfigError(path + ": read failed");
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw ConfigError(path + ": write failed");
}

}  // namespace flatstab
