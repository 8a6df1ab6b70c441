#include "flatstab/stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "flatstab/errors.hpp"
#include "flatstab/selection.hpp"

namespace flatstab {

namespace {

constexpr double kQuantTol = 1e-9;
constexpr double kZeroTol = 1e-12;

using ChainKey = std::vector<std::pair<Index, Coeff>>;

ChainKey key_of(const Chain& T) {
    return ChainKey(T.coeffs().begin(), T.coeffs().end());
}

std::vector<double> vertex_point(const CellComplex& cx, Index v) {
    const auto span = cx.vertex(v);
    return std::vector<double>(span.begin(), span.end());
}

double norm2(std::span<const double> v) {
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    return std::sqrt(sq);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// |v + d| - |v| without cancellation.
double length_shift(std::span<const double> v, std::span<const double> d) {
    std::vector<double> sum(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] = v[i] + d[i];
    return (2.0 * dot(v, d) + dot(d, d)) / (norm2(sum) + norm2(v));
}

void validate_family(const GraphFamily& G) {
    if (G.grid == nullptr || G.nodes.size() < 2 || G.cells.size() + 1 != G.nodes.size()) {
        throw InvalidArgumentError("graph family: not built by make_graph_family");
    }
    if (G.normal_dirs.size() != G.nodes.size()) {
        throw InvalidArgumentError("graph family: one normal direction per node required");
    }
    for (const auto& dir : G.normal_dirs) {
        if (dir.size() != static_cast<std::size_t>(G.grid->complex.ambient_dim()) ||
            std::abs(norm2(dir) - 1.0) > kQuantTol) {
            throw InvalidArgumentError("graph family: normal directions must be unit length");
        }
    }
}

void validate_displacements(const GraphFamily& G, std::span<const double> u) {
    if (u.size() != G.nodes.size()) {
        throw InvalidArgumentError("graph family: one displacement per node required");
    }
    if (std::abs(u.front()) > kZeroTol || std::abs(u.back()) > kZeroTol) {
        throw BoundaryConditionError("graph family: boundary nodes must not move");
    }
}

void validate_integrand(const GraphFamily& G, const Integrand& F) {
    if (&F.complex() != &G.grid->complex) {
        throw InvalidDomainError("graph family: integrand on a different complex");
    }
    if (F.degree() != 1) {
        throw DegreeError("graph family: degree-1 integrand required");
    }
}

// Integer layer counts for quantized displacements; rejects off-lattice
// values and rows outside the grid.
std::vector<int> layer_counts(const GraphFamily& G, std::span<const double> u) {
    std::vector<int> k(u.size(), 0);
    const int rows = G.grid->extent[static_cast<std::size_t>(G.normal_axis)];
    const int row0 = G.base[static_cast<std::size_t>(G.normal_axis)];
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double scaled = u[i] / G.layer;
        const int rounded = static_cast<int>(std::llround(scaled));
        if (std::abs(u[i] - static_cast<double>(rounded) * G.layer) >
            kQuantTol * std::max(1.0, G.layer)) {
            throw QuantizationError("graph family: displacement off the amplitude grid");
        }
        if (row0 + rounded < 0 || row0 + rounded > rows) {
            throw QuantizationError("graph family: displacement leaves the grid");
        }
        k[i] = rounded;
    }
    return k;
}

// Positions of the displaced nodes.
std::vector<std::vector<double>> displaced_points(const GraphFamily& G,
                                                  std::span<const double> u) {
    std::vector<std::vector<double>> p(G.nodes.size());
    for (std::size_t i = 0; i < G.nodes.size(); ++i) {
        p[i] = vertex_point(G.grid->complex, G.nodes[i]);
        for (std::size_t d = 0; d < p[i].size(); ++d) p[i][d] += u[i] * G.normal_dirs[i][d];
    }
    return p;
}

// Per-unit weight of each run cell for the +1 traversal orientation.
std::vector<double> run_weights(const GraphFamily& G, const Integrand& F) {
    std::vector<double> w;
    w.reserve(G.cells.size());
    for (const Index cell : G.cells) w.push_back(F.unit_weight_plus(cell));
    return w;
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

}  // namespace

Chain GraphFamily::sigma() const {
    validate_family(*this);
    Chain out(grid->complex, 1);
    for (const Index cell : cells) out.add_coeff(cell, 1);
    return out;
}

GraphFamily make_graph_family(const GridComplex& grid, std::span<const int> start, int axis,
                              int segments, int normal_axis) {
    if (grid.triangulated) {
        throw InvalidDomainError("graph family: box grids only");
    }
    if (grid.num_axes() != 2) {
        throw InvalidDomainError("graph family: two-axis grids only");
    }
    if (axis < 0 || axis > 1 || normal_axis < 0 || normal_axis > 1 || axis == normal_axis) {
        throw InvalidArgumentError("graph family: axis and normal_axis must be distinct in {0, 1}");
    }
    if (segments < 1) {
        throw InvalidArgumentError("graph family: at least one segment required");
    }
    if (start.size() != 2) {
        throw InvalidArgumentError("graph family: start coordinate must have one entry per axis");
    }
    for (int d = 0; d < 2; ++d) {
        const int hi = grid.extent[static_cast<std::size_t>(d)];
        const int reach = start[static_cast<std::size_t>(d)] + (d == axis ? segments : 0);
        if (start[static_cast<std::size_t>(d)] < 0 || reach > hi) {
            throw InvalidArgumentError("graph family: run leaves the grid");
        }
    }

    GraphFamily G;
    G.grid = &grid;
    G.axis = axis;
    G.normal_axis = normal_axis;
    G.base.assign(start.begin(), start.end());
    G.layer = grid.spacing[static_cast<std::size_t>(normal_axis)];

    std::vector<int> coord = G.base;
    for (int i = 0; i <= segments; ++i) {
        coord[static_cast<std::size_t>(axis)] = G.base[static_cast<std::size_t>(axis)] + i;
        G.nodes.push_back(grid.vertex_at(coord));
        if (i < segments) {
            G.cells.push_back(grid.cell_at(1, 1u << axis, coord));
        }
    }

    std::vector<double> normal(2, 0.0);
    normal[static_cast<std::size_t>(normal_axis)] = 1.0;
    G.normal_dirs.assign(G.nodes.size(), normal);

    const int row0 = G.base[static_cast<std::size_t>(normal_axis)];
    const int rows = grid.extent[static_cast<std::size_t>(normal_axis)];
    for (int k = -row0; k <= rows - row0; ++k) {
        G.amplitude_grid.push_back(static_cast<double>(k) * G.layer);
    }
    return G;
}

GraphChain graph_chain(const GraphFamily& G, std::span<const double> u) {
    validate_family(G);
    validate_displacements(G, u);
    for (std::size_t i = 0; i < G.nodes.size(); ++i) {
        std::vector<double> axis_normal(2, 0.0);
        axis_normal[static_cast<std::size_t>(G.normal_axis)] = 1.0;
        if (std::abs(G.normal_dirs[i][0] - axis_normal[0]) > kZeroTol ||
            std::abs(G.normal_dirs[i][1] - axis_normal[1]) > kZeroTol) {
            throw InvalidArgumentError("graph family: staircase embedding needs axis normals");
        }
    }
    const std::vector<int> k = layer_counts(G, u);

    const GridComplex& grid = *G.grid;
    const int col0 = G.base[static_cast<std::size_t>(G.axis)];
    const int row0 = G.base[static_cast<std::size_t>(G.normal_axis)];
    const int segments = static_cast<int>(G.cells.size());

    GraphChain out{Chain(grid.complex, 1), Chain(grid.complex, 2)};
    std::vector<int> coord(2, 0);
    for (int i = 0; i < segments; ++i) {
        // Horizontal edge of segment i at the left node's layer.
        coord[static_cast<std::size_t>(G.axis)] = col0 + i;
        coord[static_cast<std::size_t>(G.normal_axis)] = row0 + k[static_cast<std::size_t>(i)];
        out.chain.add_coeff(grid.cell_at(1, 1u << G.axis, coord), 1);

        // Climb at the right node's column to its layer.
        const int lo = k[static_cast<std::size_t>(i)];
        const int hi = k[static_cast<std::size_t>(i) + 1];
        coord[static_cast<std::size_t>(G.axis)] = col0 + i + 1;
        for (int r = std::min(lo, hi); r < std::max(lo, hi); ++r) {
            coord[static_cast<std::size_t>(G.normal_axis)] = row0 + r;
            out.chain.add_coeff(grid.cell_at(1, 1u << G.normal_axis, coord), hi > lo ? 1 : -1);
        }

        // Region between the segment and sigma: one face per layer crossed.
        coord[static_cast<std::size_t>(G.axis)] = col0 + i;
        const int layers = k[static_cast<std::size_t>(i)];
        for (int r = std::min(layers, 0); r < std::max(layers, 0); ++r) {
            coord[static_cast<std::size_t>(G.normal_axis)] = row0 + r;
            out.witness.add_coeff(grid.cell_at(2, 3u, coord), layers > 0 ? -1 : 1);
        }
    }
    return out;
}

double smooth_value(const GraphFamily& G, const Integrand& F, std::span<const double> u) {
    validate_family(G);
    validate_integrand(G, F);
    validate_displacements(G, u);

    const std::vector<std::vector<double>> p = displaced_points(G, u);
    const std::vector<double> w = run_weights(G, F);
    double total = 0.0;
    for (std::size_t i = 0; i < G.cells.size(); ++i) {
        std::vector<double> diff(p[i].size());
        for (std::size_t d = 0; d < diff.size(); ++d) diff[d] = p[i + 1][d] - p[i][d];
        total += w[i] * norm2(diff);
    }
    return total;
}

JacobiSpectrum second_variation_form(const GraphFamily& G, const Integrand& F,
                                     double stability_floor) {
    validate_family(G);
    validate_integrand(G, F);
    if (!(stability_floor > 0.0)) {
        throw InvalidArgumentError("second variation: stability floor must be positive");
    }
    const int dim = G.interior_nodes();
    if (dim < 1) {
        throw InvalidArgumentError("second variation: no interior nodes");
    }

    const std::vector<double> zeros(G.nodes.size(), 0.0);
    const std::vector<std::vector<double>> p = displaced_points(G, zeros);
    const std::vector<double> w = run_weights(G, F);
    const std::size_t segments = G.cells.size();

    std::vector<std::vector<double>> tangent(segments);
    std::vector<double> h(segments, 0.0);
    for (std::size_t i = 0; i < segments; ++i) {
        tangent[i].resize(p[i].size());
        for (std::size_t d = 0; d < p[i].size(); ++d) tangent[i][d] = p[i + 1][d] - p[i][d];
        h[i] = norm2(tangent[i]);
        for (double& x : tangent[i]) x /= h[i];
    }

    double worst_gradient = 0.0;
    for (int j = 1; j <= dim; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        const double g = w[sj - 1] * dot(tangent[sj - 1], G.normal_dirs[sj]) -
                         w[sj] * dot(tangent[sj], G.normal_dirs[sj]);
        worst_gradient = std::max(worst_gradient, std::abs(g));
    }
    if (worst_gradient > 1e-8) {
        throw NotCriticalError("second variation: run is not critical, max gradient component " +
                               std::to_string(worst_gradient));
    }

    // The step only has to beat the quartic truncation term of the length
    // expansion: the shifts below are cancellation-free, so rounding stays at
    // machine epsilon and the step can sit far below the usual cbrt(eps).
    const double h_fd = 1e-6 * *std::min_element(h.begin(), h.end());
    std::vector<std::vector<double>> Q(static_cast<std::size_t>(dim),
                                       std::vector<double>(static_cast<std::size_t>(dim), 0.0));

    // Per-segment length shifts keep the differences cancellation-free.
    const auto shifted = [&](std::size_t seg, double da, double db) {
        std::vector<double> delta(tangent[seg].size(), 0.0);
        for (std::size_t d = 0; d < delta.size(); ++d) {
            delta[d] = db * G.normal_dirs[seg + 1][d] - da * G.normal_dirs[seg][d];
        }
        std::vector<double> v(tangent[seg].size());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = tangent[seg][d] * h[seg];
        return length_shift(v, delta);
    };
    for (std::size_t i = 0; i < segments; ++i) {
        const bool left_interior = i >= 1;
        const bool right_interior = i + 1 <= static_cast<std::size_t>(dim);
        const double scale = w[i] / (h_fd * h_fd);
        if (left_interior) {
            Q[i - 1][i - 1] += scale * (shifted(i, h_fd, 0.0) + shifted(i, -h_fd, 0.0));
        }
        if (right_interior) {
            Q[i][i] += scale * (shifted(i, 0.0, h_fd) + shifted(i, 0.0, -h_fd));
        }
        if (left_interior && right_interior) {
            const double mixed = (shifted(i, h_fd, h_fd) - shifted(i, h_fd, -h_fd) -
                                  shifted(i, -h_fd, h_fd) + shifted(i, -h_fd, -h_fd)) /
                                 (4.0 * h_fd * h_fd) * w[i];
            Q[i - 1][i] += mixed;
            Q[i][i - 1] += mixed;
        }
    }

    JacobiSpectrum spectrum;
    spectrum.Q = Q;
    spectrum.stability_floor = stability_floor;
    spectrum.node_measure.resize(static_cast<std::size_t>(dim));
    for (int j = 1; j <= dim; ++j) {
        spectrum.node_measure[static_cast<std::size_t>(j - 1)] =
            0.5 * (h[static_cast<std::size_t>(j - 1)] + h[static_cast<std::size_t>(j)]);
    }

    Eigen::MatrixXd N(dim, dim);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            N(r, c) = Q[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] /
                      std::sqrt(spectrum.node_measure[static_cast<std::size_t>(r)] *
                                spectrum.node_measure[static_cast<std::size_t>(c)]);
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(N);
    spectrum.eigenvalues.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + dim);

    const double spectral_norm = std::max(std::abs(spectrum.eigenvalues.front()),
                                          std::abs(spectrum.eigenvalues.back()));
    spectrum.tol = 1e-8 * spectral_norm;
    for (const double lam : spectrum.eigenvalues) {
        if (lam < -spectrum.tol) ++spectrum.index;
        if (std::abs(lam) <= spectrum.tol) ++spectrum.nullity;
    }
    spectrum.strictly_stable = spectrum.eigenvalues.front() >= stability_floor;
    return spectrum;
}

std::vector<ProfileBin> stability_profile(const Chain& sigma, const Integrand& F,
                                          std::span<const double> eta_grid,
                                          const ProfileOptions& options) {
    if (&F.complex() != &sigma.complex()) {
        throw InvalidDomainError("stability profile: integrand on a different complex");
    }
    if (F.degree() != sigma.degree()) {
        throw DegreeError("stability profile: integrand degree mismatch");
    }
    if (sigma.is_zero()) {
        throw InvalidArgumentError("stability profile: sigma must be nonzero");
    }
    if (eta_grid.empty()) {
        throw InvalidArgumentError("stability profile: empty eta grid");
    }
    for (const double eta : eta_grid) {
        if (!(eta >= 0.0) || !std::isfinite(eta)) {
            throw InvalidArgumentError("stability profile: eta values must be finite and >= 0");
        }
    }
    if (!(options.tol_eta >= 0.0)) {
        throw InvalidArgumentError("stability profile: negative bin width");
    }
    if (std::isnan(options.value_cap)) {
        throw InvalidArgumentError("stability profile: value cap must not be NaN");
    }
    if (options.search_bound < 1) {
        throw InvalidArgumentError("stability profile: search bound must be at least 1");
    }

    FlatCache local;
    FlatCache* cache = options.cache ? options.cache : &local;
    const CellComplex& cx = sigma.complex();
    const int n = sigma.degree();

    struct Eval {
        double f;
        double flat;
    };
    std::map<ChainKey, Eval> table;
    const auto evaluate_into = [&](const Chain& T) {
        ChainKey key = key_of(T);
        if (table.find(key) != table.end()) return;
        const Chain diff = T - sigma;
        const double flat = diff.is_zero() ? 0.0 : cache->flat_norm(diff).value;
        table.emplace(std::move(key), Eval{F.evaluate(T), flat});
    };

    const bool enumerated = options.candidates.empty();
    if (enumerated) {
        for_each_competitor(sigma, F, options.search_bound, options.value_cap, evaluate_into);
    } else {
        for (const Chain& T : options.candidates) {
            if (&T.complex() != &cx) {
                throw InvalidDomainError("stability profile: candidate on a different complex");
            }
            if (T.degree() != n) {
                throw DegreeError("stability profile: candidate degree mismatch");
            }
            require_homologous(T, sigma);
            evaluate_into(T);
        }
    }

    std::vector<ProfileBin> bins;
    bins.reserve(eta_grid.size());
    for (const double eta : eta_grid) {
        ProfileBin bin;
        bin.eta = eta;
        for (const auto& [key, eval] : table) {
            if (std::abs(eval.flat - eta) > options.tol_eta + 1e-12) continue;
            if (!bin.attained || eval.f < bin.g) {
                bin.attained = true;
                bin.g = eval.f;
                Chain witness(cx, n);
                for (const auto& [cell, coeff] : key) witness.set_coeff(cell, coeff);
                bin.witness = std::move(witness);
            }
        }
        bin.censored = !bin.attained && enumerated && std::isfinite(options.value_cap);
        bins.push_back(std::move(bin));
    }
    return bins;
}

GrowthFit quadratic_growth_fit(std::span<const ProfileBin> profile, double F_sigma, double eps) {
    if (!(eps > 0.0)) {
        throw InvalidArgumentError("quadratic growth fit: eps must be positive");
    }
    int in_window = 0;
    GrowthFit fit;
    fit.C_fit = std::numeric_limits<double>::infinity();
    for (const ProfileBin& bin : profile) {
        if (!bin.attained || bin.eta > eps + 1e-12) continue;
        ++in_window;
        if (bin.eta <= 1e-12) continue;
        ++fit.bins_used;
        fit.C_fit = std::min(fit.C_fit, (bin.g - F_sigma) / (bin.eta * bin.eta));
    }
    if (in_window < 2) {
        throw InsufficientDataError("quadratic growth fit: needs two attained bins in the window");
    }
    if (fit.bins_used == 0) {
        throw InsufficientDataError("quadratic growth fit: no attained bin with positive eta");
    }
    fit.pass = fit.C_fit > 0.0;
    return fit;
}

NormChainReport norm_chain_check(const GraphFamily& G, std::span<const double> u,
                                 FlatCache* cache) {
    const GraphChain graph = graph_chain(G, u);
    const Chain sigma = G.sigma();

    const std::vector<double> zeros(G.nodes.size(), 0.0);
    const std::vector<std::vector<double>> p = displaced_points(G, zeros);
    std::vector<double> h(G.cells.size(), 0.0);
    for (std::size_t i = 0; i < G.cells.size(); ++i) {
        std::vector<double> diff(p[i].size());
        for (std::size_t d = 0; d < diff.size(); ++d) diff[d] = p[i + 1][d] - p[i][d];
        h[i] = norm2(diff);
    }

    NormChainReport report;
    double length = 0.0;
    for (const double hi : h) length += hi;
    for (std::size_t j = 0; j < G.nodes.size(); ++j) {
        const double left = j > 0 ? h[j - 1] : 0.0;
        const double right = j < h.size() ? h[j] : 0.0;
        const double measure = 0.5 * (left + right);
        report.w12_sq += measure * u[j] * u[j];
        report.l1 += measure * std::abs(u[j]);
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double du = u[i + 1] - u[i];
        report.w12_sq += du * du / h[i];
    }

    const Chain diff = graph.chain - sigma;
    report.flat = diff.is_zero() ? 0.0 : (cache ? cache->flat_norm(diff) : flat_norm(diff)).value;
    report.c0 = 1.0 / length;
    report.c1 = report.flat > 1e-15 ? report.w12_sq / (report.flat * report.flat) : 0.0;
    report.holder_ok = report.w12_sq + 1e-12 >= report.c0 * report.l1 * report.l1;
    report.flat_ok = report.flat <= report.l1 * (1.0 + 1e-9) + 1e-12;
    return report;
}

}  // namespace flatstab
