#include "flatstab/integrand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flatstab/errors.hpp"

namespace flatstab {

namespace {

constexpr double kAlignTol = 1e-9;

double euclidean(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

}  // namespace

Integrand::Integrand(const CellComplex& complex, int degree, std::vector<double> weight_plus,
                     std::vector<double> weight_minus)
    : complex_(&complex),
      degree_(degree),
      weight_plus_(std::move(weight_plus)),
      weight_minus_(std::move(weight_minus)) {
    if (degree_ < 0 || degree_ > complex.top_degree()) {
        throw InvalidArgumentError("Integrand: degree out of range");
    }
    const auto count = static_cast<std::size_t>(complex.num_cells(degree_));
    if (weight_plus_.size() != count || weight_minus_.size() != count) {
        throw InvalidArgumentError("Integrand: weight table size mismatch");
    }
    lambda_ = 1.0;
    for (Index i = 0; i < complex.num_cells(degree_); ++i) {
        const double vol = complex.volume(degree_, i);
        for (const double w : {weight_plus_[static_cast<std::size_t>(i)],
                               weight_minus_[static_cast<std::size_t>(i)]}) {
            if (!(w > 0.0)) throw InvalidFunctionalError("Integrand: nonpositive weight");
            const double unit = w / vol;
            lambda_ = std::max({lambda_, unit, 1.0 / unit});
        }
    }
}

Integrand Integrand::area(const CellComplex& complex, int degree) {
    const auto count = static_cast<std::size_t>(complex.num_cells(degree));
    std::vector<double> w(count);
    for (Index i = 0; i < complex.num_cells(degree); ++i) {
        w[static_cast<std::size_t>(i)] = complex.volume(degree, i);
    }
    Integrand out(complex, degree, w, w);
    out.lambda_ = 1.0;  // exact by construction, avoid rounding noise
    return out;
}

Integrand Integrand::anisotropic_xy(const CellComplex& complex, double weight_x, double weight_y) {
    if (complex.ambient_dim() < 2) {
        throw InvalidArgumentError("anisotropic_xy: needs a two-dimensional ambient space");
    }
    const Index count = complex.num_cells(1);
    std::vector<double> w(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        const std::vector<double> tau = orientation_kvector(complex, 1, i);
        const double unit = weight_x * std::abs(tau[0]) + weight_y * std::abs(tau[1]);
        w[static_cast<std::size_t>(i)] = unit * complex.volume(1, i);
    }
    return Integrand(complex, 1, w, w);
}

Integrand Integrand::two_zone(const CellComplex& complex, int degree, int axis, double split,
                              double unit_low, double unit_high) {
    if (axis < 0 || axis >= complex.ambient_dim()) {
        throw InvalidArgumentError("two_zone: axis out of range");
    }
    const Index count = complex.num_cells(degree);
    std::vector<double> w(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        const double coord = complex.barycenter(degree, i)[static_cast<std::size_t>(axis)];
        const double unit = coord < split ? unit_low : unit_high;
        w[static_cast<std::size_t>(i)] = unit * complex.volume(degree, i);
    }
    return Integrand(complex, degree, w, w);
}

Integrand Integrand::from_table(const CellComplex& complex, int degree,
                                std::vector<double> weight_plus,
                                std::vector<double> weight_minus) {
    return Integrand(complex, degree, std::move(weight_plus), std::move(weight_minus));
}

double Integrand::unit_weight_plus(Index cell) const {
    return weight_plus_[static_cast<std::size_t>(cell)] / complex_->volume(degree_, cell);
}

double Integrand::unit_weight_minus(Index cell) const {
    return weight_minus_[static_cast<std::size_t>(cell)] / complex_->volume(degree_, cell);
}

double Integrand::evaluate(const Chain& T) const {
    if (&T.complex() != complex_) {
        throw InvalidDomainError("Integrand::evaluate: chain lives on another complex");
    }
    if (T.degree() != degree_) {
        throw InvalidArgumentError("Integrand::evaluate: degree mismatch");
    }
    double acc = 0.0;
    for (const auto& [cell, coeff] : T.coeffs()) {
        const double w = coeff > 0 ? weight_plus_[static_cast<std::size_t>(cell)]
                                   : weight_minus_[static_cast<std::size_t>(cell)];
        acc += static_cast<double>(std::abs(coeff)) * w;
    }
    return acc;
}

Integrand freeze(const Integrand& F, std::span<const double> x) {
    const CellComplex& X = F.complex();
    const int dim = X.ambient_dim();
    if (static_cast<int>(x.size()) != dim) {
        throw InvalidArgumentError("freeze: point dimension mismatch");
    }
    for (int a = 0; a < dim; ++a) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (Index v = 0; v < X.num_vertices(); ++v) {
            lo = std::min(lo, X.vertex(v)[static_cast<std::size_t>(a)]);
            hi = std::max(hi, X.vertex(v)[static_cast<std::size_t>(a)]);
        }
        if (x[static_cast<std::size_t>(a)] < lo - 1e-12 || x[static_cast<std::size_t>(a)] > hi + 1e-12) {
            throw InvalidArgumentError("freeze: point outside the complex bounding box");
        }
    }

    const int n = F.degree();
    const Index count = X.num_cells(n);
    std::vector<std::vector<double>> kvecs(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) kvecs[static_cast<std::size_t>(i)] = orientation_kvector(X, n, i);

    std::vector<double> w_plus(static_cast<std::size_t>(count));
    std::vector<double> w_minus(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        Index best = -1;
        double best_score = -1.0;
        double best_dist = std::numeric_limits<double>::infinity();
        double best_align = 0.0;
        for (Index j = 0; j < count; ++j) {
            const double a =
                kvector_alignment(kvecs[static_cast<std::size_t>(i)], kvecs[static_cast<std::size_t>(j)]);
            const double score = std::abs(a);
            const double dist = euclidean(X.barycenter(n, j), x);
            const bool better = score > best_score + kAlignTol ||
                                (score > best_score - kAlignTol && dist < best_dist - 1e-12);
            if (better) {
                best = j;
                best_score = std::max(score, best_score);
                best_dist = dist;
                best_align = a;
            }
        }
        const double vol = X.volume(n, i);
        const double up = F.unit_weight_plus(best);
        const double um = F.unit_weight_minus(best);
        if (best_align >= 0.0) {
            w_plus[static_cast<std::size_t>(i)] = up * vol;
            w_minus[static_cast<std::size_t>(i)] = um * vol;
        } else {
            w_plus[static_cast<std::size_t>(i)] = um * vol;
            w_minus[static_cast<std::size_t>(i)] = up * vol;
        }
    }
    return Integrand::from_table(X, n, std::move(w_plus), std::move(w_minus));
}

GFunctional::GFunctional(Integrand base, std::vector<std::vector<double>> f_values, Phi phi,
                         double sup_dphi, const Chain* sigma)
    : base_(std::move(base)), f_values_(std::move(f_values)), phi_(std::move(phi)) {
    if (sup_dphi < 0.0) throw InvalidFunctionalError("GFunctional: negative gradient bound");
    const auto count = static_cast<std::size_t>(base_.complex().num_cells(base_.degree()));
    if (f_values_.size() != count) {
        throw InvalidArgumentError("GFunctional: f table size mismatch");
    }
    std::size_t k = f_values_.empty() ? 0 : f_values_.front().size();
    double sup_f = 0.0;
    for (const auto& row : f_values_) {
        if (row.size() != k) throw InvalidArgumentError("GFunctional: ragged f table");
        double norm2 = 0.0;
        for (double v : row) norm2 += v * v;
        sup_f = std::max(sup_f, std::sqrt(norm2));
    }
    b_ = sup_dphi * sup_f;
    if (b_ >= 1.0) {
        throw InvalidFunctionalError("GFunctional: sup|Dphi| * sup|f| must stay below 1");
    }
    const std::vector<double> zero(k, 0.0);
    if (std::abs(phi_(zero)) > 1e-12) {
        throw InvalidFunctionalError("GFunctional: phi(0) must vanish");
    }
    if (sigma != nullptr) {
        if (&sigma->complex() != &base_.complex() || sigma->degree() != base_.degree()) {
            throw InvalidArgumentError("GFunctional: reference chain mismatch");
        }
        for (const auto& [cell, coeff] : sigma->coeffs()) {
            (void)coeff;
            for (double v : f_values_[static_cast<std::size_t>(cell)]) {
                if (v != 0.0) {
                    throw InvalidFunctionalError(
                        "GFunctional: f must vanish on the reference support");
                }
            }
        }
    }
}

double GFunctional::evaluate(const Chain& T) const {
    const double f_value = base_.evaluate(T);  // also validates complex and degree
    const std::size_t k = f_values_.empty() ? 0 : f_values_.front().size();
    std::vector<double> v(k, 0.0);
    for (const auto& [cell, coeff] : T.coeffs()) {
        const double w = coeff > 0 ? base_.weight_plus(cell) : base_.weight_minus(cell);
        const double m = static_cast<double>(std::abs(coeff)) * w;
        const auto& row = f_values_[static_cast<std::size_t>(cell)];
        for (std::size_t j = 0; j < k; ++j) v[j] += m * row[j];
    }
    return f_value + phi_(v);
}

}  // namespace flatstab
