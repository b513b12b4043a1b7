#include "esv/polynomial_map.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "esv/errors.hpp"

namespace esv {

namespace {

constexpr double kHalfPi = 1.5707963267948966;
constexpr double kFactorTol = 1e-12;

// Product of two polynomials in ascending coefficient order.
std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> out(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < q.size(); ++j) {
            out[i + j] += p[i] * q[j];
        }
    }
    return out;
}

std::vector<double> poly_antiderivative(const std::vector<double>& p) {
    std::vector<double> out(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i + 1] = p[i] / static_cast<double>(i + 1);
    }
    return out;
}

std::vector<double> poly_derivative(const std::vector<double>& p) {
    if (p.size() <= 1) return {0.0};
    std::vector<double> out(p.size() - 1, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) {
        out[i - 1] = p[i] * static_cast<double>(i);
    }
    return out;
}

double horner(const std::vector<double>& p, double x) {
    double acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) {
        acc = acc * x + p[i];
    }
    return acc;
}

} // namespace

QuadraticFactor quadratic_from_polar(double xi, double r_hat) {
    if (!(xi >= 0.0 && xi <= kHalfPi)) {
        throw std::domain_error("quadratic_from_polar: xi must lie in [0, pi/2], got " +
                                std::to_string(xi));
    }
    const double bound = std::cos(xi) + std::sin(xi) + std::sqrt(std::max(0.0, std::sin(2.0 * xi)));
    if (!(r_hat >= 0.0 && r_hat <= bound + kFactorTol)) {
        throw std::domain_error("quadratic_from_polar: r_hat must lie in [0, " +
                                std::to_string(bound) + "], got " + std::to_string(r_hat));
    }
    return {r_hat * std::cos(xi), r_hat * std::sin(xi)};
}

bool is_valid_factor(const QuadraticFactor& f) {
    if (f.alpha < -kFactorTol || f.gamma < -kFactorTol) return false;
    const double a = std::max(0.0, f.alpha);
    const double g = std::max(0.0, f.gamma);
    // Polar admissibility r^2 <= a + g + sqrt(2 a g) with r^2 = a^2 + g^2.
    return a * a + g * g <= a + g + std::sqrt(2.0 * a * g) + kFactorTol;
}

double factor_eval(const QuadraticFactor& f, double x) {
    return (0.5 * f.alpha * x + (1.0 - f.alpha - f.gamma)) * x + f.gamma;
}

PolynomialMap::PolynomialMap() : coeffs_{0.0, 1.0}, d1_{1.0}, d2_{0.0} {}

PolynomialMap::PolynomialMap(std::vector<QuadraticFactor> factors)
    : factors_(std::move(factors)) {
    std::vector<double> product{1.0};
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        const auto& f = factors_[i];
        if (!is_valid_factor(f)) {
            throw std::domain_error("PolynomialMap: factor " + std::to_string(i) +
                                    " (alpha=" + std::to_string(f.alpha) +
                                    ", gamma=" + std::to_string(f.gamma) +
                                    ") is not non-negative on [0, inf)");
        }
        product = poly_mul(product, {f.gamma, 1.0 - f.alpha - f.gamma, 0.5 * f.alpha});
    }
    // Drop exact-zero leading coefficients from alpha = 0 factors.
    while (product.size() > 1 && product.back() == 0.0) product.pop_back();
    coeffs_ = poly_antiderivative(product);
    d1_ = product;
    d2_ = poly_derivative(product);
}

double PolynomialMap::operator()(double x) const { return horner(coeffs_, x); }
double PolynomialMap::derivative(double x) const { return horner(d1_, x); }
double PolynomialMap::second_derivative(double x) const { return horner(d2_, x); }

double PolynomialMap::inverse(double s) const {
    if (s < 0.0) {
        throw std::domain_error("PolynomialMap::inverse: price must be >= 0, got " +
                                std::to_string(s));
    }
    if (s == 0.0) return 0.0;

    if (degree() == 1) {
        return s / coeffs_[1];
    }
    if (degree() == 2 && coeffs_[2] > 0.0) {
        // Positive root of c2 x^2 + c1 x = s in a cancellation-free form.
        const double c1 = coeffs_[1];
        const double c2 = coeffs_[2];
        return 2.0 * s / (c1 + std::sqrt(c1 * c1 + 4.0 * c2 * s));
    }

    // Bracket [0, hi] with Phi(hi) >= s, then safeguarded Newton.
    double lo = 0.0;
    double hi = 1.0;
    int grow = 0;
    while ((*this)(hi) < s) {
        hi *= 2.0;
        if (++grow > 200) {
            throw NumericError("PolynomialMap::inverse: failed to bracket " + std::to_string(s));
        }
    }
    const double tol = 1e-12 * std::max(1.0, s);
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = (*this)(x) - s;
        if (std::abs(fx) <= tol) return x;
        if (fx > 0.0) hi = x; else lo = x;
        const double dfx = derivative(x);
        double next = (dfx > 0.0) ? x - fx / dfx : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    throw NumericError("PolynomialMap::inverse: no convergence for s=" + std::to_string(s));
}

PolynomialMap second_order_map(double gamma) {
    return PolynomialMap{{QuadraticFactor{0.0, gamma}}};
}

} // namespace esv
