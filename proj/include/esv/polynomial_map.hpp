#pragma once

#include <vector>

namespace esv {

/// One normalized non-negative quadratic q(x) = (alpha/2) x^2 + (1-alpha-gamma) x + gamma.
/// The admissible (alpha, gamma) region is the image of the polar parametrization
/// alpha = r cos(xi), gamma = r sin(xi) with xi in [0, pi/2] and
/// r in [0, cos(xi) + sin(xi) + sqrt(sin(2 xi))], which keeps q non-negative
/// on [0, inf). Every such quadratic integrates to 1 against exp(-x) on [0, inf).
struct QuadraticFactor {
    double alpha = 0.0;
    double gamma = 0.0;
};

/// Builds a factor from polar coordinates; throws std::domain_error when
/// (xi, r_hat) falls outside the admissible region.
QuadraticFactor quadratic_from_polar(double xi, double r_hat);

/// True when (alpha, gamma) lies in the admissible region (within a small
/// floating-point tolerance).
bool is_valid_factor(const QuadraticFactor& f);

/// Evaluates q(x) for the factor.
double factor_eval(const QuadraticFactor& f, double x);

/// Increasing polynomial price map S = Phi(X).
///
/// Phi is the antiderivative, vanishing at 0, of a product of quadratic
/// factors; with K factors of nonzero alpha the degree is 2K+1, and alpha = 0
/// factors lower the degree. Phi(0) = 0 and Phi'(x) >= 0 on [0, inf) by
/// construction. The default-constructed map is the identity Phi(x) = x
/// (empty product).
class PolynomialMap {
public:
    PolynomialMap();
    explicit PolynomialMap(std::vector<QuadraticFactor> factors);

    double operator()(double x) const;        ///< Phi(x)
    double derivative(double x) const;        ///< Phi'(x)
    double second_derivative(double x) const; ///< Phi''(x)

    /// Solves Phi(x) = s for x >= 0 to |Phi(x)-s| <= 1e-12 * max(1, s).
    /// Closed form for degree <= 2, safeguarded bisection/Newton otherwise.
    /// Throws std::domain_error for s < 0, NumericError on non-convergence.
    double inverse(double s) const;

    /// Coefficients of Phi in the monomial basis (1, x, x^2, ...), ascending.
    const std::vector<double>& coefficients() const { return coeffs_; }
    const std::vector<QuadraticFactor>& factors() const { return factors_; }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

private:
    std::vector<QuadraticFactor> factors_;
    std::vector<double> coeffs_;   // Phi
    std::vector<double> d1_;       // Phi'
    std::vector<double> d2_;       // Phi''
};

/// Convenience constructor for the quadratic family
/// Phi(x) = ((1-gamma)/2) x^2 + gamma x, i.e. a single factor (0, gamma).
PolynomialMap second_order_map(double gamma);

} // namespace esv
