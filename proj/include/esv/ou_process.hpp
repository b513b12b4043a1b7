#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace esv {

/// Ornstein-Uhlenbeck parameters for dX = kappa (theta - X) dt + sigma dW.
struct OUParams {
    double kappa = 0.0; ///< mean-reversion rate, > 0
    double theta = 0.0; ///< long-run mean
    double sigma = 0.0; ///< volatility, > 0
    double x0 = 0.0;    ///< initial state
};

/// Throws std::domain_error if kappa <= 0 or sigma <= 0.
void validate(const OUParams& p);

struct MarketParams {
    double r = 0.0; ///< continuously compounded risk-free rate, >= 0
};

void validate(const MarketParams& m);

struct OUMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Conditional mean and variance of X after dt starting from x_start:
/// mean = x_start e^{-kappa dt} + theta (1 - e^{-kappa dt}),
/// variance = sigma^2 / (2 kappa) (1 - e^{-2 kappa dt}).
OUMoments ou_moments(const OUParams& p, double dt, double x_start);

/// State factor beta = e^{-kappa dt}: the conditional characteristic function
/// factorizes as phi(u | dt, x) = e^{i u beta x} phi(u | dt).
double ou_state_factor(const OUParams& p, double dt);

/// The x-independent characteristic factor phi(u | dt) = e^{A(u, dt)} with
/// A = (1/4 kappa) [ (b^2 - b) u^2 sigma^2 + u (b - 1)(u sigma^2 - 4 i kappa theta) ],
/// b = e^{-kappa dt}.
std::complex<double> ou_char_fn(const OUParams& p, double u, double dt);

/// d/d sigma of the full characteristic function divided by the state factor:
/// phi(u | dt) * dA/d sigma with dA/d sigma = (sigma u^2 / 2 kappa)(b^2 - 1).
std::complex<double> ou_char_fn_dsigma(const OUParams& p, double u, double dt);

/// Series truncation interval [kappa1 - L sqrt(kappa2 + sqrt(kappa4)),
/// kappa1 + L sqrt(kappa2 + sqrt(kappa4))] built from the conditional
/// cumulants over dt_total starting at x0. The Gaussian law has kappa4 = 0.
struct TruncationRange {
    double a = 0.0;
    double b = 0.0;
    double l_bar = 0.0;
    double width() const { return b - a; }
};

TruncationRange truncation_range(const OUParams& p, double dt_total, double l_bar);

/// Simulated state paths on a fixed time grid. Row-major storage:
/// state(i, m) is path i at times[m]; state(i, 0) = x0 for every path.
struct PathEnsemble {
    std::size_t n_paths = 0;
    std::vector<double> times;
    std::vector<double> states; // n_paths * times.size()
    std::uint64_t seed = 0;

    double& state(std::size_t path, std::size_t m) {
        return states[path * times.size() + m];
    }
    double state(std::size_t path, std::size_t m) const {
        return states[path * times.size() + m];
    }
};

/// Exact Gaussian transition sampling (no discretization bias). Each path
/// draws from an independent substream of the base seed, so the ensemble is
/// identical for a given (seed, n_paths, times) regardless of how work is
/// partitioned. Requires strictly increasing times.
PathEnsemble simulate_paths(const OUParams& p, std::size_t n_paths,
                            std::vector<double> times, std::uint64_t seed);

} // namespace esv
