#include "esv/ou_process.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "esv/errors.hpp"
#include "esv/rng.hpp"

namespace esv {

void validate(const OUParams& p) {
    if (!(p.kappa > 0.0)) {
        throw std::domain_error("OUParams: kappa must be > 0, got " + std::to_string(p.kappa));
    }
    if (!(p.sigma > 0.0)) {
        throw std::domain_error("OUParams: sigma must be > 0, got " + std::to_string(p.sigma));
    }
}

void validate(const MarketParams& m) {
    if (!(m.r >= 0.0)) {
        throw std::domain_error("MarketParams: r must be >= 0, got " + std::to_string(m.r));
    }
}

OUMoments ou_moments(const OUParams& p, double dt, double x_start) {
    if (dt < 0.0) {
        throw std::domain_error("ou_moments: dt must be >= 0, got " + std::to_string(dt));
    }
    const double decay = std::exp(-p.kappa * dt);
    return {x_start * decay + p.theta * (1.0 - decay),
            p.sigma * p.sigma / (2.0 * p.kappa) * (1.0 - decay * decay)};
}

double ou_state_factor(const OUParams& p, double dt) {
    return std::exp(-p.kappa * dt);
}

std::complex<double> ou_char_fn(const OUParams& p, double u, double dt) {
    const double b = std::exp(-p.kappa * dt);
    const double s2 = p.sigma * p.sigma;
    // A = (1/4k)[ (b^2-b) u^2 s^2 + u (b-1)(u s^2 - 4 i k theta) ]
    const std::complex<double> inner(u * s2, -4.0 * p.kappa * p.theta);
    const std::complex<double> A =
        ((b * b - b) * u * u * s2 + u * (b - 1.0) * inner) / (4.0 * p.kappa);
    return std::exp(A);
}

std::complex<double> ou_char_fn_dsigma(const OUParams& p, double u, double dt) {
    const double b = std::exp(-p.kappa * dt);
    const double dA_dsigma = p.sigma * u * u / (2.0 * p.kappa) * (b * b - 1.0);
    return ou_char_fn(p, u, dt) * dA_dsigma;
}

TruncationRange truncation_range(const OUParams& p, double dt_total, double l_bar) {
    validate(p);
    if (!(dt_total > 0.0)) {
        throw std::domain_error("truncation_range: horizon must be > 0");
    }
    const auto m = ou_moments(p, dt_total, p.x0);
    // Gaussian conditional law: kappa4 = 0, so the half width is l_bar * sd.
    const double half = l_bar * std::sqrt(m.variance);
    return {m.mean - half, m.mean + half, l_bar};
}

PathEnsemble simulate_paths(const OUParams& p, std::size_t n_paths,
                            std::vector<double> times, std::uint64_t seed) {
    validate(p);
    if (times.empty()) {
        throw std::invalid_argument("simulate_paths: empty time grid");
    }
    for (std::size_t m = 1; m < times.size(); ++m) {
        if (!(times[m] > times[m - 1])) {
            throw std::invalid_argument("simulate_paths: times must be strictly increasing");
        }
    }

    const std::size_t n_steps = times.size() - 1;
    std::vector<double> decay(n_steps), noise(n_steps);
    for (std::size_t m = 0; m < n_steps; ++m) {
        const auto mom = ou_moments(p, times[m + 1] - times[m], 0.0);
        decay[m] = std::exp(-p.kappa * (times[m + 1] - times[m]));
        noise[m] = std::sqrt(mom.variance);
    }

    PathEnsemble out;
    out.n_paths = n_paths;
    out.times = std::move(times);
    out.seed = seed;
    out.states.resize(n_paths * out.times.size());

    for (std::size_t i = 0; i < n_paths; ++i) {
        rng::NormalStream z(rng::substream_seed(seed, i));
        double x = p.x0;
        out.state(i, 0) = x;
        for (std::size_t m = 0; m < n_steps; ++m) {
            x = p.theta + (x - p.theta) * decay[m] + noise[m] * z.next();
            out.state(i, m + 1) = x;
        }
    }
    return out;
}

} // namespace esv
