// Dense-lattice dynamic program: a brute-force valuation of the storage
// contract that discretizes the state space directly and integrates the
// Gaussian transition density by the trapezoid rule. Independent of the
// Fourier-cosine machinery; used as the small-instance oracle.
#pragma once

#include <cmath>
#include <vector>

#include "esv/contract.hpp"
#include "esv/price_model.hpp"

namespace testsupport {

inline double lattice_dp_value(const esv::ContractSpec& spec, const esv::PriceModel& model,
                               int n_nodes, double l_bar) {
    const int M = spec.time.n_exercise;
    const int L = spec.grid.level_count();
    const double dt = spec.time.dt();
    const double disc = std::exp(-model.market.r * dt);
    const auto range = esv::truncation_range(
        model.ou, spec.time.settlement() - spec.time.t0, l_bar);

    std::vector<double> nodes(n_nodes);
    const double h = range.width() / (n_nodes - 1);
    for (int j = 0; j < n_nodes; ++j) nodes[j] = range.a + j * h;

    std::vector<double> spot(n_nodes);
    for (int j = 0; j < n_nodes; ++j) spot[j] = model.map(nodes[j]);

    struct LevelAction {
        esv::Action action;
        int target;
        double qb;
    };
    std::vector<std::vector<LevelAction>> acts(L);
    for (int e = 0; e < L; ++e) {
        for (const auto& a : esv::allowed_actions(spec, spec.grid.level(e))) {
            acts[e].push_back({a, e + a.steps,
                               esv::is_penalty_free(spec, a) ? 0.0 : spec.q_b_value});
        }
    }

    const auto step_mom = esv::ou_moments(model.ou, dt, 0.0);
    const double sd = std::sqrt(step_mom.variance);
    const double decay = std::exp(-model.ou.kappa * dt);
    const double norm = 1.0 / (sd * std::sqrt(2.0 * 3.141592653589793238462643));

    // One backward continuation sweep: c(x_j, e) for all levels at once.
    auto continuation = [&](const std::vector<std::vector<double>>& v_next, double x,
                            std::vector<double>& out) {
        const double mean = model.ou.theta + (x - model.ou.theta) * decay;
        const int lo = std::max(0, static_cast<int>(std::floor((mean - 12.0 * sd - range.a) / h)));
        const int hi = std::min(n_nodes - 1,
                                static_cast<int>(std::ceil((mean + 12.0 * sd - range.a) / h)));
        std::fill(out.begin(), out.end(), 0.0);
        for (int j = lo; j <= hi; ++j) {
            const double z = (nodes[j] - mean) / sd;
            double w = norm * std::exp(-0.5 * z * z) * h;
            if (j == 0 || j == n_nodes - 1) w *= 0.5;
            for (int e = 0; e < L; ++e) out[e] += w * v_next[e][j];
        }
        for (int e = 0; e < L; ++e) out[e] *= disc;
    };

    // Terminal condition: price-independent settlement penalty.
    std::vector<std::vector<double>> v(L, std::vector<double>(n_nodes));
    for (int e = 0; e < L; ++e) {
        std::fill(v[e].begin(), v[e].end(),
                  esv::settlement_penalty(spec, spec.grid.level(e)));
    }

    std::vector<std::vector<double>> v_prev(L, std::vector<double>(n_nodes));
    std::vector<double> cont(L);
    for (int m = M; m >= 1; --m) {
        std::swap(v_prev, v);
        for (int j = 0; j < n_nodes; ++j) {
            continuation(v_prev, nodes[j], cont);
            for (int e = 0; e < L; ++e) {
                double best = -1e300;
                for (const auto& la : acts[e]) {
                    const double po = la.action.steps > 0 ? -spot[j] / spec.eta * la.action.de
                                    : la.action.steps < 0 ? -spot[j] * la.action.de
                                                          : 0.0;
                    best = std::max(best, po + cont[la.target] + la.qb);
                }
                v[e][j] = best;
            }
        }
    }

    continuation(v, model.ou.x0, cont);
    return cont[spec.grid.index_of(spec.e_start)];
}

} // namespace testsupport
