#include "esv/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "esv/errors.hpp"
#include "esv/rng.hpp"

namespace esv {

namespace {

// Degree <= 3 regression of y on a standardized regressor z, solved through
// the normal equations. The Gram matrix depends only on z, so one
// factorization serves every energy level at a given date.
struct RegressionBasis {
    int degree = 0;           // effective degree after conditioning checks
    double mean = 0.0;        // regressor standardization
    double scale = 1.0;
    std::vector<double> z;    // standardized regressor per path
    std::vector<double> gram; // lower-triangular Cholesky factor, (d+1)^2
    bool degenerate = false;  // constant regressor, mean-only fit

    int n_coeffs() const { return degree + 1; }
};

bool cholesky_lower(std::vector<double>& a, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (int k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& chol, int n, std::vector<double>& b) {
    for (int i = 0; i < n; ++i) {
        double sum = b[i];
        for (int k = 0; k < i; ++k) sum -= chol[i * n + k] * b[k];
        b[i] = sum / chol[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double sum = b[i];
        for (int k = i + 1; k < n; ++k) sum -= chol[k * n + i] * b[k];
        b[i] = sum / chol[i * n + i];
    }
}

RegressionBasis make_basis(const std::vector<double>& regressor, int degree) {
    RegressionBasis basis;
    const std::size_t n = regressor.size();
    double mean = 0.0;
    for (double v : regressor) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : regressor) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    basis.mean = mean;
    basis.scale = std::sqrt(var);

    if (!(basis.scale > 1e-12 * std::max(1.0, std::abs(mean)))) {
        basis.degenerate = true;
        basis.degree = 0;
        basis.scale = 1.0;
        basis.z.assign(n, 0.0);
        basis.gram = {std::sqrt(static_cast<double>(n))};
        return basis;
    }

    basis.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) basis.z[i] = (regressor[i] - mean) / basis.scale;

    for (int d = degree; d >= 0; --d) {
        const int nc = d + 1;
        std::vector<double> moments(2 * d + 1, 0.0);
        for (double z : basis.z) {
            double p = 1.0;
            for (int q = 0; q <= 2 * d; ++q) {
                moments[q] += p;
                p *= z;
            }
        }
        std::vector<double> gram(static_cast<std::size_t>(nc) * nc);
        for (int i = 0; i < nc; ++i) {
            for (int j = 0; j < nc; ++j) gram[i * nc + j] = moments[i + j];
        }
        if (cholesky_lower(gram, nc)) {
            basis.degree = d;
            basis.gram = std::move(gram);
            if (d < degree) basis.degenerate = true;
            return basis;
        }
    }
    basis.degenerate = true;
    basis.degree = 0;
    basis.gram = {std::sqrt(static_cast<double>(n))};
    return basis;
}

std::vector<double> fit(const RegressionBasis& basis, const std::vector<double>& y) {
    const int nc = basis.n_coeffs();
    std::vector<double> rhs(nc, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double p = 1.0;
        for (int q = 0; q < nc; ++q) {
            rhs[q] += y[i] * p;
            p *= basis.z[i];
        }
    }
    cholesky_solve(basis.gram, nc, rhs);
    return rhs;
}

inline double predict(const std::vector<double>& coeffs, double z) {
    double acc = 0.0;
    for (std::size_t q = coeffs.size(); q-- > 0;) acc = acc * z + coeffs[q];
    return acc;
}

struct PolicyAccumulator {
    std::vector<double> sum, sum_sq, min_v, max_v;
    std::vector<std::map<int, std::uint64_t>> action_counts; // index m-1, m = 1..M
    std::size_t n = 0;
    std::uint64_t full_at_settlement = 0;
    int top_level = 0;

    void init(std::size_t n_times, int m_exercise, int top) {
        sum.assign(n_times, 0.0);
        sum_sq.assign(n_times, 0.0);
        min_v.assign(n_times, 1e300);
        max_v.assign(n_times, -1e300);
        action_counts.assign(m_exercise, {});
        top_level = top;
    }
};

} // namespace

LsmcRun lsmc_value(const ContractSpec& spec, const PriceModel& model,
                   const LsmcConfig& config, std::uint64_t run_seed,
                   PolicyStatistics* policy) {
    const auto report = validate_spec(spec);
    if (!report.ok()) {
        std::string msg = "contract validation failed";
        for (const auto& e : report.errors) msg += "; " + e;
        throw std::invalid_argument(msg);
    }
    validate(model.ou);
    validate(model.market);
    if (config.n_paths < 100) {
        throw std::invalid_argument("LsmcConfig: n_paths must be >= 100");
    }
    if (config.basis_degree < 1) {
        throw std::invalid_argument("LsmcConfig: basis_degree must be >= 1");
    }

    const int M = spec.time.n_exercise;
    const int L = spec.grid.level_count();
    const std::size_t n_paths = config.n_paths;
    const double dt = spec.time.dt();
    const double disc = std::exp(-model.market.r * dt);

    std::vector<double> times(M + 2);
    for (int m = 0; m <= M + 1; ++m) times[m] = spec.time.time_at(m);
    const auto paths = simulate_paths(model.ou, n_paths, times, run_seed);

    // Spot prices per (date, path).
    std::vector<std::vector<double>> spot(M + 2, std::vector<double>(n_paths));
    for (int m = 0; m <= M + 1; ++m) {
        for (std::size_t i = 0; i < n_paths; ++i) {
            spot[m][i] = model.map(paths.state(i, m));
        }
    }

    struct LevelAction {
        Action action;
        int target;
        double qb;
    };
    std::vector<std::vector<LevelAction>> acts(L);
    for (int j = 0; j < L; ++j) {
        for (const auto& a : allowed_actions(spec, spec.grid.level(j))) {
            acts[j].push_back({a, j + a.steps, is_penalty_free(spec, a) ? 0.0 : spec.q_b_value});
        }
    }

    std::vector<double> q_s(L);
    for (int j = 0; j < L; ++j) q_s[j] = settlement_penalty(spec, spec.grid.level(j));

    // Accumulated realized cash flows per (level, path), rolled backward.
    std::vector<std::vector<double>> acf(L), acf_next(L, std::vector<double>(n_paths));
    for (int j = 0; j < L; ++j) acf_next[j].assign(n_paths, q_s[j]);
    acf = acf_next;

    // Chosen action (in steps) per (date, level, path), for the policy replay.
    std::vector<std::int8_t> decisions;
    if (policy != nullptr) {
        decisions.assign(static_cast<std::size_t>(M) * L * n_paths, 0);
    }

    // Fitted regressions, kept for the out-of-sample replay: per date the
    // standardization of the regressor and per level the coefficients.
    struct DateFit {
        double mean = 0.0;
        double scale = 1.0;
        std::vector<std::vector<double>> coeffs; // per level
    };
    std::vector<DateFit> fits(config.out_of_sample ? M + 1 : 0);

    std::vector<std::vector<double>> reg_coeffs(L);
    std::vector<double> dacf(n_paths);
    std::vector<std::vector<double>> cv(L, std::vector<double>(n_paths));
    bool fallback = false;

    for (int m = M; m >= 1; --m) {
        std::swap(acf, acf_next); // acf_next now holds date m+1 values
        const auto basis = make_basis(spot[m], config.basis_degree);
        fallback = fallback || basis.degenerate;

        for (int j = 0; j < L; ++j) {
            for (std::size_t i = 0; i < n_paths; ++i) dacf[i] = disc * acf_next[j][i];
            reg_coeffs[j] = fit(basis, dacf);
            for (std::size_t i = 0; i < n_paths; ++i) {
                cv[j][i] = predict(reg_coeffs[j], basis.z[i]);
            }
        }
        if (config.out_of_sample) {
            fits[m].mean = basis.mean;
            fits[m].scale = basis.scale;
            fits[m].coeffs = reg_coeffs;
        }

        for (int j = 0; j < L; ++j) {
            const auto& actions = acts[j];
            auto& out = acf[j];
            for (std::size_t i = 0; i < n_paths; ++i) {
                const double s = spot[m][i];
                int arg = 0;
                double top = -1e300;
                for (std::size_t r = 0; r < actions.size(); ++r) {
                    const auto& la = actions[r];
                    const double po = la.action.steps > 0 ? -s / spec.eta * la.action.de
                                    : la.action.steps < 0 ? -s * la.action.de
                                                          : 0.0;
                    const double h = po + cv[la.target][i] + la.qb;
                    if (h > top ||
                        (h == top && std::abs(la.action.steps) < std::abs(actions[arg].action.steps))) {
                        top = h;
                        arg = static_cast<int>(r);
                    }
                }
                const auto& chosen = actions[arg];
                const double po = chosen.action.steps > 0 ? -s / spec.eta * chosen.action.de
                                : chosen.action.steps < 0 ? -s * chosen.action.de
                                                          : 0.0;
                out[i] = po + chosen.qb + disc * acf_next[chosen.target][i];
                if (policy != nullptr) {
                    decisions[(static_cast<std::size_t>(m - 1) * L + j) * n_paths + i] =
                        static_cast<std::int8_t>(chosen.action.steps);
                }
            }
        }
    }

    LsmcRun run;
    run.regression_fallback = fallback;
    run.values_per_level.assign(L, 0.0);
    for (int j = 0; j < L; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) mean += acf[j][i];
        run.values_per_level[j] = disc * mean / static_cast<double>(n_paths);
    }
    const int start_level = spec.grid.index_of(spec.e_start);
    run.value = run.values_per_level[start_level];

    if (policy != nullptr) {
        PolicyAccumulator acc;
        acc.init(M + 2, M, spec.grid.n_levels);
        acc.n = n_paths;
        for (std::size_t i = 0; i < n_paths; ++i) {
            int level = start_level;
            for (int m = 0; m <= M + 1; ++m) {
                if (m >= 1 && m <= M) {
                    const int steps =
                        decisions[(static_cast<std::size_t>(m - 1) * L + level) * n_paths + i];
                    acc.action_counts[m - 1][steps] += 1;
                    const double e = spec.grid.level(level);
                    acc.sum[m] += e;
                    acc.sum_sq[m] += e * e;
                    acc.min_v[m] = std::min(acc.min_v[m], e);
                    acc.max_v[m] = std::max(acc.max_v[m], e);
                    level += steps;
                } else {
                    const double e = spec.grid.level(level);
                    acc.sum[m] += e;
                    acc.sum_sq[m] += e * e;
                    acc.min_v[m] = std::min(acc.min_v[m], e);
                    acc.max_v[m] = std::max(acc.max_v[m], e);
                }
            }
            if (level == acc.top_level) acc.full_at_settlement += 1;
        }
        policy->times = times;
        policy->n_trajectories = n_paths;
        policy->mean_energy.resize(M + 2);
        policy->band_low.resize(M + 2);
        policy->band_high.resize(M + 2);
        policy->se.resize(M + 2);
        policy->min_energy = acc.min_v;
        policy->max_energy = acc.max_v;
        policy->action_counts = acc.action_counts;
        for (int m = 0; m <= M + 1; ++m) {
            const double mean = acc.sum[m] / static_cast<double>(n_paths);
            const double var =
                std::max(0.0, acc.sum_sq[m] / static_cast<double>(n_paths) - mean * mean);
            const double sd = std::sqrt(var);
            policy->mean_energy[m] = mean;
            policy->band_low[m] = mean - 1.96 * sd;
            policy->band_high[m] = mean + 1.96 * sd;
            policy->se[m] = sd / std::sqrt(static_cast<double>(n_paths));
        }
        policy->fraction_full_at_settlement =
            static_cast<double>(acc.full_at_settlement) / static_cast<double>(n_paths);
    }

    if (config.out_of_sample) {
        // Replay the fitted policy on a fresh path set and accumulate the
        // realized discounted cash flows directly.
        const auto fresh =
            simulate_paths(model.ou, n_paths, times, rng::substream_seed(run_seed, 0x9F0Cull));
        double total = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) {
            int level = start_level;
            double value = 0.0;
            double df = 1.0;
            for (int m = 1; m <= M; ++m) {
                df *= disc;
                const double s = model.map(fresh.state(i, m));
                const double z = (s - fits[m].mean) / fits[m].scale;
                const auto& actions = acts[level];
                int arg = 0;
                double top = -1e300;
                for (std::size_t r = 0; r < actions.size(); ++r) {
                    const auto& la = actions[r];
                    const double po = la.action.steps > 0 ? -s / spec.eta * la.action.de
                                    : la.action.steps < 0 ? -s * la.action.de
                                                          : 0.0;
                    const double h = po + predict(fits[m].coeffs[la.target], z) + la.qb;
                    if (h > top ||
                        (h == top && std::abs(la.action.steps) < std::abs(actions[arg].action.steps))) {
                        top = h;
                        arg = static_cast<int>(r);
                    }
                }
                const auto& chosen = actions[arg];
                const double po = chosen.action.steps > 0 ? -s / spec.eta * chosen.action.de
                                : chosen.action.steps < 0 ? -s * chosen.action.de
                                                          : 0.0;
                value += df * (po + chosen.qb);
                level = chosen.target;
            }
            value += df * disc * q_s[level];
            total += value;
        }
        run.out_of_sample_value = total / static_cast<double>(n_paths);
        run.has_out_of_sample = true;
    }

    return run;
}

std::pair<double, double> confidence_interval(std::span<const double> run_values) {
    if (run_values.size() < 2) {
        throw std::invalid_argument("confidence_interval: need at least two runs");
    }
    const double n = static_cast<double>(run_values.size());
    double mean = 0.0;
    for (double v : run_values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : run_values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const double half = 1.96 * sd / std::sqrt(n);
    return {mean - half, mean + half};
}

LsmcResult lsmc_estimate(const ContractSpec& spec, const PriceModel& model,
                         const LsmcConfig& config) {
    if (config.n_runs < 2) {
        throw std::invalid_argument("LsmcConfig: n_runs must be >= 2 for a confidence interval");
    }
    std::vector<LsmcRun> runs(config.n_runs);
    std::vector<PolicyStatistics> policies(config.n_runs);

    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    const int workers = std::max(1, std::min(config.threads, config.n_runs));
    auto work = [&](int t) {
        try {
            for (int r = t; r < config.n_runs; r += workers) {
                const std::uint64_t run_seed = rng::substream_seed(config.seed, 1000003ULL * r);
                runs[r] = lsmc_value(spec, model, config, run_seed,
                                     config.collect_policy ? &policies[r] : nullptr);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    LsmcResult result;
    result.run_values.resize(config.n_runs);
    for (int r = 0; r < config.n_runs; ++r) {
        result.run_values[r] = runs[r].value;
        result.regression_fallback = result.regression_fallback || runs[r].regression_fallback;
    }
    double mean = 0.0;
    for (double v : result.run_values) mean += v;
    result.value_mean = mean / config.n_runs;
    std::tie(result.ci_low, result.ci_high) = confidence_interval(result.run_values);

    if (config.collect_policy) {
        const int n_times = static_cast<int>(policies[0].times.size());
        auto& pooled = result.policy;
        pooled.times = policies[0].times;
        pooled.mean_energy.assign(n_times, 0.0);
        pooled.band_low.assign(n_times, 0.0);
        pooled.band_high.assign(n_times, 0.0);
        pooled.se.assign(n_times, 0.0);
        pooled.min_energy.assign(n_times, 1e300);
        pooled.max_energy.assign(n_times, -1e300);
        pooled.action_counts.assign(spec.time.n_exercise, {});

        std::vector<double> sum(n_times, 0.0), sum_sq(n_times, 0.0);
        std::uint64_t full = 0;
        for (const auto& p : policies) {
            pooled.n_trajectories += p.n_trajectories;
            const double n = static_cast<double>(p.n_trajectories);
            for (int m = 0; m < n_times; ++m) {
                // Recover the per-run sums from mean and band width.
                const double sd = (p.band_high[m] - p.mean_energy[m]) / 1.96;
                sum[m] += p.mean_energy[m] * n;
                sum_sq[m] += (sd * sd + p.mean_energy[m] * p.mean_energy[m]) * n;
                pooled.min_energy[m] = std::min(pooled.min_energy[m], p.min_energy[m]);
                pooled.max_energy[m] = std::max(pooled.max_energy[m], p.max_energy[m]);
            }
            for (int m = 0; m < spec.time.n_exercise; ++m) {
                for (const auto& [steps, count] : p.action_counts[m]) {
                    pooled.action_counts[m][steps] += count;
                }
            }
            full += static_cast<std::uint64_t>(
                std::llround(p.fraction_full_at_settlement * n));
        }
        const double n_total = static_cast<double>(pooled.n_trajectories);
        for (int m = 0; m < n_times; ++m) {
            const double mean_e = sum[m] / n_total;
            const double var = std::max(0.0, sum_sq[m] / n_total - mean_e * mean_e);
            const double sd = std::sqrt(var);
            pooled.mean_energy[m] = mean_e;
            pooled.band_low[m] = mean_e - 1.96 * sd;
            pooled.band_high[m] = mean_e + 1.96 * sd;
            pooled.se[m] = sd / std::sqrt(n_total);
        }
        pooled.fraction_full_at_settlement = static_cast<double>(full) / n_total;
    }

    if (config.out_of_sample) {
        double oos = 0.0;
        int n_oos = 0;
        for (const auto& r : runs) {
            if (r.has_out_of_sample) {
                oos += r.out_of_sample_value;
                ++n_oos;
            }
        }
        if (n_oos > 0) {
            result.out_of_sample_mean = oos / n_oos;
            result.has_out_of_sample = true;
        }
    }
    return result;
}

} // namespace esv
