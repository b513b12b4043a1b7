// Command-line front end: price / greeks / lsmc / convergence / reproduce.
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esv/config.hpp"
#include "esv/cos_pricer.hpp"
#include "esv/errors.hpp"
#include "esv/lsmc.hpp"
#include "esv/reference_cases.hpp"
#include "esv/rng.hpp"
#include "esv/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::string format;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
    cmd->add_option("--config", opts.config_path, "configuration file")
        ->required(config_required);
    cmd->add_option("--out", opts.out_dir, "output directory (overrides [output] dir)");
    cmd->add_option("--format", opts.format, "csv or json (overrides [output] format)")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", opts.seed, "simulation seed (overrides [lsmc] seed)");
    cmd->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
}

esv::RunConfig load(const CommonOptions& opts) {
    auto config = esv::load_run_config(opts.config_path);
    if (!opts.out_dir.empty()) config.output.dir = opts.out_dir;
    if (!opts.format.empty()) config.output.format = opts.format;
    if (opts.seed) config.lsmc.seed = *opts.seed;
    config.cos.threads = opts.threads;
    config.lsmc.threads = opts.threads;
    return config;
}

int cmd_price(const CommonOptions& opts, bool dump_coefficients) {
    const auto config = load(opts);
    esv::CosPricer pricer(config.contract, config.model, config.cos);
    const auto& result = pricer.run();
    esv::write_valuation(config.output.dir, config.output.format, config.contract, result);
    if (dump_coefficients) {
        esv::write_coefficient_dump(config.output.dir, config.contract, pricer.table());
    }
    std::printf("value_at_start: %.6f EUR (e_start %.3f MWh, S0 %.4f)\n",
                result.value_at_start, config.contract.e_start, config.model.spot0());
    std::fprintf(stderr, "subintervals total %zu, max %d, merged %zu, runtime %.0f ms\n",
                 result.diagnostics.total_subintervals, result.diagnostics.max_subintervals,
                 result.diagnostics.merged_subintervals, result.diagnostics.runtime_ms);
    return kExitOk;
}

int cmd_greeks(const CommonOptions& opts, int t_index, double s_min, double s_max,
               int s_count, bool fd_vega) {
    const auto config = load(opts);
    esv::CosPricer pricer(config.contract, config.model, config.cos);
    pricer.run();

    const double s0 = config.model.spot0();
    std::vector<double> spots;
    if (s_count <= 1) {
        spots.push_back(s_min > 0.0 ? s_min : s0);
    } else {
        const double lo = s_min > 0.0 ? s_min : 0.5 * s0;
        const double hi = s_max > lo ? s_max : 1.5 * s0;
        for (int i = 0; i < s_count; ++i) {
            spots.push_back(lo + (hi - lo) * i / (s_count - 1));
        }
    }

    std::vector<esv::GreeksRow> rows;
    if (s_count <= 1 && t_index == 0) {
        // Single-point initial-time query at the start level.
        esv::GreeksRow row{spots[0], config.contract.e_start,
                           pricer.greeks_at(0, spots[0], config.contract.e_start)};
        rows.push_back(row);
        std::printf("delta %.6f  gamma %.6f  vega %.6f\n", row.greeks.delta, row.greeks.gamma,
                    row.greeks.vega);
        if (fd_vega) {
            // Full sensitivity including the sigma dependence of the recovered
            // coefficients, for comparison with the fixed-coefficient vega.
            const double h = 1e-4 * config.model.ou.sigma;
            auto bump = [&](double ds) {
                auto model = config.model;
                model.ou.sigma += ds;
                return esv::backward_induction(config.contract, model, config.cos).value_at_start;
            };
            const double fd = (bump(h) - bump(-h)) / (2.0 * h);
            std::printf("vega_fd_full %.6f (gap vs series vega %.6f)\n", fd,
                        fd - row.greeks.vega);
        }
    } else {
        rows = pricer.greeks_surface(t_index, spots);
    }
    esv::write_greeks(config.output.dir, config.output.format, rows);
    return kExitOk;
}

int cmd_lsmc(const CommonOptions& opts) {
    const auto config = load(opts);
    if (config.lsmc.n_runs < 2) {
        throw esv::ConfigError("lsmc: n_runs must be >= 2 to form a confidence interval");
    }
    const auto result = esv::lsmc_estimate(config.contract, config.model, config.lsmc);
    esv::write_lsmc(config.output.dir, config.output.format, config.contract, result);
    std::printf("lsmc value %.6f EUR, 95%% CI [%.6f, %.6f] over %d runs x %zu paths\n",
                result.value_mean, result.ci_low, result.ci_high, config.lsmc.n_runs,
                config.lsmc.n_paths);
    return kExitOk;
}

int cmd_convergence(const CommonOptions& opts, std::vector<int> n_list) {
    const auto config = load(opts);
    if (n_list.empty()) n_list = {50, 100, 150, 200, 300, 400};
    std::vector<std::pair<int, double>> rows;
    for (const int n : n_list) {
        auto cos = config.cos;
        cos.n_terms = n;
        cos.keep_table = false;
        const auto result = esv::backward_induction(config.contract, config.model, cos);
        rows.emplace_back(n, result.value_at_start);
        std::printf("N %4d  value %.6f\n", n, result.value_at_start);
    }
    esv::write_convergence(config.output.dir, rows);
    return kExitOk;
}

int cmd_reproduce(const CommonOptions& opts, bool skip_lsmc) {
    using namespace esv::reference;
    const std::string dir = opts.out_dir.empty() ? "out" : opts.out_dir;
    esv::ensure_directory(dir);
    std::ofstream report(std::string(dir) + "/reproduce_report.csv");
    report << "case,expected,computed,difference,tolerance,status\n";

    int failures = 0;
    auto record = [&](const std::string& name, double expected, double computed,
                      double tolerance) {
        const double diff = std::abs(computed - expected);
        const bool ok = diff <= tolerance;
        failures += ok ? 0 : 1;
        std::printf("%-4s %-44s expected %10.4f  got %10.4f  |d| %.4g\n", ok ? "PASS" : "FAIL",
                    name.c_str(), expected, computed, diff);
        report << name << "," << expected << "," << computed << "," << diff << "," << tolerance
               << "," << (ok ? "pass" : "fail") << "\n";
    };

    esv::CosConfig cos;
    cos.threads = opts.threads;

    for (const auto& entry : reference_values()) {
        const auto spec = contract_spec(entry.contract);
        const auto model = price_model(entry.sigma);
        const auto result = esv::backward_induction(spec, model, cos);
        const double tol = std::max(0.02, 1e-3 * std::abs(entry.value));
        char name[96];
        std::snprintf(name, sizeof(name), "value/%s/sigma=%.1f",
                      contract_name(entry.contract).c_str(), entry.sigma);
        record(name, entry.value, result.value_at_start, tol);
    }

    for (const auto& entry : reference_greeks()) {
        const auto spec = contract_spec(entry.contract);
        const auto model = price_model(entry.sigma);
        const auto result = esv::backward_induction(spec, model, cos);
        char name[96];
        std::snprintf(name, sizeof(name), "greeks/%s/sigma=%.1f",
                      contract_name(entry.contract).c_str(), entry.sigma);
        record(std::string(name) + "/delta", entry.delta, result.greeks->delta, 0.01);
        record(std::string(name) + "/gamma", entry.gamma, result.greeks->gamma, 0.01);
        record(std::string(name) + "/vega", entry.vega, result.greeks->vega, 0.01);
    }

    if (!skip_lsmc) {
        esv::LsmcConfig base_lsmc;
        base_lsmc.threads = opts.threads;
        if (opts.seed) base_lsmc.seed = *opts.seed;
        for (const auto& entry : reference_values()) {
            const auto spec = contract_spec(entry.contract);
            const auto model = price_model(entry.sigma);
            auto lsmc = base_lsmc;
            lsmc.seed = esv::rng::substream_seed(
                base_lsmc.seed, 97ULL * static_cast<int>(entry.contract) +
                                    static_cast<std::uint64_t>(entry.sigma * 10));
            const auto cos_value = esv::backward_induction(spec, model, cos).value_at_start;
            const auto mc = esv::lsmc_estimate(spec, model, lsmc);
            const bool ok = cos_value >= mc.ci_low - 0.01 && cos_value <= mc.ci_high + 0.01;
            failures += ok ? 0 : 1;
            std::printf("%-4s lsmc/%s/sigma=%.1f  COS %.4f in CI [%.4f, %.4f]+-0.01\n",
                        ok ? "PASS" : "FAIL", contract_name(entry.contract).c_str(), entry.sigma,
                        cos_value, mc.ci_low, mc.ci_high);
            report << "lsmc/" << contract_name(entry.contract) << "/sigma=" << entry.sigma << ","
                   << cos_value << "," << mc.value_mean << ",," << ","
                   << (ok ? "pass" : "fail") << "\n";
        }
    }

    std::printf("%s (%d failures)\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electricity storage contract valuation (Fourier-cosine pricer + LSMC)"};
    app.require_subcommand(1);

    CommonOptions price_opts, greeks_opts, lsmc_opts, conv_opts, repro_opts;

    auto* price = app.add_subcommand("price", "value the contract on the energy grid");
    add_common(price, price_opts);
    bool dump_coefficients = false;
    price->add_flag("--dump-coefficients", dump_coefficients,
                    "also write the per-date series coefficients");

    auto* greeks = app.add_subcommand("greeks", "delta/gamma/vega at an exercise date");
    add_common(greeks, greeks_opts);
    int t_index = 0;
    double s_min = 0.0, s_max = 0.0;
    int s_count = 1;
    bool fd_vega = false;
    greeks->add_option("--t-index", t_index, "exercise date index (0..M)");
    greeks->add_option("--s-min", s_min, "lowest spot of the grid");
    greeks->add_option("--s-max", s_max, "highest spot of the grid");
    greeks->add_option("--s-count", s_count, "number of spot grid points");
    greeks->add_flag("--fd-vega", fd_vega,
                     "also report the full finite-difference vega diagnostic");

    auto* lsmc = app.add_subcommand("lsmc", "Monte Carlo cross-valuation with policy statistics");
    add_common(lsmc, lsmc_opts);

    auto* conv = app.add_subcommand("convergence", "value for a list of series lengths");
    add_common(conv, conv_opts);
    std::vector<int> n_list;
    conv->add_option("--n", n_list, "series lengths to evaluate");

    auto* repro = app.add_subcommand("reproduce",
                                     "re-run the bundled cases against recorded reference values");
    add_common(repro, repro_opts, /*config_required=*/false);
    bool skip_lsmc = false;
    repro->add_flag("--skip-lsmc", skip_lsmc, "skip the Monte Carlo cross-checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (price->parsed()) return cmd_price(price_opts, dump_coefficients);
        if (greeks->parsed()) {
            return cmd_greeks(greeks_opts, t_index, s_min, s_max, s_count, fd_vega);
        }
        if (lsmc->parsed()) return cmd_lsmc(lsmc_opts);
        if (conv->parsed()) return cmd_convergence(conv_opts, n_list);
        if (repro->parsed()) return cmd_reproduce(repro_opts, skip_lsmc);
    } catch (const esv::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const esv::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
