#include "esv/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "esv/errors.hpp"

namespace esv {

namespace {

std::ofstream open_file(const std::string& dir, const std::string& name) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write output file: " + path.string());
    }
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory: " + dir + " (" + ec.message() + ")");
    }
}

void write_valuation(const std::string& dir, const std::string& format,
                     const ContractSpec& spec, const ValuationResult& result) {
    ensure_directory(dir);
    if (format == "json") {
        nlohmann::json j;
        j["value_at_start_eur"] = result.value_at_start;
        j["e_start_mwh"] = spec.e_start;
        auto& levels = j["values_per_level"];
        for (int i = 0; i < spec.grid.level_count(); ++i) {
            levels.push_back({{"e_mwh", spec.grid.level(i)},
                              {"value_eur", result.values_per_level[i]}});
        }
        if (result.greeks) {
            j["greeks"] = {{"delta", result.greeks->delta},
                           {"gamma", result.greeks->gamma},
                           {"vega", result.greeks->vega}};
        }
        open_file(dir, "valuation.json") << j.dump(2) << "\n";
        return;
    }
    auto out = open_file(dir, "values.csv");
    out << "e_mwh,value_eur\n";
    for (int i = 0; i < spec.grid.level_count(); ++i) {
        out << num(spec.grid.level(i)) << "," << num(result.values_per_level[i]) << "\n";
    }
}

void write_greeks(const std::string& dir, const std::string& format,
                  const std::vector<GreeksRow>& rows) {
    ensure_directory(dir);
    if (format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& row : rows) {
            j.push_back({{"s_eur", row.s},
                         {"e_mwh", row.e},
                         {"delta", row.greeks.delta},
                         {"gamma", row.greeks.gamma},
                         {"vega", row.greeks.vega}});
        }
        open_file(dir, "greeks.json") << j.dump(2) << "\n";
        return;
    }
    auto out = open_file(dir, "greeks.csv");
    out << "s_eur,e_mwh,delta,gamma,vega\n";
    for (const auto& row : rows) {
        out << num(row.s) << "," << num(row.e) << "," << num(row.greeks.delta) << ","
            << num(row.greeks.gamma) << "," << num(row.greeks.vega) << "\n";
    }
}

void write_lsmc(const std::string& dir, const std::string& format,
                const ContractSpec& spec, const LsmcResult& result) {
    (void)spec;
    ensure_directory(dir);
    nlohmann::json j;
    j["value_mean_eur"] = result.value_mean;
    j["ci_low_eur"] = result.ci_low;
    j["ci_high_eur"] = result.ci_high;
    j["run_values_eur"] = result.run_values;
    j["regression_fallback"] = result.regression_fallback;
    if (result.has_out_of_sample) {
        j["out_of_sample_mean_eur"] = result.out_of_sample_mean;
    }
    j["fraction_full_at_settlement"] = result.policy.fraction_full_at_settlement;
    open_file(dir, "lsmc.json") << j.dump(2) << "\n";
    (void)format; // the estimate is always JSON, the policy series always CSV

    const auto& p = result.policy;
    if (!p.times.empty()) {
        auto levels = open_file(dir, "energy_levels.csv");
        levels << "time,mean_e_mwh,ci_lo_mwh,ci_hi_mwh,min_e_mwh,max_e_mwh\n";
        for (std::size_t m = 0; m < p.times.size(); ++m) {
            levels << num(p.times[m]) << "," << num(p.mean_energy[m]) << ","
                   << num(p.band_low[m]) << "," << num(p.band_high[m]) << ","
                   << num(p.min_energy[m]) << "," << num(p.max_energy[m]) << "\n";
        }
        auto usage = open_file(dir, "action_usage.csv");
        usage << "time,action_mwh,count\n";
        const double delta = 0 < spec.grid.n_levels ? spec.grid.delta() : 1.0;
        for (std::size_t m = 0; m < p.action_counts.size(); ++m) {
            for (const auto& [steps, count] : p.action_counts[m]) {
                usage << num(p.times[m + 1]) << "," << num(steps * delta) << "," << count << "\n";
            }
        }
    }
}

void write_convergence(const std::string& dir,
                       const std::vector<std::pair<int, double>>& rows) {
    ensure_directory(dir);
    auto out = open_file(dir, "convergence.csv");
    out << "n_terms,value_eur\n";
    for (const auto& [n, v] : rows) {
        out << n << "," << num(v) << "\n";
    }
}

void write_coefficient_dump(const std::string& dir, const ContractSpec& spec,
                            const CoefficientTable& table) {
    ensure_directory(dir);
    auto out = open_file(dir, "coefficients.csv");
    out << "m,e_mwh,k,v_k\n";
    for (int m = 1; m <= table.m_count(); ++m) {
        for (int level = 0; level < table.level_count(); ++level) {
            const auto coeffs = table.at(m, level);
            for (int k = 0; k < table.n_terms(); ++k) {
                out << m << "," << num(spec.grid.level(level)) << "," << k << ","
                    << num(coeffs[k]) << "\n";
            }
        }
    }
}

} // namespace esv
