#include "esv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "esv/errors.hpp"

namespace esv {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct KeyValueStore {
    // section -> key -> value
    std::map<std::string, std::map<std::string, std::string>> data;
    std::vector<std::string> errors;

    void parse(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    errors.push_back("line " + std::to_string(line_no) + ": malformed section header");
                    continue;
                }
                section = trim(line.substr(1, line.size() - 2));
                data[section];
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (section.empty()) {
                errors.push_back("line " + std::to_string(line_no) + ": key outside any section");
                continue;
            }
            auto& sec = data[section];
            if (sec.count(key)) {
                errors.push_back("[" + section + "] " + key + ": duplicate key");
                continue;
            }
            sec[key] = value;
        }
    }
};

// Tracks which keys were consumed so leftovers can be rejected.
class SectionReader {
public:
    SectionReader(KeyValueStore& store, std::string section,
                  std::vector<std::string>& errors)
        : store_(store), section_(std::move(section)), errors_(errors) {}

    bool present() const { return store_.data.count(section_) > 0; }

    bool has(const std::string& key) const {
        auto it = store_.data.find(section_);
        return it != store_.data.end() && it->second.count(key) > 0;
    }

    std::string raw(const std::string& key, const std::string& fallback = "") {
        consumed_.push_back(key);
        auto it = store_.data.find(section_);
        if (it == store_.data.end()) return fallback;
        auto kv = it->second.find(key);
        return kv == it->second.end() ? fallback : kv->second;
    }

    double number(const std::string& key, double fallback, bool required = false) {
        consumed_.push_back(key);
        auto it = store_.data.find(section_);
        const auto* sec = it != store_.data.end() ? &it->second : nullptr;
        if (sec == nullptr || !sec->count(key)) {
            if (required) errors_.push_back("[" + section_ + "] " + key + ": required");
            return fallback;
        }
        const std::string& text = sec->at(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            errors_.push_back("[" + section_ + "] " + key + ": not a number: '" + text + "'");
            return fallback;
        }
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback, bool required = false) {
        const double v = number(key, static_cast<double>(fallback), required);
        if (v != std::floor(v)) {
            errors_.push_back("[" + section_ + "] " + key + ": expected an integer");
        }
        return static_cast<std::int64_t>(v);
    }

    void reject_unconsumed() {
        auto it = store_.data.find(section_);
        if (it == store_.data.end()) return;
        for (const auto& [key, value] : it->second) {
            if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end()) {
                errors_.push_back("[" + section_ + "] " + key + ": unknown key");
            }
        }
    }

private:
    KeyValueStore& store_;
    std::string section_;
    std::vector<std::string>& errors_;
    std::vector<std::string> consumed_;
};

// "(a1,g1);(a2,g2);..." -> factor list
std::vector<QuadraticFactor> parse_factors(const std::string& text,
                                           std::vector<std::string>& errors) {
    std::vector<QuadraticFactor> factors;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ';')) {
        token = trim(token);
        if (token.empty()) continue;
        if (token.front() != '(' || token.back() != ')') {
            errors.push_back("[model] factors: expected (alpha,gamma) pairs, got '" + token + "'");
            return {};
        }
        const std::string inner = token.substr(1, token.size() - 2);
        const auto comma = inner.find(',');
        if (comma == std::string::npos) {
            errors.push_back("[model] factors: expected (alpha,gamma) pairs, got '" + token + "'");
            return {};
        }
        try {
            factors.push_back({std::stod(inner.substr(0, comma)),
                               std::stod(inner.substr(comma + 1))});
        } catch (const std::exception&) {
            errors.push_back("[model] factors: malformed pair '" + token + "'");
            return {};
        }
    }
    return factors;
}

} // namespace

RunConfig parse_run_config(const std::string& text) {
    KeyValueStore store;
    store.parse(text);
    std::vector<std::string> errors = store.errors;

    for (const auto& [section, keys] : store.data) {
        if (section != "model" && section != "contract" && section != "cos" &&
            section != "lsmc" && section != "output") {
            errors.push_back("[" + section + "]: unknown section");
        }
    }

    RunConfig config;

    SectionReader model(store, "model", errors);
    if (!model.present()) errors.push_back("[model]: section required");
    const std::string map_kind = model.raw("map", "second-order-gamma");
    if (map_kind == "second-order-gamma") {
        const double gamma = model.number("gamma", 0.5, true);
        try {
            config.model.map = second_order_map(gamma);
        } catch (const std::exception& e) {
            errors.push_back(std::string("[model] gamma: ") + e.what());
        }
    } else if (map_kind == "factors") {
        const auto factors = parse_factors(model.raw("factors"), errors);
        try {
            config.model.map = PolynomialMap(factors);
        } catch (const std::exception& e) {
            errors.push_back(std::string("[model] factors: ") + e.what());
        }
    } else if (map_kind == "identity") {
        config.model.map = PolynomialMap();
    } else {
        errors.push_back("[model] map: must be second-order-gamma, factors or identity");
    }
    config.model.ou.kappa = model.number("kappa", 0.0, true);
    config.model.ou.theta = model.number("theta", 0.0, true);
    config.model.ou.sigma = model.number("sigma", 0.0, true);
    config.model.ou.x0 = model.number("x0", 0.0, true);
    config.model.market.r = model.number("r", 0.0, true);
    model.reject_unconsumed();

    SectionReader contract(store, "contract", errors);
    if (!contract.present()) errors.push_back("[contract]: section required");
    config.contract.time.t0 = contract.number("t0_years", 0.0);
    config.contract.time.maturity = contract.number("maturity_years", 0.0, true);
    config.contract.time.n_exercise =
        static_cast<int>(contract.integer("n_exercise", 0, true));
    config.contract.grid.e_min = contract.number("e_min_mwh", 0.0, true);
    config.contract.grid.e_max = contract.number("e_max_mwh", 0.0, true);
    const double delta = contract.number("delta_mwh", 1.0);
    if (delta > 0.0 && config.contract.grid.e_max > config.contract.grid.e_min) {
        const double levels = (config.contract.grid.e_max - config.contract.grid.e_min) / delta;
        if (std::abs(levels - std::round(levels)) > 1e-9) {
            errors.push_back("[contract] delta_mwh: must divide e_max - e_min evenly");
        }
        config.contract.grid.n_levels = static_cast<int>(std::lround(levels));
    } else if (!(delta > 0.0)) {
        errors.push_back("[contract] delta_mwh: must be > 0");
    }
    config.contract.e_start = contract.number("e_start_mwh", 0.0, true);
    config.contract.i_min_op = contract.number("i_min_op_mwh", 0.0, true);
    config.contract.i_max_op = contract.number("i_max_op_mwh", 0.0, true);
    config.contract.i_min_market = contract.number("i_min_market_mwh", 0.0);
    config.contract.i_min_b = contract.number("i_min_b_mwh", 0.0, true);
    config.contract.i_max_b = contract.number("i_max_b_mwh", 0.0, true);
    config.contract.eta = contract.number("eta", 1.0, true);
    config.contract.q_b_value = contract.number("q_b_eur", 0.0, true);
    const std::string settlement = contract.raw("settlement", "threshold-constant");
    if (settlement == "threshold-constant") {
        ThresholdConstantPenalty p;
        p.threshold = contract.number("settlement_threshold_mwh", 0.0, true);
        p.penalty = contract.number("settlement_penalty_eur", 0.0, true);
        config.contract.settlement = p;
    } else if (settlement == "piecewise-linear") {
        PiecewiseLinearPenalty p;
        p.e_fix = contract.number("settlement_e_fix_mwh", 0.0, true);
        p.slope_penalty = contract.number("settlement_slope_eur", 0.0, true);
        p.floor_penalty = contract.number("settlement_floor_eur", 0.0, true);
        config.contract.settlement = p;
    } else {
        errors.push_back("[contract] settlement: must be threshold-constant or piecewise-linear");
    }
    contract.reject_unconsumed();

    SectionReader cos(store, "cos", errors);
    config.cos.n_terms = static_cast<int>(cos.integer("n_terms", 200));
    config.cos.l_bar = cos.number("l_bar", 10.0);
    config.cos.tol_interval = cos.number("tol_interval", -1.0);
    config.cos.scan_points = static_cast<int>(cos.integer("scan_points", 0));
    config.cos.range_horizon = cos.number("range_horizon_years", -1.0);
    cos.reject_unconsumed();

    SectionReader lsmc(store, "lsmc", errors);
    config.lsmc.n_paths = static_cast<std::size_t>(lsmc.integer("n_paths", 25000));
    config.lsmc.n_runs = static_cast<int>(lsmc.integer("n_runs", 10));
    config.lsmc.basis_degree = static_cast<int>(lsmc.integer("basis_degree", 3));
    config.lsmc.seed = static_cast<std::uint64_t>(lsmc.integer("seed", 1));
    config.lsmc.out_of_sample = lsmc.integer("out_of_sample", 0) != 0;
    lsmc.reject_unconsumed();

    SectionReader output(store, "output", errors);
    config.output.dir = output.raw("dir", "out");
    config.output.format = output.raw("format", "csv");
    if (config.output.format != "csv" && config.output.format != "json") {
        errors.push_back("[output] format: must be csv or json");
    }
    output.reject_unconsumed();

    if (errors.empty()) {
        try {
            validate(config.model.ou);
            validate(config.model.market);
        } catch (const std::exception& e) {
            errors.push_back(std::string("[model] ") + e.what());
        }
        const auto report = validate_spec(config.contract);
        for (const auto& e : report.errors) errors.push_back("[contract] " + e);
        if (config.cos.n_terms < 16) errors.push_back("[cos] n_terms: must be >= 16");
        if (!(config.cos.l_bar > 0.0)) errors.push_back("[cos] l_bar: must be > 0");
        if (config.lsmc.n_paths < 100) errors.push_back("[lsmc] n_paths: must be >= 100");
        if (config.lsmc.basis_degree < 1) errors.push_back("[lsmc] basis_degree: must be >= 1");
    }

    if (!errors.empty()) {
        throw ConfigError("invalid configuration", errors);
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open configuration file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

std::string format_run_config(const RunConfig& config) {
    std::ostringstream out;
    out.precision(17);
    out << "[model]\n";
    const auto& factors = config.model.map.factors();
    if (factors.size() == 1 && factors[0].alpha == 0.0) {
        out << "map = second-order-gamma\n";
        out << "gamma = " << factors[0].gamma << "\n";
    } else if (factors.empty()) {
        out << "map = identity\n";
    } else {
        out << "map = factors\n";
        out << "factors = ";
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (i) out << ";";
            out << "(" << factors[i].alpha << "," << factors[i].gamma << ")";
        }
        out << "\n";
    }
    out << "kappa = " << config.model.ou.kappa << "\n";
    out << "theta = " << config.model.ou.theta << "\n";
    out << "sigma = " << config.model.ou.sigma << "\n";
    out << "x0 = " << config.model.ou.x0 << "\n";
    out << "r = " << config.model.market.r << "\n\n";

    out << "[contract]\n";
    out << "t0_years = " << config.contract.time.t0 << "\n";
    out << "maturity_years = " << config.contract.time.maturity << "\n";
    out << "n_exercise = " << config.contract.time.n_exercise << "\n";
    out << "e_start_mwh = " << config.contract.e_start << "\n";
    out << "e_min_mwh = " << config.contract.grid.e_min << "\n";
    out << "e_max_mwh = " << config.contract.grid.e_max << "\n";
    out << "delta_mwh = " << config.contract.grid.delta() << "\n";
    out << "i_min_op_mwh = " << config.contract.i_min_op << "\n";
    out << "i_max_op_mwh = " << config.contract.i_max_op << "\n";
    out << "i_min_market_mwh = " << config.contract.i_min_market << "\n";
    out << "i_min_b_mwh = " << config.contract.i_min_b << "\n";
    out << "i_max_b_mwh = " << config.contract.i_max_b << "\n";
    out << "eta = " << config.contract.eta << "\n";
    out << "q_b_eur = " << config.contract.q_b_value << "\n";
    if (const auto* t = std::get_if<ThresholdConstantPenalty>(&config.contract.settlement)) {
        out << "settlement = threshold-constant\n";
        out << "settlement_threshold_mwh = " << t->threshold << "\n";
        out << "settlement_penalty_eur = " << t->penalty << "\n";
    } else {
        const auto& p = std::get<PiecewiseLinearPenalty>(config.contract.settlement);
        out << "settlement = piecewise-linear\n";
        out << "settlement_e_fix_mwh = " << p.e_fix << "\n";
        out << "settlement_slope_eur = " << p.slope_penalty << "\n";
        out << "settlement_floor_eur = " << p.floor_penalty << "\n";
    }
    out << "\n[cos]\n";
    out << "n_terms = " << config.cos.n_terms << "\n";
    out << "l_bar = " << config.cos.l_bar << "\n";
    out << "\n[lsmc]\n";
    out << "n_paths = " << config.lsmc.n_paths << "\n";
    out << "n_runs = " << config.lsmc.n_runs << "\n";
    out << "basis_degree = " << config.lsmc.basis_degree << "\n";
    out << "seed = " << config.lsmc.seed << "\n";
    out << "\n[output]\n";
    out << "dir = " << config.output.dir << "\n";
    out << "format = " << config.output.format << "\n";
    return out.str();
}

} // namespace esv
