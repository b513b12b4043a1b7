#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "esv/contract.hpp"
#include "esv/price_model.hpp"

namespace esv {

/// Tuning knobs of the Fourier-cosine backward induction.
struct CosConfig {
    int n_terms = 200;          ///< series length N (>= 16)
    double l_bar = 10.0;        ///< truncation width multiplier
    double tol_interval = -1.0; ///< minimum subinterval width; < 0 selects (b-a)*1e-4
    int scan_points = 0;        ///< switch-point scan resolution; <= 0 selects max(1000, 5N)
    double range_horizon = -1.0; ///< horizon for the truncation cumulants; <= 0 selects t0..settlement
    bool use_fft_beta1 = false;  ///< Toeplitz/Hankel FFT fast path, usable only when beta = 1
    bool prune_unreachable = false; ///< restrict coefficient recovery to levels reachable from e_start
    int threads = 1;            ///< worker count for per-level assembly (results identical for any count)
    bool keep_table = true;     ///< retain all per-time coefficients (needed for Greeks at later dates)
};

/// Frequency-domain quantities shared by every series evaluation for one
/// (range, N, dt) triple: the x-independent characteristic factor per
/// frequency, its sigma derivative, the state factor and the one-step
/// discount.
struct CosBasis {
    TruncationRange range;
    int n_terms = 0;
    double dt = 0.0;
    double beta = 1.0;
    double discount = 1.0;
    std::vector<std::complex<double>> phi;        // phi(k pi/(b-a) | dt)
    std::vector<std::complex<double>> phi_dsigma; // d/d sigma of the factor

    double freq(int k) const { return k * 3.141592653589793238462643 / (range.b - range.a); }
};

CosBasis make_ou_basis(const OUParams& p, const MarketParams& m,
                       const TruncationRange& range, int n_terms, double dt);

/// Arithmetic-Brownian basis (X_{t+dt} = x + drift dt + sigma sqrt(dt) Z, so
/// beta = 1). Used to exercise the FFT fast path and as a second model route.
CosBasis make_brownian_basis(double drift, double sigma, const MarketParams& m,
                             const TruncationRange& range, int n_terms, double dt);

/// The cosine-series continuation value
///   c(x) = discount * sum' Re{ phi_k e^{i k pi (beta x - a)/(b-a)} } V_k,
/// where sum' halves the k = 0 term.
double cos_series_value(const CosBasis& basis, std::span<const double> coeffs, double x);

struct GreeksValues {
    double delta = 0.0; ///< dv/dS
    double gamma = 0.0; ///< d2v/dS2
    double vega = 0.0;  ///< dv/dsigma at fixed series coefficients
};

/// Differentiated series applied to fixed coefficients, mapped to spot
/// sensitivities through x = Phi^{-1}(s):
///   dX/dS = 1/Phi'(x),   d2X/dS2 = -Phi''(x)/Phi'(x)^3.
/// Throws NumericError when Phi'(x) vanishes.
GreeksValues cos_series_greeks(const CosBasis& basis, std::span<const double> coeffs,
                               const PolynomialMap& map, double s);

/// Fourier-cosine coefficients of the settlement penalty for one level over
/// the full range: the penalty is price-independent, so V_0 = 2 q_s(e) and
/// V_k = 0 for k >= 1.
std::vector<double> terminal_coefficients(const ContractSpec& spec,
                                          const TruncationRange& range,
                                          int n_terms, int level);

/// Coefficients of the action payoff -Phi(y) de / eta_eff over [x1, x2],
/// computed from the closed-form antiderivatives of y^n cos(w (y-a)).
std::vector<double> payoff_coefficients(const ContractSpec& spec,
                                        const PolynomialMap& map,
                                        const TruncationRange& range, int n_terms,
                                        double x1, double x2, const Action& a);

/// Coefficients of the constant rapidity penalty over [x1, x2]; zero for
/// penalty-free actions.
std::vector<double> penalty_coefficients(const ContractSpec& spec,
                                         const TruncationRange& range, int n_terms,
                                         double x1, double x2, const Action& a);

/// The transfer matrices
///   M_{k,l}(x1,x2) = (2/(b-a)) int_{x1}^{x2} e^{i l pi (beta y - a)/(b-a)}
///                    cos(k pi (y-a)/(b-a)) dy
/// split as M = -(i/pi)(M^s + M^c). Entries with l beta = +-k are removable
/// singularities evaluated by their analytic limit.
struct MklBlock {
    int n_terms = 0;
    double beta = 1.0;
    double x1 = 0.0, x2 = 0.0;
    std::vector<std::complex<double>> mc; // row k, column l
    std::vector<std::complex<double>> ms;

    std::complex<double> mc_at(int k, int l) const { return mc[static_cast<std::size_t>(k) * n_terms + l]; }
    std::complex<double> ms_at(int k, int l) const { return ms[static_cast<std::size_t>(k) * n_terms + l]; }
    std::complex<double> combined(int k, int l) const {
        return std::complex<double>(0.0, -1.0 / 3.141592653589793238462643) * (ms_at(k, l) + mc_at(k, l));
    }
};

MklBlock mkl_block(double x1, double x2, double beta, int n_terms,
                   const TruncationRange& range);

/// Continuation-value coefficients on [x1, x2] from next-date coefficients:
///   C_k = discount * sum'_l Re{ phi_l V_l M_{k,l}(x1, x2) }.
/// The first overload consumes a prebuilt block; the second computes the
/// entries on the fly; the third uses the Toeplitz/Hankel FFT algorithm and
/// requires beta = 1.
std::vector<double> continuation_coefficients(const CosBasis& basis,
                                              std::span<const double> v_next,
                                              const MklBlock& block);
std::vector<double> continuation_coefficients(const CosBasis& basis,
                                              std::span<const double> v_next,
                                              double x1, double x2);
std::vector<double> continuation_coefficients_fft(const CosBasis& basis,
                                                  std::span<const double> v_next,
                                                  double x1, double x2);

/// The range [a, b] split at the prices where the optimal action changes.
/// breakpoints has size actions.size() + 1 with breakpoints.front() = a and
/// breakpoints.back() = b; consecutive subintervals carry distinct actions.
struct SwitchPartition {
    std::vector<double> breakpoints;
    std::vector<Action> actions;
    int merged_count = 0; ///< subintervals removed by the minimum-width rule
};

/// Locates the switch points of max_r h_r(y) from per-action samples on the
/// scan grid, refines each crossing by bisection of the competing pair to
/// 1e-10 * (b-a), then merges subintervals shorter than tol_interval into
/// their left neighbour (the leading subinterval merges right).
///
/// h_scan is indexed [action][scan node]; h_exact(action, y) evaluates the
/// same objective off the grid.
SwitchPartition find_switch_partition(std::span<const Action> actions,
                                      const std::vector<std::vector<double>>& h_scan,
                                      const std::function<double(int, double)>& h_exact,
                                      std::span<const double> scan_nodes,
                                      double a, double b, double tol_interval);

/// Convenience overload building the objective
///   h(y, de) = g(Phi(y), de) + c(y, e + de) + q_b(de)
/// from the contract, the map and a continuation evaluator
/// (target level index, y) -> c.
SwitchPartition find_switch_partition(const ContractSpec& spec,
                                      const PolynomialMap& map,
                                      const TruncationRange& range, int level,
                                      const std::function<double(int, double)>& continuation,
                                      int scan_points, double tol_interval);

/// Per-date, per-level series coefficients V_k(t_m, e) for m = 1..M+1.
class CoefficientTable {
public:
    CoefficientTable() = default;
    CoefficientTable(int m_count, int level_count, int n_terms)
        : m_count_(m_count), level_count_(level_count), n_terms_(n_terms),
          data_(static_cast<std::size_t>(m_count) * level_count * n_terms, 0.0) {}

    /// m = 1..M+1.
    std::span<double> at(int m, int level) {
        return {&data_[offset(m, level)], static_cast<std::size_t>(n_terms_)};
    }
    std::span<const double> at(int m, int level) const {
        return {&data_[offset(m, level)], static_cast<std::size_t>(n_terms_)};
    }

    int m_count() const { return m_count_; }
    int level_count() const { return level_count_; }
    int n_terms() const { return n_terms_; }
    bool empty() const { return data_.empty(); }

private:
    std::size_t offset(int m, int level) const {
        return (static_cast<std::size_t>(m - 1) * level_count_ + level) * n_terms_;
    }

    int m_count_ = 0;
    int level_count_ = 0;
    int n_terms_ = 0;
    std::vector<double> data_;
};

struct ValuationDiagnostics {
    std::size_t total_subintervals = 0;
    int max_subintervals = 0;
    std::size_t merged_subintervals = 0;
    double runtime_ms = 0.0;
};

struct ValuationResult {
    double value_at_start = 0.0;          ///< v(t0, S0, e_start)
    std::vector<double> values_per_level; ///< v(t0, S0, e) for every grid level
    std::optional<GreeksValues> greeks;   ///< initial-time Greeks at (S0, e_start)
    ValuationDiagnostics diagnostics;
};

struct GreeksRow {
    double s = 0.0;
    double e = 0.0;
    GreeksValues greeks;
};

/// Backward-induction pricer. Run once, then query values and Greeks at any
/// exercise date from the retained coefficient table.
class CosPricer {
public:
    CosPricer(ContractSpec spec, PriceModel model, CosConfig config);

    /// Recovers all coefficients backward in time and evaluates the t0 value.
    /// Throws std::invalid_argument when the contract fails validation and
    /// NumericError when coefficients degenerate (reported with date and level).
    const ValuationResult& run();

    bool has_run() const { return has_run_; }
    const ValuationResult& result() const { return result_; }
    const CosBasis& basis() const { return basis_; }
    const CoefficientTable& table() const { return table_; }
    const ContractSpec& spec() const { return spec_; }
    const PriceModel& model() const { return model_; }

    /// t0 value as a function of the spot: the continuation series at
    /// x = Phi^{-1}(s) with the t1 coefficients of `level`.
    double value_at_spot(double s, int level) const;

    /// Greeks at exercise date t_index (0..M) after the action has been
    /// taken, for spot s and post-action level e.
    GreeksValues greeks_at(int t_index, double s, double e) const;

    /// greeks_at mapped over a spot grid and every energy level.
    std::vector<GreeksRow> greeks_surface(int t_index, std::span<const double> spots) const;

private:
    ContractSpec spec_;
    PriceModel model_;
    CosConfig config_;
    CosBasis basis_;
    CoefficientTable table_;
    ValuationResult result_;
    bool has_run_ = false;
};

/// One-call form of the pricer.
ValuationResult backward_induction(const ContractSpec& spec, const PriceModel& model,
                                   const CosConfig& config);

} // namespace esv
