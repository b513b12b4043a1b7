#include "esv/cos_pricer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "esv/errors.hpp"

namespace esv {

namespace {

constexpr double kPi = 3.141592653589793238462643;
// Below this |l beta +- k| the transfer-matrix entry switches to the
// cancellation-free sine form (which is exact at the removable singularity).
constexpr double kSingularBand = 1e-4;

using cplx = std::complex<double>;

// (e^{i (d x2 - lk a) w} - e^{i (d x1 - lk a) w}) / d, evaluated through the
// identity e^{i t2} - e^{i t1} = 2 i sin((t2-t1)/2) e^{i (t1+t2)/2} near d = 0
// so that the removable singularity and its neighbourhood are exact.
cplx phase_quotient(double d, double lk, double w, double a, double x1, double x2) {
    if (std::abs(d) < kSingularBand) {
        const double half = 0.5 * w * (x2 - x1);
        const double ratio = (d == 0.0) ? w * (x2 - x1) : 2.0 * std::sin(d * half) / d;
        const double mid = w * (0.5 * d * (x1 + x2) - lk * a);
        return cplx(0.0, ratio) * std::polar(1.0, mid);
    }
    return (std::polar(1.0, (d * x2 - lk * a) * w) - std::polar(1.0, (d * x1 - lk * a) * w)) / d;
}

// C_n = int_{x1}^{x2} y^n cos(w (y-a)) dy and S_n likewise with sin, built by
// the integration-by-parts recurrence. w = 0 is the plain power integral.
void cos_sin_moments(double x1, double x2, double a, double w, int deg,
                     std::vector<double>& C, std::vector<double>& S) {
    C.assign(deg + 1, 0.0);
    S.assign(deg + 1, 0.0);
    if (w == 0.0) {
        double p1 = x1, p2 = x2;
        for (int n = 0; n <= deg; ++n) {
            C[n] = (p2 - p1) / (n + 1);
            p1 *= x1;
            p2 *= x2;
        }
        return;
    }
    const double s1 = std::sin(w * (x1 - a)), c1 = std::cos(w * (x1 - a));
    const double s2 = std::sin(w * (x2 - a)), c2 = std::cos(w * (x2 - a));
    C[0] = (s2 - s1) / w;
    S[0] = (c1 - c2) / w;
    double p1 = x1, p2 = x2; // y^n at the endpoints
    for (int n = 1; n <= deg; ++n) {
        C[n] = (p2 * s2 - p1 * s1) / w - n / w * S[n - 1];
        S[n] = (p1 * c1 - p2 * c2) / w + n / w * C[n - 1];
        p1 *= x1;
        p2 *= x2;
    }
}

void check_basis(const CosBasis& basis) {
    if (basis.n_terms < 1 || !(basis.range.b > basis.range.a)) {
        throw std::invalid_argument("CosBasis: empty series or degenerate range");
    }
}

void run_parallel(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < count; i += workers) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

void fft_radix2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cplx wlen = std::polar(1.0, ang);
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

std::vector<cplx> circular_convolution(std::vector<cplx> x, std::vector<cplx> y) {
    fft_radix2(x, false);
    fft_radix2(y, false);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
    fft_radix2(x, true);
    return x;
}

} // namespace

CosBasis make_ou_basis(const OUParams& p, const MarketParams& m,
                       const TruncationRange& range, int n_terms, double dt) {
    validate(p);
    validate(m);
    if (!(dt > 0.0)) throw std::domain_error("make_ou_basis: dt must be > 0");
    CosBasis basis;
    basis.range = range;
    basis.n_terms = n_terms;
    basis.dt = dt;
    basis.beta = ou_state_factor(p, dt);
    basis.discount = std::exp(-m.r * dt);
    basis.phi.resize(n_terms);
    basis.phi_dsigma.resize(n_terms);
    for (int k = 0; k < n_terms; ++k) {
        const double u = basis.freq(k);
        basis.phi[k] = ou_char_fn(p, u, dt);
        basis.phi_dsigma[k] = ou_char_fn_dsigma(p, u, dt);
    }
    check_basis(basis);
    return basis;
}

CosBasis make_brownian_basis(double drift, double sigma, const MarketParams& m,
                             const TruncationRange& range, int n_terms, double dt) {
    validate(m);
    if (!(sigma > 0.0) || !(dt > 0.0)) {
        throw std::domain_error("make_brownian_basis: sigma and dt must be > 0");
    }
    CosBasis basis;
    basis.range = range;
    basis.n_terms = n_terms;
    basis.dt = dt;
    basis.beta = 1.0;
    basis.discount = std::exp(-m.r * dt);
    basis.phi.resize(n_terms);
    basis.phi_dsigma.resize(n_terms);
    for (int k = 0; k < n_terms; ++k) {
        const double u = basis.freq(k);
        basis.phi[k] = std::exp(cplx(-0.5 * u * u * sigma * sigma * dt, u * drift * dt));
        basis.phi_dsigma[k] = basis.phi[k] * (-u * u * sigma * dt);
    }
    check_basis(basis);
    return basis;
}

double cos_series_value(const CosBasis& basis, std::span<const double> coeffs, double x) {
    const double w = kPi / basis.range.width();
    const cplx z = std::polar(1.0, w * (basis.beta * x - basis.range.a));
    cplx zk(1.0, 0.0);
    double acc = 0.5 * basis.phi[0].real() * coeffs[0];
    for (int k = 1; k < basis.n_terms; ++k) {
        zk *= z;
        acc += (basis.phi[k].real() * zk.real() - basis.phi[k].imag() * zk.imag()) * coeffs[k];
    }
    return basis.discount * acc;
}

GreeksValues cos_series_greeks(const CosBasis& basis, std::span<const double> coeffs,
                               const PolynomialMap& map, double s) {
    const double x = map.inverse(s);
    const double d1 = map.derivative(x);
    if (std::abs(d1) < 1e-14) {
        throw NumericError("cos_series_greeks: map derivative vanishes at x=" + std::to_string(x));
    }
    const double dx_ds = 1.0 / d1;
    const double d2x_ds2 = -map.second_derivative(x) * dx_ds * dx_ds * dx_ds;

    const double w = kPi / basis.range.width();
    const cplx z = std::polar(1.0, w * (basis.beta * x - basis.range.a));
    cplx zk(1.0, 0.0);
    double sum_dx = 0.0, sum_dxx = 0.0;
    double sum_vega = 0.5 * basis.phi_dsigma[0].real() * coeffs[0];
    for (int k = 1; k < basis.n_terms; ++k) {
        zk *= z;
        const double f = k * w * basis.beta; // series factor i k pi beta / (b-a)
        const cplx pz = basis.phi[k] * zk;
        sum_dx += -pz.imag() * f * coeffs[k];          // Re{ pz * i f }
        sum_dxx += -pz.real() * f * f * coeffs[k];     // Re{ pz * (i f)^2 }
        const cplx vz = basis.phi_dsigma[k] * zk;
        sum_vega += vz.real() * coeffs[k];
    }
    GreeksValues g;
    const double disc = basis.discount;
    g.delta = dx_ds * disc * sum_dx;
    g.gamma = dx_ds * dx_ds * disc * sum_dxx + d2x_ds2 * disc * sum_dx;
    g.vega = disc * sum_vega;
    return g;
}

std::vector<double> terminal_coefficients(const ContractSpec& spec,
                                          const TruncationRange& range,
                                          int n_terms, int level) {
    (void)range; // the constant integrand makes every k >= 1 coefficient vanish
    std::vector<double> v(n_terms, 0.0);
    v[0] = 2.0 * settlement_penalty(spec, spec.grid.level(level));
    return v;
}

std::vector<double> payoff_coefficients(const ContractSpec& spec,
                                        const PolynomialMap& map,
                                        const TruncationRange& range, int n_terms,
                                        double x1, double x2, const Action& a) {
    std::vector<double> g(n_terms, 0.0);
    if (a.steps == 0) return g;
    const double eta_eff = a.steps > 0 ? spec.eta : 1.0;
    const double scale = -2.0 * a.de / (eta_eff * range.width());
    const auto& p = map.coefficients();
    const int deg = map.degree();
    std::vector<double> C, S;
    for (int k = 0; k < n_terms; ++k) {
        cos_sin_moments(x1, x2, range.a, k * kPi / range.width(), deg, C, S);
        double integral = 0.0;
        for (int n = 0; n <= deg; ++n) integral += p[n] * C[n];
        g[k] = scale * integral;
    }
    return g;
}

std::vector<double> penalty_coefficients(const ContractSpec& spec,
                                         const TruncationRange& range, int n_terms,
                                         double x1, double x2, const Action& a) {
    std::vector<double> q(n_terms, 0.0);
    if (is_penalty_free(spec, a)) return q;
    const double width = range.width();
    q[0] = 2.0 * spec.q_b_value * (x2 - x1) / width;
    for (int k = 1; k < n_terms; ++k) {
        q[k] = 2.0 * spec.q_b_value / (kPi * k) *
               (std::sin(k * kPi * (x2 - range.a) / width) -
                std::sin(k * kPi * (x1 - range.a) / width));
    }
    return q;
}

MklBlock mkl_block(double x1, double x2, double beta, int n_terms,
                   const TruncationRange& range) {
    if (!(range.a <= x1 && x1 <= x2 && x2 <= range.b)) {
        throw std::invalid_argument("mkl_block: need a <= x1 <= x2 <= b");
    }
    MklBlock block;
    block.n_terms = n_terms;
    block.beta = beta;
    block.x1 = x1;
    block.x2 = x2;
    block.mc.resize(static_cast<std::size_t>(n_terms) * n_terms);
    block.ms.resize(static_cast<std::size_t>(n_terms) * n_terms);
    const double w = kPi / range.width();
    for (int k = 0; k < n_terms; ++k) {
        for (int l = 0; l < n_terms; ++l) {
            const std::size_t idx = static_cast<std::size_t>(k) * n_terms + l;
            block.mc[idx] = phase_quotient(l * beta + k, l + k, w, range.a, x1, x2);
            block.ms[idx] = phase_quotient(l * beta - k, l - k, w, range.a, x1, x2);
        }
    }
    return block;
}

std::vector<double> continuation_coefficients(const CosBasis& basis,
                                              std::span<const double> v_next,
                                              const MklBlock& block) {
    const int n = basis.n_terms;
    std::vector<cplx> u(n);
    for (int l = 0; l < n; ++l) u[l] = basis.phi[l] * v_next[l];
    u[0] *= 0.5;
    std::vector<double> out(n, 0.0);
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int l = 0; l < n; ++l) {
            acc += u[l] * (block.ms_at(k, l) + block.mc_at(k, l));
        }
        out[k] = basis.discount / kPi * acc.imag();
    }
    return out;
}

std::vector<double> continuation_coefficients(const CosBasis& basis,
                                              std::span<const double> v_next,
                                              double x1, double x2) {
    const int n = basis.n_terms;
    const double a = basis.range.a;
    const double w = kPi / basis.range.width();
    const double beta = basis.beta;

    // u_l A_l(x) with A_l(x) = e^{i l (beta x - a) w}; B_k(x) = e^{i k (x - a) w}.
    std::vector<cplx> uA1(n), uA2(n), B1(n), B2(n);
    const cplx a1 = std::polar(1.0, (beta * x1 - a) * w);
    const cplx a2 = std::polar(1.0, (beta * x2 - a) * w);
    const cplx b1 = std::polar(1.0, (x1 - a) * w);
    const cplx b2 = std::polar(1.0, (x2 - a) * w);
    cplx pa1(1.0, 0.0), pa2(1.0, 0.0), pb1(1.0, 0.0), pb2(1.0, 0.0);
    for (int l = 0; l < n; ++l) {
        const cplx u = basis.phi[l] * v_next[l] * (l == 0 ? 0.5 : 1.0);
        uA1[l] = u * pa1;
        uA2[l] = u * pa2;
        B1[l] = pb1;
        B2[l] = pb2;
        pa1 *= a1;
        pa2 *= a2;
        pb1 *= b1;
        pb2 *= b2;
    }

    std::vector<double> out(n, 0.0);
    for (int k = 0; k < n; ++k) {
        const cplx bk1 = B1[k], bk2 = B2[k];
        const cplx cbk1 = std::conj(bk1), cbk2 = std::conj(bk2);
        double acc_im = 0.0;
        for (int l = 0; l < n; ++l) {
            const double dplus = l * beta + k;
            const double dminus = l * beta - k;
            cplx term;
            if (dplus >= kSingularBand && std::abs(dminus) >= kSingularBand) {
                term = (uA2[l] * bk2 - uA1[l] * bk1) / dplus +
                       (uA2[l] * cbk2 - uA1[l] * cbk1) / dminus;
            } else {
                const cplx u = basis.phi[l] * v_next[l] * (l == 0 ? 0.5 : 1.0);
                term = u * (phase_quotient(dplus, l + k, w, a, x1, x2) +
                            phase_quotient(dminus, l - k, w, a, x1, x2));
            }
            acc_im += term.imag();
        }
        out[k] = basis.discount / kPi * acc_im;
    }
    return out;
}

std::vector<double> continuation_coefficients_fft(const CosBasis& basis,
                                                  std::span<const double> v_next,
                                                  double x1, double x2) {
    if (std::abs(basis.beta - 1.0) > 1e-12) {
        throw std::invalid_argument("continuation_coefficients_fft: requires beta = 1");
    }
    const int n = basis.n_terms;
    const double a = basis.range.a;
    const double w = kPi / basis.range.width();

    // With beta = 1 both matrix parts read off one sequence
    // m_j = phase_quotient(j, j, ...), j = -(N-1)..2N-2, with m_{-j} = conj(m_j):
    // M^s_{k,l} = m_{l-k} (Toeplitz) and M^c_{k,l} = m_{l+k} (Hankel).
    std::vector<cplx> m(2 * n - 1);
    for (int j = 0; j < 2 * n - 1; ++j) {
        m[j] = phase_quotient(j, j, w, a, x1, x2);
    }

    std::size_t size = 1;
    while (size < static_cast<std::size_t>(2 * n)) size <<= 1;

    std::vector<cplx> u(size, cplx(0.0, 0.0));
    for (int l = 0; l < n; ++l) u[l] = basis.phi[l] * v_next[l];
    u[0] *= 0.5;

    // Toeplitz part: M^s_{k,l} = m_{l-k}, so the circulant column carries
    // t_i = m_{-i} = -conj(m_i) below the diagonal and m_i above it.
    std::vector<cplx> col(size, cplx(0.0, 0.0));
    col[0] = m[0];
    for (int j = 1; j < n; ++j) col[j] = -std::conj(m[j]);
    for (int j = 1; j < n; ++j) col[size - j] = m[j];
    const auto toeplitz = circular_convolution(col, u);

    // Hankel part against the reversed input: entries m_{k+l} become a
    // Toeplitz stencil m_{(k-j)+N-1} after l -> N-1-j.
    std::vector<cplx> ur(size, cplx(0.0, 0.0));
    for (int l = 0; l < n; ++l) ur[l] = u[n - 1 - l];
    std::vector<cplx> col2(size, cplx(0.0, 0.0));
    for (int j = 0; j < n; ++j) col2[j] = m[j + n - 1];
    for (int j = 1; j < n; ++j) col2[size - j] = m[n - 1 - j];
    const auto hankel = circular_convolution(col2, ur);

    std::vector<double> out(n, 0.0);
    for (int k = 0; k < n; ++k) {
        out[k] = basis.discount / kPi * (toeplitz[k].imag() + hankel[k].imag());
    }
    return out;
}

SwitchPartition find_switch_partition(std::span<const Action> actions,
                                      const std::vector<std::vector<double>>& h_scan,
                                      const std::function<double(int, double)>& h_exact,
                                      std::span<const double> scan_nodes,
                                      double a, double b, double tol_interval) {
    const int n_actions = static_cast<int>(actions.size());
    const int n_nodes = static_cast<int>(scan_nodes.size());
    if (n_actions < 1 || n_nodes < 2) {
        throw std::invalid_argument("find_switch_partition: need >= 1 action and >= 2 nodes");
    }

    // Argmax per node; ties go to the smallest energy change.
    std::vector<int> best(n_nodes);
    for (int p = 0; p < n_nodes; ++p) {
        int arg = 0;
        double top = h_scan[0][p];
        for (int r = 1; r < n_actions; ++r) {
            const double h = h_scan[r][p];
            if (h > top ||
                (h == top && std::abs(actions[r].steps) < std::abs(actions[arg].steps))) {
                top = h;
                arg = r;
            }
        }
        best[p] = arg;
    }

    const double refine_tol = 1e-10 * (b - a);
    SwitchPartition part;
    part.breakpoints.push_back(a);
    part.actions.push_back(actions[best[0]]);
    for (int p = 1; p < n_nodes; ++p) {
        if (best[p] == best[p - 1]) continue;
        const int r1 = best[p - 1], r2 = best[p];
        double lo = scan_nodes[p - 1], hi = scan_nodes[p];
        while (hi - lo > refine_tol) {
            const double mid = 0.5 * (lo + hi);
            const double d = h_exact(r1, mid) - h_exact(r2, mid);
            if (d > 0.0) lo = mid; else hi = mid;
        }
        part.breakpoints.push_back(0.5 * (lo + hi));
        part.actions.push_back(actions[r2]);
    }
    part.breakpoints.push_back(b);

    // Drop subintervals shorter than tol_interval, absorbing into the left
    // neighbour (the leading one merges right instead).
    if (tol_interval > 0.0) {
        bool merged = true;
        while (merged && part.actions.size() > 1) {
            merged = false;
            for (std::size_t i = 0; i < part.actions.size(); ++i) {
                if (part.breakpoints[i + 1] - part.breakpoints[i] >= tol_interval) continue;
                if (i == 0) {
                    part.breakpoints.erase(part.breakpoints.begin() + 1);
                    part.actions.erase(part.actions.begin());
                } else {
                    part.breakpoints.erase(part.breakpoints.begin() + i);
                    part.actions.erase(part.actions.begin() + i);
                }
                ++part.merged_count;
                merged = true;
                break;
            }
        }
    }

    // Collapse neighbours that ended up with the same action.
    for (std::size_t i = 1; i < part.actions.size();) {
        if (part.actions[i].steps == part.actions[i - 1].steps) {
            part.actions.erase(part.actions.begin() + i);
            part.breakpoints.erase(part.breakpoints.begin() + i);
        } else {
            ++i;
        }
    }
    return part;
}

SwitchPartition find_switch_partition(const ContractSpec& spec,
                                      const PolynomialMap& map,
                                      const TruncationRange& range, int level,
                                      const std::function<double(int, double)>& continuation,
                                      int scan_points, double tol_interval) {
    if (scan_points < 2) {
        throw std::invalid_argument("find_switch_partition: scan_points must be >= 2");
    }
    const double e = spec.grid.level(level);
    const auto actions = allowed_actions(spec, e);
    std::vector<double> nodes(scan_points);
    for (int p = 0; p < scan_points; ++p) {
        nodes[p] = range.a + range.width() * p / (scan_points - 1);
    }
    auto h_of = [&](int r, double y) {
        const Action& act = actions[r];
        const double qb = is_penalty_free(spec, act) ? 0.0 : spec.q_b_value;
        return payoff(spec, map(y), act) + continuation(level + act.steps, y) + qb;
    };
    std::vector<std::vector<double>> h_scan(actions.size(), std::vector<double>(scan_points));
    for (std::size_t r = 0; r < actions.size(); ++r) {
        for (int p = 0; p < scan_points; ++p) h_scan[r][p] = h_of(static_cast<int>(r), nodes[p]);
    }
    return find_switch_partition(actions, h_scan, h_of, nodes, range.a, range.b, tol_interval);
}

CosPricer::CosPricer(ContractSpec spec, PriceModel model, CosConfig config)
    : spec_(std::move(spec)), model_(std::move(model)), config_(config) {}

const ValuationResult& CosPricer::run() {
    const auto t_begin = std::chrono::steady_clock::now();

    const auto report = validate_spec(spec_);
    if (!report.ok()) {
        std::string msg = "contract validation failed";
        for (const auto& e : report.errors) msg += "; " + e;
        throw std::invalid_argument(msg);
    }
    validate(model_.ou);
    validate(model_.market);
    if (config_.n_terms < 16) {
        throw std::invalid_argument("CosConfig: n_terms must be >= 16");
    }

    const int N = config_.n_terms;
    const int M = spec_.time.n_exercise;
    const int L = spec_.grid.level_count();
    const double dt = spec_.time.dt();
    const double horizon = config_.range_horizon > 0.0
                               ? config_.range_horizon
                               : spec_.time.settlement() - spec_.time.t0;
    const auto range = truncation_range(model_.ou, horizon, config_.l_bar);
    basis_ = make_ou_basis(model_.ou, model_.market, range, N, dt);

    struct LevelAction {
        Action action;
        int target;
        double qb;
    };
    std::vector<std::vector<LevelAction>> acts(L);
    for (int j = 0; j < L; ++j) {
        for (const auto& a : allowed_actions(spec_, spec_.grid.level(j))) {
            acts[j].push_back({a, j + a.steps, is_penalty_free(spec_, a) ? 0.0 : spec_.q_b_value});
        }
    }

    // Which levels participate at each date (all of them unless pruning).
    std::vector<std::vector<char>> needed(M + 2, std::vector<char>(L, 1));
    if (config_.prune_unreachable) {
        for (auto& row : needed) std::fill(row.begin(), row.end(), 0);
        needed[1][spec_.grid.index_of(spec_.e_start)] = 1;
        for (int m = 1; m <= M; ++m) {
            for (int j = 0; j < L; ++j) {
                if (!needed[m][j]) continue;
                for (const auto& la : acts[j]) needed[m + 1][la.target] = 1;
            }
        }
    }

    table_ = CoefficientTable(M + 1, L, N);
    result_ = ValuationResult{};

    for (int j = 0; j < L; ++j) {
        if (!needed[M + 1][j]) continue;
        const auto v = terminal_coefficients(spec_, range, N, j);
        std::copy(v.begin(), v.end(), table_.at(M + 1, j).begin());
    }

    const int scan_points = config_.scan_points > 0 ? config_.scan_points
                                                    : std::max(1000, 5 * N);
    const double tol_interval = config_.tol_interval >= 0.0 ? config_.tol_interval
                                                            : range.width() * 1e-4;
    std::vector<double> nodes(scan_points), phi_nodes(scan_points);
    for (int p = 0; p < scan_points; ++p) {
        nodes[p] = range.a + range.width() * p / (scan_points - 1);
        phi_nodes[p] = model_.map(nodes[p]);
    }

    std::vector<std::vector<double>> cont_scan(L, std::vector<double>(scan_points, 0.0));
    std::mutex diag_mutex;

    for (int m = M; m >= 1; --m) {
        run_parallel(L, config_.threads, [&](int j) {
            if (!needed[m + 1][j]) return;
            const auto v_next = table_.at(m + 1, j);
            for (int p = 0; p < scan_points; ++p) {
                cont_scan[j][p] = cos_series_value(basis_, v_next, nodes[p]);
            }
        });

        run_parallel(L, config_.threads, [&](int j) {
            if (!needed[m][j]) return;
            const auto& actions = acts[j];
            std::vector<Action> plain(actions.size());
            std::vector<std::vector<double>> h_scan(actions.size(),
                                                    std::vector<double>(scan_points));
            for (std::size_t r = 0; r < actions.size(); ++r) {
                plain[r] = actions[r].action;
                const double rate = actions[r].action.steps > 0
                                        ? -actions[r].action.de / spec_.eta
                                        : -actions[r].action.de;
                const auto& cont = cont_scan[actions[r].target];
                auto& row = h_scan[r];
                for (int p = 0; p < scan_points; ++p) {
                    row[p] = rate * phi_nodes[p] + cont[p] + actions[r].qb;
                }
            }
            auto h_exact = [&](int r, double y) {
                const auto& la = actions[r];
                return payoff(spec_, model_.map(y), la.action) +
                       cos_series_value(basis_, table_.at(m + 1, la.target), y) + la.qb;
            };
            const auto part = find_switch_partition(plain, h_scan, h_exact, nodes,
                                                    range.a, range.b, tol_interval);

            std::vector<double> v(N, 0.0);
            for (std::size_t i = 0; i < part.actions.size(); ++i) {
                const double x1 = part.breakpoints[i];
                const double x2 = part.breakpoints[i + 1];
                const Action& act = part.actions[i];
                const int target = j + act.steps;
                const auto c = continuation_coefficients(basis_, table_.at(m + 1, target), x1, x2);
                for (int k = 0; k < N; ++k) v[k] += c[k];
                if (act.steps != 0) {
                    const auto g = payoff_coefficients(spec_, model_.map, range, N, x1, x2, act);
                    for (int k = 0; k < N; ++k) v[k] += g[k];
                    if (!is_penalty_free(spec_, act)) {
                        const auto q = penalty_coefficients(spec_, range, N, x1, x2, act);
                        for (int k = 0; k < N; ++k) v[k] += q[k];
                    }
                }
            }
            for (int k = 0; k < N; ++k) {
                if (!std::isfinite(v[k])) {
                    throw NumericError("backward induction: non-finite coefficient at date index " +
                                       std::to_string(m) + ", level " +
                                       std::to_string(spec_.grid.level(j)));
                }
            }
            std::copy(v.begin(), v.end(), table_.at(m, j).begin());

            std::lock_guard<std::mutex> lock(diag_mutex);
            result_.diagnostics.total_subintervals += part.actions.size();
            result_.diagnostics.merged_subintervals += part.merged_count;
            result_.diagnostics.max_subintervals =
                std::max(result_.diagnostics.max_subintervals,
                         static_cast<int>(part.actions.size()));
        });
    }

    const int start_level = spec_.grid.index_of(spec_.e_start);
    result_.values_per_level.assign(L, 0.0);
    for (int j = 0; j < L; ++j) {
        if (!needed[1][j] && j != start_level) continue;
        result_.values_per_level[j] = cos_series_value(basis_, table_.at(1, j), model_.ou.x0);
    }
    result_.value_at_start = result_.values_per_level[start_level];
    if (!std::isfinite(result_.value_at_start)) {
        throw NumericError("backward induction: non-finite contract value");
    }
    result_.greeks = cos_series_greeks(basis_, table_.at(1, start_level), model_.map,
                                       model_.spot0());

    result_.diagnostics.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_begin)
            .count();
    has_run_ = true;
    if (!config_.keep_table) table_ = CoefficientTable();
    return result_;
}

double CosPricer::value_at_spot(double s, int level) const {
    if (!has_run_ || table_.empty()) {
        throw std::logic_error("CosPricer: run() with keep_table before value_at_spot");
    }
    return cos_series_value(basis_, table_.at(1, level), model_.map.inverse(s));
}

GreeksValues CosPricer::greeks_at(int t_index, double s, double e) const {
    if (!has_run_ || table_.empty()) {
        throw std::logic_error("CosPricer: run() with keep_table before greeks_at");
    }
    if (t_index < 0 || t_index > spec_.time.n_exercise) {
        throw std::invalid_argument("greeks_at: t_index must lie in [0, M]");
    }
    const int level = spec_.grid.index_of(e);
    return cos_series_greeks(basis_, table_.at(t_index + 1, level), model_.map, s);
}

std::vector<GreeksRow> CosPricer::greeks_surface(int t_index,
                                                 std::span<const double> spots) const {
    std::vector<GreeksRow> rows;
    rows.reserve(spots.size() * spec_.grid.level_count());
    for (const double s : spots) {
        for (int j = 0; j < spec_.grid.level_count(); ++j) {
            const double e = spec_.grid.level(j);
            rows.push_back({s, e, greeks_at(t_index, s, e)});
        }
    }
    return rows;
}

ValuationResult backward_induction(const ContractSpec& spec, const PriceModel& model,
                                   const CosConfig& config) {
    CosPricer pricer(spec, model, config);
    pricer.run();
    return pricer.result();
}

} // namespace esv
