#pragma once

// Thermal two-point correlators <x(t) x(0)^T> (non-symmetrized operator order).

#include "errors.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "spectral.hpp"
#include "symplectic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace qfluct::correlator {

struct ThermalState {
    double beta = std::numeric_limits<double>::infinity(); // 1/energy; infinity = ground state
    double hbar = hbar_si;

    static ThermalState ground(double hbar = hbar_si) { return {std::numeric_limits<double>::infinity(), hbar}; }
    static ThermalState from_temperature(double kelvin, double hbar = hbar_si, double kb = kb_si) {
        if (!(kelvin >= 0.0)) raise(errc::invalid_argument, "temperature must be nonnegative");
        return {kelvin == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (kb * kelvin), hbar};
    }
    bool is_ground() const { return std::isinf(beta); }
};

// (coth(beta hbar w / 2) - 1)/2
inline double nth(const ThermalState& st, double omega) {
    if (omega == 0.0) raise(errc::zero_frequency, "thermal occupation at zero frequency");
    if (st.is_ground()) return omega > 0 ? 0.0 : -1.0;
    return 1.0 / std::expm1(st.beta * st.hbar * omega);
}

inline CMat equal_time_block(const ThermalState& st, double omega) {
    const double n = nth(st, omega);
    return st.hbar * (n + 0.5) * CMat::Identity(2, 2) - (st.hbar / 2.0) * la::sigma_y();
}

// value(t) = sum_j coeff_j exp(-i omega_j t)
struct SpectralTerm {
    double omega;
    CMat coeff;
};

struct CorrelatorSeries {
    std::vector<double> times;
    std::vector<CMat> values;
    std::vector<std::string> labels;
    std::vector<SpectralTerm> spectral; // empty when computed in the time domain

    bool has_spectral() const { return !spectral.empty(); }
    int dim() const { return values.empty() ? static_cast<int>(labels.size()) : static_cast<int>(values[0].rows()); }
};

inline CMat evaluate_terms(const std::vector<SpectralTerm>& terms, double t, int dim) {
    CMat acc = CMat::Zero(dim, dim);
    for (const auto& term : terms) acc += term.coeff * std::exp(cplx(0.0, -term.omega * t));
    return acc;
}

inline CorrelatorSeries series_from_terms(std::vector<SpectralTerm> terms, const std::vector<double>& times, int dim,
                                          std::vector<std::string> labels = {}) {
    CorrelatorSeries s;
    s.times = times;
    s.labels = std::move(labels);
    s.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) s.values[k] = evaluate_terms(terms, times[k], dim);
    s.spectral = std::move(terms);
    return s;
}

// hbar/W [(n+1) plus e^{-iWt} + n minus e^{iWt}] per atom
inline std::vector<SpectralTerm> atom_terms(const SpectralMeasure& m, const ThermalState& st) {
    std::vector<SpectralTerm> out;
    for (const auto& a : m.atoms) {
        const double n = nth(st, a.omega);
        out.push_back({a.omega, (st.hbar * (n + 1.0) / a.omega) * a.plus});
        if (n != 0.0) out.push_back({-a.omega, (st.hbar * n / a.omega) * a.minus});
    }
    return out;
}

inline CorrelatorSeries correlate_lossless(const SpectralMeasure& m, const ThermalState& st, const std::vector<double>& times,
                                           std::vector<std::string> labels = {}) {
    if (m.has_density()) raise(errc::lossy_measure, "measure has a continuous density; use correlate_lossy");
    return series_from_terms(atom_terms(m, st), times, m.dim, std::move(labels));
}

// exp(tJh) S blockdiag(thermal blocks, 0) S^T
inline CorrelatorSeries correlate_phase_space(const Mat& h, const Mat& j, const ThermalState& st, const std::vector<double>& times,
                                              std::vector<std::string> labels = {}) {
    auto w = symplectic::williamson(h, j);
    const Eigen::Index d = h.rows();
    CMat y0 = CMat::Zero(d, d);
    for (std::size_t k = 0; k < w.frequencies.size(); ++k) {
        int i = w.dyn_indices[k].first;
        y0.block(i, i, 2, 2) = equal_time_block(st, w.frequencies[k]);
    }
    CMat sc = w.S.cast<cplx>();
    CMat x0 = sc * y0 * sc.transpose();
    CorrelatorSeries s;
    s.times = times;
    s.labels = std::move(labels);
    for (double t : times) s.values.push_back(symplectic::fundamental(h, j, t).cast<cplx>() * x0);
    return s;
}

inline CorrelatorSeries project(const CorrelatorSeries& s, const Mat& p, std::vector<std::string> labels = {}) {
    CorrelatorSeries out;
    out.times = s.times;
    out.labels = std::move(labels);
    CMat pc = p.cast<cplx>();
    for (const auto& v : s.values) out.values.push_back(pc * v * pc.transpose());
    for (const auto& term : s.spectral) out.spectral.push_back({term.omega, pc * term.coeff * pc.transpose()});
    return out;
}

struct QuadratureOptions {
    double omega_min = 0.0; // infrared cutoff; 0 requires an integrable density at the origin
    double omega_max = 0.0; // 0 = peaks + 40 widths
    int n_points = 32;      // Gauss-Legendre nodes per panel
    int max_doublings = 5;
    double tol = 1e-6;
};

namespace detail {

struct GaussRule {
    std::vector<double> x, w;
};

// nodes and weights on [-1, 1] by Newton iteration on P_n
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5)), pp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p1 = 1.0, p2 = 0.0;
            for (int k = 1; k <= n; ++k) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * k - 1.0) * z * p2 - (k - 1.0) * p3) / k;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

inline std::vector<double> panel_edges(const SpectralMeasure& m, double lo, double hi, double t_max, int n_points) {
    std::vector<double> e{lo, hi};
    const double width = m.peak_width > 0 ? m.peak_width : (hi - lo) / 100.0;
    for (double p : m.peaks)
        for (double k : {0.0, 0.25, 1.0, 3.0, 10.0, 30.0, 100.0})
            for (double sgn : {-1.0, 1.0}) {
                double x = p + sgn * k * width;
                if (x > lo && x < hi) e.push_back(x);
            }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    // split panels so the phase e^{-iwt} turns at most ~n/4 radians per panel
    const double max_len = t_max > 0 ? 0.25 * n_points / t_max : hi - lo;
    std::vector<double> out{e.front()};
    for (std::size_t k = 1; k < e.size(); ++k) {
        double a = out.back(), b = e[k];
        int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
        // geometric split of the first panel when it starts near the origin
        for (int q = 1; q <= pieces; ++q) out.push_back(a + (b - a) * q / pieces);
    }
    return out;
}

} // namespace detail

// hbar/pi * int dw/w [(n(w)+1) D(w) e^{-iwt} + n(w) D(-w) e^{iwt}] over [omega_min, omega_max]
inline CorrelatorSeries correlate_lossy(const SpectralMeasure& m, const ThermalState& st, const std::vector<double>& times,
                                        QuadratureOptions opt = {}, std::vector<std::string> labels = {}) {
    if (!m.has_density()) raise(errc::invalid_argument, "correlate_lossy needs a measure with a density");
    double peak = 0.0;
    for (double p : m.peaks) peak = std::max(peak, p);
    if (opt.omega_max <= 0.0) opt.omega_max = peak + 40.0 * std::max(m.peak_width, 1e-3 * std::max(peak, 1.0));
    if (opt.omega_min < 0.0 || opt.omega_min >= opt.omega_max) raise(errc::invalid_argument, "bad quadrature range");
    if (opt.omega_min == 0.0) {
        // power-law behaviour of the density at the origin
        const double ref = peak > 0 ? peak : opt.omega_max;
        const double d1 = 1e-6 * ref, d2 = 2e-6 * ref;
        auto mag = [&](double w) {
            return st.is_ground() ? m.density(w).norm() : (m.density(w) + m.density(-w)).norm();
        };
        double a = mag(d1), b = mag(d2);
        double need = st.is_ground() ? 0.5 : 1.5;
        if (a > 0.0 && std::log2(b / a) < need)
            raise(errc::infrared_divergent,
                  "density does not vanish fast enough at w=0; the integral diverges without an infrared cutoff (omega_min)");
    }
    double t_max = 0.0;
    for (double t : times) t_max = std::max(t_max, std::abs(t));
    const int dim = m.dim;

    auto build = [&](int npts) {
        std::vector<SpectralTerm> terms;
        const auto& rule = detail::gauss_legendre(npts);
        auto edges = detail::panel_edges(m, opt.omega_min, opt.omega_max, t_max, npts);
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            double a = edges[p], b = edges[p + 1], half = (b - a) / 2.0, mid = (a + b) / 2.0;
            for (int q = 0; q < npts; ++q) {
                double w = mid + half * rule.x[q];
                double wt = half * rule.w[q] * st.hbar / pi / w;
                double n = nth(st, w);
                terms.push_back({w, (wt * (n + 1.0)) * m.density(w)});
                if (n != 0.0) terms.push_back({-w, (wt * n) * m.density(-w)});
            }
        }
        return terms;
    };
    auto norm_diff = [&](const CorrelatorSeries& x, const CorrelatorSeries& y) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < x.values.size(); ++k) {
            num += (x.values[k] - y.values[k]).squaredNorm();
            den += x.values[k].squaredNorm();
        }
        return std::sqrt(num / std::max(den, 1e-300));
    };
    int npts = opt.n_points;
    CorrelatorSeries prev = series_from_terms(build(npts), times, dim, labels);
    for (int k = 0; k < opt.max_doublings; ++k) {
        npts *= 2;
        CorrelatorSeries next = series_from_terms(build(npts), times, dim, labels);
        double diff = norm_diff(next, prev);
        prev = std::move(next);
        if (diff <= opt.tol) return prev;
    }
    raise(errc::quadrature_under_resolved, "quadrature did not converge to the requested tolerance on doubling");
}

// hermitian part of the impedance of the oscillator with parallel conductance G
// at both nodes, C = 1/(W R)
inline CMat dissipative_nrho_zh(double g, double r, double omega0, double omega) {
    const double gam = g * omega0 * r;
    const double amp = g * (omega0 * r) * (omega0 * r) / 2.0;
    const CMat id = CMat::Identity(2, 2), sy = la::sigma_y();
    const double zp = amp / ((omega + omega0) * (omega + omega0) + gam * gam);
    const double zm = amp / ((omega - omega0) * (omega - omega0) + gam * gam);
    return zp * (id - sy) + zm * (id + sy);
}

inline SpectralMeasure dissipative_nrho_measure(double g, double r, double omega0) {
    SpectralMeasure m;
    m.dim = 2;
    m.density = [g, r, omega0](double w) { return dissipative_nrho_zh(g, r, omega0, w); };
    m.peaks = {omega0};
    m.peak_width = g * omega0 * r;
    return m;
}

struct BathMode {
    double C, L;
};

// series L_n - C_n branches with mode frequencies n dW
inline std::vector<BathMode> bath_discretize(double g, double d_omega, int n) {
    if (!(g > 0) || !(d_omega > 0) || n < 1) raise(errc::invalid_argument, "bath_discretize needs G, dW > 0 and N >= 1");
    std::vector<BathMode> out;
    for (int k = 1; k <= n; ++k) out.push_back({2.0 * g / (pi * k * k * d_omega), pi / (2.0 * g * d_omega)});
    return out;
}

// replaces every resistor by N series-LC branches in parallel
inline network::Netlist expand_resistors(const network::Netlist& net, double d_omega, int n) {
    using namespace network;
    Netlist out;
    out.default_rref = net.default_rref;
    for (const auto& el : net.elements) {
        if (const auto* r = std::get_if<Resistor>(&el)) {
            auto modes = bath_discretize(1.0 / r->ohms, d_omega, n);
            for (int k = 0; k < n; ++k) {
                std::string mid = r->name + "_b" + std::to_string(k + 1);
                out.add(Inductor{r->name + "_L" + std::to_string(k + 1), r->n1, mid, modes[k].L});
                out.add(Capacitor{r->name + "_C" + std::to_string(k + 1), mid, r->n2, modes[k].C});
            }
        } else {
            out.add(el);
        }
    }
    out.ports = net.ports;
    return out;
}

// Port measure of the oscillator with both conductances replaced by N-mode
// baths, from the normal modes f(v) = vC + sum v/(L_n(w_n^2 - v^2)) = +-1/R.
inline SpectralMeasure nrho_bath_port_measure(double g, double r, double omega0, double d_omega, int n) {
    const double c = 1.0 / (omega0 * r);
    auto modes = bath_discretize(g, d_omega, n);
    std::vector<double> wn(n), il(n);
    for (int k = 0; k < n; ++k) {
        wn[k] = (k + 1) * d_omega;
        il[k] = 1.0 / modes[k].L;
    }
    auto f = [&](double v) {
        double acc = v * c;
        for (int k = 0; k < n; ++k) acc += v * il[k] / (wn[k] * wn[k] - v * v);
        return acc;
    };
    auto fp = [&](double v) {
        double acc = c;
        for (int k = 0; k < n; ++k) {
            double d = wn[k] * wn[k] - v * v;
            acc += il[k] * (wn[k] * wn[k] + v * v) / (d * d);
        }
        return acc;
    };
    auto solve = [&](double lo, double hi, double target) {
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (f(mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    SpectralMeasure m;
    m.dim = 2;
    const CMat id = CMat::Identity(2, 2), sy = la::sigma_y();
    const CMat pp = (id + sy) / 2.0, pm = (id - sy) / 2.0;
    auto add = [&](double v, const CMat& proj) { m.atoms.push_back({v, proj / fp(v), proj.conjugate() / fp(v)}); };
    const double upper = std::max({omega0, wn[n - 1]}) * 4.0 + 4.0 / (r * c);
    for (int k = 0; k <= n; ++k) {
        double lo = k == 0 ? 0.0 : wn[k - 1], hi = k == n ? upper : wn[k];
        double eps = 1e-13 * std::max(hi, 1.0);
        double a = lo + (k == 0 ? 0.0 : eps), b = hi - (k == n ? 0.0 : eps);
        if (k == n)
            while (f(b) < 1.0 / r) b *= 2.0;
        add(solve(a, b, 1.0 / r), pp);
        if (k > 0) add(solve(a, b, -1.0 / r), pm);
    }
    std::sort(m.atoms.begin(), m.atoms.end(), [](const Atom& x, const Atom& y) { return x.omega < y.omega; });
    m.peaks = {omega0};
    return m;
}

// <Pi(t) Pi(0)^T> for Pi = C Phid + G Phi / 2 from the flux correlator in
// spectral form; derivatives act as -i w on each term
inline CorrelatorSeries pi_cross_correlator(const CorrelatorSeries& flux, const Mat& cmat, const Mat& gmat) {
    if (!flux.has_spectral()) raise(errc::spectral_form_required, "flux correlator has no spectral form");
    const CMat c = cmat.cast<cplx>(), g = gmat.cast<cplx>();
    std::vector<SpectralTerm> terms;
    for (const auto& term : flux.spectral) {
        const double w = term.omega;
        const CMat& x = term.coeff;
        CMat y = (w * w) * (c * x * c) + cplx(0.0, -w / 2.0) * (c * x * g.transpose() - g * x * c) + 0.25 * (g * x * g.transpose());
        terms.push_back({w, y});
    }
    return series_from_terms(std::move(terms), flux.times, static_cast<int>(cmat.rows()));
}

inline CorrelatorSeries pi_cross_correlator(const CorrelatorSeries& flux, double cap, double r) {
    return pi_cross_correlator(flux, cap * Mat::Identity(2, 2), (1.0 / r) * la::j2());
}

} // namespace qfluct::correlator
