#include <gtest/gtest.h>

#include <qfluct/correlator.hpp>
#include <qfluct/foster.hpp>

#include <limits>

using namespace qfluct;
using namespace qfluct::correlator;

namespace {

const char* kNrho = "C C1 1 0 1\nC C2 2 0 1\nG G1 1 0 2 0 1\nport P1 1\nport P2 2\n";

network::HamiltonianSystem nrho_sys() {
    return network::legendre(network::build_lagrangian(network::parse_netlist(kNrho), network::Mode::NodeFlux), 1.0);
}

// (hbar R / 2) [f cos t - i sin t] on the diagonal, -(hbar R / 2) [f sin t + i cos t] above it
CMat nrho_exact(double beta, double t) {
    const double f = std::isinf(beta) ? 1.0 : 1.0 / std::tanh(beta / 2.0);
    CMat x(2, 2);
    x(0, 0) = x(1, 1) = 0.5 * cplx(f * std::cos(t), -std::sin(t));
    x(0, 1) = -0.5 * cplx(f * std::sin(t), std::cos(t));
    x(1, 0) = -x(0, 1);
    return x;
}

std::vector<double> grid(double t0, double t1, int n) {
    std::vector<double> t(n);
    for (int k = 0; k < n; ++k) t[k] = t0 + (t1 - t0) * k / (n - 1);
    return t;
}

double rel_l2(const CorrelatorSeries& a, const CorrelatorSeries& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        num += (a.values[k] - b.values[k]).squaredNorm();
        den += b.values[k].squaredNorm();
    }
    return std::sqrt(num / den);
}

errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const error& e) {
        return e.code();
    }
    return errc::invalid_argument;
}

} // namespace

TEST(Thermal, OccupationNumbers) {
    ThermalState st{2.0, 1.0};
    EXPECT_NEAR(nth(st, 1.0), 1.0 / (std::exp(2.0) - 1.0), 1e-15);
    for (double w : {0.1, 1.0, 7.0}) EXPECT_NEAR(nth(st, -w) + 1.0, -nth(st, w), 1e-12);
    auto g = ThermalState::ground(1.0);
    EXPECT_EQ(nth(g, 3.0), 0.0);
    EXPECT_EQ(nth(g, -3.0), -1.0);
    EXPECT_EQ(code_of([&] { nth(st, 0.0); }), errc::zero_frequency);
    auto t = ThermalState::from_temperature(1.0);
    EXPECT_NEAR(t.beta, 1.0 / kb_si, 1e-6 / kb_si);
}

TEST(Correlator, NrhoMatchesClosedForm) {
    auto sys = nrho_sys();
    auto m = symplectic::w_hermitian_measure(symplectic::williamson(sys.h, sys.J), sys.port_coord);
    auto ts = grid(0.0, 10.0, 41);
    for (double beta : {std::numeric_limits<double>::infinity(), 2.0, 0.1}) {
        ThermalState st{beta, 1.0};
        auto a = correlate_lossless(m, st, ts);
        auto b = project(correlate_phase_space(sys.h, sys.J, st, ts), sys.port_coord);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            CMat want = nrho_exact(beta, ts[k]);
            EXPECT_LT(la::max_abs(CMat(a.values[k] - want)), 1e-12 * std::max(1.0, la::max_abs(want)));
            EXPECT_LT(la::max_abs(CMat(b.values[k] - want)), 1e-11 * std::max(1.0, la::max_abs(want)));
        }
    }
}

TEST(Correlator, StationarityAndPsdAtZero) {
    std::mt19937_64 rng(2);
    auto f = foster::random_foster_form(rng, 3, 3);
    auto m = foster::port_hermitian_measure(f);
    ThermalState st{0.7, 1.0};
    auto s = correlate_lossless(m, st, {-1.3, 0.0, 1.3});
    EXPECT_LT(la::max_abs(CMat(s.values[0] - s.values[2].adjoint())), 1e-12);
    EXPECT_LT(la::max_abs(CMat(s.values[1] - s.values[1].adjoint())), 1e-12);
    EXPECT_GT(la::min_eigenvalue_hermitian(s.values[1]), -1e-12 * s.values[1].trace().real());
}

TEST(Correlator, EqualTimeBlock) {
    ThermalState st{1.0, 1.0};
    CMat b = equal_time_block(st, 2.0);
    const double c = 0.5 / std::tanh(1.0);
    EXPECT_NEAR(b(0, 0).real(), c, 1e-14);
    EXPECT_NEAR(b(0, 1).imag(), 0.5, 1e-14);
}

TEST(Correlator, ErrorsForWrongMeasureKinds) {
    auto lossy = dissipative_nrho_measure(0.05, 1.0, 1.0);
    EXPECT_EQ(code_of([&] { correlate_lossless(lossy, ThermalState::ground(1.0), {0.0}); }), errc::lossy_measure);
    EXPECT_EQ(code_of([&] { correlate_lossy(lossy, ThermalState::ground(1.0), {0.0}); }), errc::infrared_divergent);
    QuadratureOptions q;
    q.omega_min = 0.005;
    q.max_doublings = 0;
    EXPECT_EQ(code_of([&] { correlate_lossy(lossy, ThermalState::ground(1.0), {0.0, 1.0}, q); }), errc::quadrature_under_resolved);
    CorrelatorSeries bare;
    bare.times = {0.0};
    bare.values = {CMat::Zero(2, 2)};
    EXPECT_EQ(code_of([&] { pi_cross_correlator(bare, 1.0, 1.0); }), errc::spectral_form_required);
}

TEST(Correlator, LorentzianDensityIsTheExactHermitianImpedance) {
    auto lag = network::build_lagrangian(
        network::parse_netlist("C C1 1 0 0.5\nC C2 2 0 0.5\nG G1 1 0 2 0 2\nR R1 1 0 10\nR R2 2 0 10\nport P1 1\nport P2 2\n"),
        network::Mode::NodeFlux, true);
    // C = 1/(W R) with R = 2, W = 1, G = 0.1
    for (double w : {-2.0, -0.7, 0.3, 1.0, 1.4}) {
        CMat zh = la::hermitian_part(network::port_response_at(lag, cplx(0.0, -w)));
        EXPECT_LT(la::max_abs(CMat(zh - dissipative_nrho_zh(0.1, 2.0, 1.0, w))), 1e-12);
    }
}

TEST(Correlator, LossyQuadratureWithCutoffConverges) {
    auto m = dissipative_nrho_measure(0.05, 1.0, 1.0);
    auto ts = grid(0.0, 4 * pi, 30);
    QuadratureOptions a, b;
    a.omega_min = b.omega_min = 0.01;
    a.omega_max = b.omega_max = 3.0;
    b.n_points = 128;
    b.tol = 1e-9;
    auto x = correlate_lossy(m, ThermalState{3.0, 1.0}, ts, a);
    auto y = correlate_lossy(m, ThermalState{3.0, 1.0}, ts, b);
    EXPECT_LT(rel_l2(x, y), 1e-5);
    EXPECT_GT(la::min_eigenvalue_hermitian(x.values[0]), 0.0);
}

TEST(Bath, DiscretizationFormulas) {
    auto modes = bath_discretize(0.05, 0.01, 3);
    ASSERT_EQ(modes.size(), 3u);
    for (int n = 1; n <= 3; ++n) {
        EXPECT_NEAR(modes[n - 1].C, 2 * 0.05 / (pi * n * n * 0.01), 1e-12);
        EXPECT_NEAR(modes[n - 1].L, pi / (2 * 0.05 * 0.01), 1e-9);
        EXPECT_NEAR(1.0 / std::sqrt(modes[n - 1].L * modes[n - 1].C), n * 0.01, 1e-12);
    }
    EXPECT_EQ(code_of([] { bath_discretize(0.0, 0.1, 3); }), errc::invalid_argument);
}

TEST(Bath, SecularRouteMatchesNetlistRoute) {
    auto net = network::parse_netlist("C C1 1 0 1\nC C2 2 0 1\nG G1 1 0 2 0 1\nR R1 1 0 20\nR R2 2 0 20\nport P1 1\nport P2 2\n");
    auto ex = expand_resistors(net, 0.1, 20);
    EXPECT_EQ(ex.elements.size(), 3u + 80u);
    auto sys = network::legendre(network::build_lagrangian(ex, network::Mode::NodeFlux), 1.0);
    auto wm = symplectic::w_hermitian_measure(symplectic::williamson(sys.h, sys.J), sys.port_coord);
    auto fm = nrho_bath_port_measure(0.05, 1.0, 1.0, 0.1, 20);
    EXPECT_EQ(wm.atoms.size(), fm.atoms.size());
    auto ts = grid(0.0, 12.0, 25);
    ThermalState st{2.0, 1.0};
    EXPECT_LT(rel_l2(correlate_lossless(wm, st, ts), correlate_lossless(fm, st, ts)), 1e-8);
}

TEST(PiCorrelator, NrhoMomentaFromFluxSpectralForm) {
    auto sys = nrho_sys();
    auto m = symplectic::w_hermitian_measure(symplectic::williamson(sys.h, sys.J), sys.port_coord);
    auto ts = grid(0.0, 6.0, 13);
    ThermalState st{1.5, 1.0};
    auto flux = correlate_lossless(m, st, ts);
    auto pi_series = pi_cross_correlator(flux, 1.0, 1.0);
    auto phase = project(correlate_phase_space(sys.h, sys.J, st, ts), sys.port_momentum);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        EXPECT_LT(la::max_abs(CMat(pi_series.values[k] - phase.values[k])), 1e-12);
        // <Pi1 Pi2> = <Phi1 Phi2> / (4 R^2)
        EXPECT_LT(std::abs(pi_series.values[k](0, 1) - flux.values[k](0, 1) / 4.0), 1e-12);
    }
}
