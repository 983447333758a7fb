// Flux correlator of the nonreciprocal oscillator through both spectral routes.
#include <qfluct/correlator.hpp>
#include <qfluct/foster.hpp>

#include <cstdio>

int main() {
    using namespace qfluct;
    auto net = network::parse_netlist("C C1 1 0 1\nC C2 2 0 1\nG G1 1 0 2 0 1\nport P1 1\nport P2 2\n");
    auto lag = network::build_lagrangian(net, network::Mode::NodeFlux);

    // port impedance -> Foster stages -> atoms
    auto form = foster::foster_decompose(network::port_response(lag));
    auto port_measure = foster::port_hermitian_measure(form);

    // Hamiltonian -> Williamson -> atoms projected on the port fluxes
    auto sys = network::legendre(lag, 1.0);
    auto w = symplectic::williamson(sys.h, sys.J);
    auto phase_measure = symplectic::w_hermitian_measure(w, sys.port_coord);

    correlator::ThermalState st{2.0, 1.0};
    std::vector<double> ts = {0.0, 0.5, 1.0, 1.5, 2.0};
    auto a = correlator::correlate_lossless(port_measure, st, ts);
    auto b = correlator::correlate_lossless(phase_measure, st, ts);
    std::printf("oscillator frequency %.6f, nondynamical pairs %zu\n", w.frequencies[0], w.nondyn_indices.size());
    std::printf("%6s %24s %24s\n", "t", "<Phi1(t)Phi1(0)>", "<Phi1(t)Phi2(0)>");
    for (std::size_t k = 0; k < ts.size(); ++k) {
        cplx x11 = a.values[k](0, 0), x12 = a.values[k](0, 1);
        std::printf("%6.2f %11.6f %+11.6fi %11.6f %+11.6fi   |route diff| %.1e\n", ts[k], x11.real(), x11.imag(), x12.real(), x12.imag(),
                    la::max_abs(CMat(a.values[k] - b.values[k])));
    }
}
