#pragma once

// Command-line front end. Everything lives here so tests can drive the exact
// code path the binary uses; tools/qfluct.cpp only forwards argv.

#include "correlator.hpp"
#include "errors.hpp"
#include "foster.hpp"
#include "io.hpp"
#include "network.hpp"
#include "ratmat.hpp"
#include "symplectic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace qfluct::cli {

using io::json;

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TimeGrid {
    double start = 0.0, stop = 0.0;
    int count = 0; // 0 = choose from the lowest frequency
};

struct RunConfig {
    std::string command;
    std::vector<std::string> inputs;
    std::string mode = "flux";
    std::optional<double> beta, temp, hbar;
    bool natural_units = false;
    TimeGrid times;
    int bath = 0;
    std::optional<double> delta_omega, omega_max, omega_min;
    bool lossy_quadrature = false;
    std::string route = "auto"; // auto | williamson | foster | phase
    std::string format = "json";
    std::string output;
    std::uint64_t seed = 1;
    std::optional<double> tol;
    std::optional<double> rref;
    std::vector<int> sizes{2, 4, 6, 8, 12};
    int samples = 50;
    bool corrupt = false;
    bool emit_netlist = false;
};

inline TimeGrid parse_times(const std::string& s) {
    TimeGrid g;
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw usage_error("--times expects start:stop:count, got '" + s + "'");
    try {
        std::size_t used = 0;
        g.start = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("start");
        g.stop = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("stop");
        g.count = std::stoi(parts[2], &used);
        if (used != parts[2].size()) throw std::invalid_argument("count");
    } catch (const std::logic_error&) {
        throw usage_error("--times expects start:stop:count, got '" + s + "'");
    }
    if (g.count < 1) throw usage_error("--times count must be at least 1");
    return g;
}

inline void validate(const RunConfig& c) {
    if (c.beta && c.temp) throw usage_error("--beta and --temp are mutually exclusive");
    if (c.beta && !(*c.beta > 0)) throw usage_error("--beta must be positive");
    if (c.temp && !(*c.temp >= 0)) throw usage_error("--temp must be nonnegative");
    if (c.hbar && !(*c.hbar > 0)) throw usage_error("--hbar must be positive");
    if (c.tol && !(*c.tol > 0)) throw usage_error("--tol must be positive");
    if (c.rref && !(*c.rref > 0)) throw usage_error("--rref must be positive");
    if (c.mode != "flux" && c.mode != "charge") throw usage_error("--mode must be flux or charge");
    if (c.format != "json" && c.format != "csv") throw usage_error("--format must be json or csv");
    if (c.route != "auto" && c.route != "williamson" && c.route != "foster" && c.route != "phase")
        throw usage_error("--route must be auto, williamson, foster or phase");
    if (c.bath < 0) throw usage_error("--bath must be nonnegative");
    if (c.bath > 0 && !c.delta_omega) throw usage_error("--bath needs --delta-omega");
    if (c.delta_omega && !(*c.delta_omega > 0)) throw usage_error("--delta-omega must be positive");
    if (c.omega_min && !(*c.omega_min >= 0)) throw usage_error("--omega-min must be nonnegative");
    if (c.omega_max && !(*c.omega_max > 0)) throw usage_error("--omega-max must be positive");
    if (c.bath > 0 && c.lossy_quadrature) throw usage_error("--bath and --lossy-quadrature are mutually exclusive");
    if (c.samples < 1) throw usage_error("--samples must be at least 1");
    for (int n : c.sizes)
        if (n < 1) throw usage_error("--sizes entries must be positive");
}

inline double hbar_of(const RunConfig& c) { return c.hbar ? *c.hbar : (c.natural_units ? 1.0 : hbar_si); }
inline double kb_of(const RunConfig& c) { return c.natural_units ? 1.0 : kb_si; }
inline double rref_of(const RunConfig& c) { return c.rref.value_or(50.0); }
inline network::Mode mode_of(const RunConfig& c) { return c.mode == "charge" ? network::Mode::LoopCharge : network::Mode::NodeFlux; }

inline correlator::ThermalState thermal_of(const RunConfig& c) {
    const double hb = hbar_of(c);
    if (c.beta) return {*c.beta, hb};
    if (c.temp) return correlator::ThermalState::from_temperature(*c.temp, hb, kb_of(c));
    return correlator::ThermalState::ground(hb);
}

inline std::string read_input(const std::string& path, std::istream& in) {
    if (path == "-") return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::ifstream f(path);
    if (!f) throw usage_error("cannot open input '" + path + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline bool looks_like_json(const std::string& text) {
    auto it = std::find_if(text.begin(), text.end(), [](unsigned char ch) { return !std::isspace(ch); });
    return it != text.end() && *it == '{';
}

inline void require_ports(const network::Netlist& net) {
    if (net.ports.empty()) raise(errc::no_ports, "netlist declares no ports");
}

inline std::vector<std::string> default_labels(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + "P" + std::to_string(i + 1));
    return out;
}

inline std::vector<std::string> port_labels(const network::Netlist& net, network::Mode m) {
    std::vector<std::string> out;
    for (const auto& p : net.ports) out.push_back((m == network::Mode::NodeFlux ? "Phi:" : "Q:") + p.name);
    return out;
}

inline std::string netlist_text(const network::Netlist& net) {
    using namespace network;
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& el : net.elements) {
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Capacitor>) out << "C " << x.name << " " << x.n1 << " " << x.n2 << " " << x.farads;
                else if constexpr (std::is_same_v<T, Inductor>) out << "L " << x.name << " " << x.n1 << " " << x.n2 << " " << x.henries;
                else if constexpr (std::is_same_v<T, Resistor>) out << "R " << x.name << " " << x.n1 << " " << x.n2 << " " << x.ohms;
                else if constexpr (std::is_same_v<T, Gyrator>)
                    out << "G " << x.name << " " << x.a1 << " " << x.a2 << " " << x.b1 << " " << x.b2 << " " << x.ohms;
                else out << "T " << x.name << " " << x.p1 << " " << x.p2 << " " << x.s1 << " " << x.s2 << " " << x.ratio;
                out << "\n";
            },
            el);
    }
    for (const auto& p : net.ports) {
        out << "port " << p.name << " " << p.plus << " " << p.minus;
        if (p.rref) out << " Rref=" << *p.rref;
        out << "\n";
    }
    return out.str();
}

// Port measure and labels of any supported input. For scattering inputs with
// no immittance the measure is that of the reduced problem embedded back.
struct PortModel {
    SpectralMeasure measure;
    std::vector<std::string> labels;
    std::optional<network::HamiltonianSystem> sys; // set for lossless netlists
    std::string route;
};

inline foster::Kind kind_of(network::Mode m) {
    return m == network::Mode::NodeFlux ? foster::Kind::impedance : foster::Kind::admittance;
}

inline PortModel model_from_scattering(const ratmat::RatMatrix& s, const std::vector<double>& rref, foster::Kind kind) {
    PortModel pm;
    const int n = s.rows();
    try {
        ratmat::RatMatrix z = ratmat::s_to_z(s, rref);
        ratmat::RatMatrix f = kind == foster::Kind::impedance ? z : ratmat::inverse(z);
        pm.measure = foster::port_hermitian_measure(foster::foster_decompose(f, kind));
        pm.route = "foster";
    } catch (const error& e) {
        if (e.code() != errc::no_immittance) throw;
        const bool uniform = std::all_of(rref.begin(), rref.end(), [&](double r) { return r == rref[0]; });
        if (!uniform) raise(errc::invalid_argument, "scattering reduction needs a uniform Rref");
        pm.measure = foster::port_hermitian_measure(foster::reduce_singular_scattering(s, kind, rref.empty() ? 50.0 : rref[0]));
        pm.route = "scattering-reduction";
    }
    pm.labels = default_labels(kind == foster::Kind::impedance ? "Phi:" : "Q:", n);
    return pm;
}

inline std::vector<double> rref_list(const json& j, int n, double fallback) {
    if (!j.contains("Rref")) return std::vector<double>(n, fallback);
    if (j["Rref"].is_number()) return std::vector<double>(n, j["Rref"].get<double>());
    auto v = j["Rref"].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != n) raise(errc::semantic_error, "Rref list length differs from the port count");
    return v;
}

inline ratmat::RatMatrix example_scattering(const json& j, double fallback_rref) {
    const std::string name = j["example"].get<std::string>();
    if (name != "singular3") raise(errc::semantic_error, "unknown example '" + name + "'");
    Vec d = foster::singular3_direction(j.value("phi_z", 0.3), j.value("phi_x", 0.7));
    return foster::embedded_resonator_scattering(d, j.value("C", 1.0), j.value("omega", 1.0), j.value("Rref", fallback_rref));
}

inline PortModel model_from_json(const json& j, const RunConfig& cfg) {
    if (j.contains("stages")) {
        foster::FosterForm f = io::foster_from_json(j);
        return {foster::port_hermitian_measure(f),
                default_labels(f.kind == foster::Kind::impedance ? "Phi:" : "Q:", f.dim()), std::nullopt, "foster"};
    }
    if (j.contains("example")) {
        auto s = example_scattering(j, rref_of(cfg));
        return model_from_scattering(s, std::vector<double>(s.rows(), j.value("Rref", rref_of(cfg))), kind_of(mode_of(cfg)));
    }
    if (!j.contains("kind") || !j.contains("response")) raise(errc::syntax_error, "JSON input needs kind and response, stages, or example");
    const std::string kind = j["kind"].get<std::string>();
    ratmat::RatMatrix r = io::ratmatrix_from_json(j["response"]);
    if (r.rows() == 0) raise(errc::no_ports, "response has no ports");
    if (kind == "scattering") return model_from_scattering(r, rref_list(j, r.rows(), rref_of(cfg)), kind_of(mode_of(cfg)));
    foster::Kind k;
    if (kind == "impedance") k = foster::Kind::impedance;
    else if (kind == "admittance") k = foster::Kind::admittance;
    else raise(errc::semantic_error, "response kind must be impedance, admittance or scattering");
    return {foster::port_hermitian_measure(foster::foster_decompose(r, k)),
            default_labels(k == foster::Kind::impedance ? "Phi:" : "Q:", r.rows()), std::nullopt, "foster"};
}

// Lossy port measure with density herm(F(-i w)) from the dissipative pencil.
inline PortModel lossy_model(const network::Netlist& net, network::Mode mode) {
    auto lag = std::make_shared<network::QuadraticLagrangian>(network::build_lagrangian(net, mode, true));
    PortModel pm;
    pm.route = "lossy-quadrature";
    pm.labels = port_labels(net, mode);
    pm.measure.dim = static_cast<int>(net.ports.size());
    pm.measure.density = [lag](double w) { return la::hermitian_part(network::port_response_at(*lag, cplx(0.0, -w))); };
    double width = 0.0;
    for (cplx lam : network::natural_frequencies(*lag)) {
        if (std::abs(lam.imag()) <= 1e-12 * std::abs(lam)) continue;
        if (lam.imag() > 0) {
            pm.measure.peaks.push_back(lam.imag());
            width = width == 0.0 ? std::abs(lam.real()) : std::min(width, std::abs(lam.real()));
        }
    }
    std::sort(pm.measure.peaks.begin(), pm.measure.peaks.end());
    pm.measure.peak_width = width;
    return pm;
}

inline PortModel lossless_netlist_model(const network::Netlist& net, const RunConfig& cfg) {
    const auto mode = mode_of(cfg);
    PortModel pm;
    pm.labels = port_labels(net, mode);
    const auto lag = network::build_lagrangian(net, mode);
    auto foster_route = [&] {
        pm.measure = foster::port_hermitian_measure(foster::foster_decompose(network::port_response(lag), kind_of(mode)));
        pm.route = "foster";
    };
    if (cfg.route == "foster") {
        foster_route();
        return pm;
    }
    try {
        pm.sys = network::legendre(lag, hbar_of(cfg));
    } catch (const error& e) {
        if (cfg.route != "auto" || e.code() != errc::singular_kinetic) throw;
        foster_route();
        return pm;
    }
    auto w = symplectic::williamson(pm.sys->h, pm.sys->J);
    pm.measure = symplectic::w_hermitian_measure(w, pm.sys->port_coord);
    pm.route = cfg.route == "phase" ? "phase" : "williamson";
    return pm;
}

inline PortModel load_model(const std::string& text, const RunConfig& cfg) {
    if (looks_like_json(text)) return model_from_json(io::parse_json(text), cfg);
    network::Netlist net = network::parse_netlist(text);
    require_ports(net);
    if (net.has_resistors()) {
        if (cfg.bath > 0) net = correlator::expand_resistors(net, *cfg.delta_omega, cfg.bath);
        else if (cfg.lossy_quadrature) return lossy_model(net, mode_of(cfg));
        else
            raise(errc::mode_unsupported_element,
                  "netlist has resistors; use --bath N --delta-omega W or --lossy-quadrature");
    }
    return lossless_netlist_model(net, cfg);
}

inline std::vector<double> time_points(const TimeGrid& g, const SpectralMeasure& m) {
    TimeGrid use = g;
    if (use.count == 0) {
        double wmin = 0.0;
        for (const auto& a : m.atoms) wmin = wmin == 0.0 ? a.omega : std::min(wmin, a.omega);
        for (double p : m.peaks) wmin = wmin == 0.0 ? p : std::min(wmin, p);
        use = {0.0, wmin > 0 ? 4.0 * pi / wmin : 1.0, 201};
    }
    std::vector<double> t(use.count);
    for (int k = 0; k < use.count; ++k) t[k] = use.count == 1 ? use.start : use.start + (use.stop - use.start) * k / (use.count - 1);
    return t;
}

inline void emit(const RunConfig& cfg, const std::string& data, std::ostream& out) {
    if (cfg.output.empty()) {
        out << data;
        return;
    }
    std::ofstream f(cfg.output);
    if (!f) throw usage_error("cannot write '" + cfg.output + "'");
    f << data;
}

inline correlator::CorrelatorSeries correlate_model(const PortModel& pm, const RunConfig& cfg) {
    const auto st = thermal_of(cfg);
    const auto times = time_points(cfg.times, pm.measure);
    if (pm.measure.has_density()) {
        correlator::QuadratureOptions q;
        q.omega_min = cfg.omega_min.value_or(0.0);
        q.omega_max = cfg.omega_max.value_or(0.0);
        if (cfg.tol) q.tol = *cfg.tol;
        return correlator::correlate_lossy(pm.measure, st, times, q, pm.labels);
    }
    if (pm.route == "phase" && pm.sys)
        return correlator::project(correlator::correlate_phase_space(pm.sys->h, pm.sys->J, st, times), pm.sys->port_coord, pm.labels);
    return correlator::correlate_lossless(pm.measure, st, times, pm.labels);
}

inline int cmd_correlate(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err) {
    if (cfg.inputs.size() != 1) throw usage_error("correlate takes exactly one input");
    PortModel pm = load_model(read_input(cfg.inputs[0], in), cfg);
    auto series = correlate_model(pm, cfg);
    emit(cfg, cfg.format == "csv" ? io::to_csv(series) : io::to_json(series).dump(2) + "\n", out);

    std::ostream& note = cfg.output.empty() ? err : out;
    note << "route: " << pm.route << "\n";
    if (!series.values.empty()) {
        note << "t=" << series.times[0] << " diagonal:";
        for (int i = 0; i < series.dim(); ++i) note << " " << series.values[0](i, i).real() << (series.values[0](i, i).imag() < 0 ? "-" : "+") << std::abs(series.values[0](i, i).imag()) << "i";
        note << "\n";
    }
    std::vector<std::pair<double, double>> dom;
    for (const auto& a : pm.measure.atoms) dom.push_back({a.plus.trace().real(), a.omega});
    std::sort(dom.begin(), dom.end(), [](auto& x, auto& y) { return x.first > y.first; });
    if (!dom.empty()) {
        note << "dominant frequencies:";
        for (std::size_t k = 0; k < std::min<std::size_t>(5, dom.size()); ++k) note << " " << dom[k].second;
        note << "\n";
    } else if (!pm.measure.peaks.empty()) {
        note << "spectral peaks:";
        for (double p : pm.measure.peaks) note << " " << p;
        note << "\n";
    }
    return 0;
}

inline json lossless_report(const ratmat::RatMatrix& m) {
    auto r = ratmat::is_lossless_positive_real(m);
    return {{"lossless_positive_real", r.ok}, {"reason", r.reason}};
}

inline json scattering_report(const ratmat::RatMatrix& s, double rref, foster::Kind kind) {
    auto red = foster::reduce_singular_scattering(s, kind, rref);
    return {{"kind", foster::kind_name(red.kind)},
            {"k_open", red.k_open},
            {"T", io::mat_to_json(red.T)},
            {"P", io::mat_to_json(red.P)},
            {"S_reduced", io::to_json(red.S_reduced)},
            {"reduced_immittance", io::to_json(red.reduced_immittance)}};
}

inline json analyze_netlist(const network::Netlist& net, const RunConfig& cfg) {
    require_ports(net);
    const auto mode = mode_of(cfg);
    const bool lossy = net.has_resistors();
    json rep;
    rep["input"] = "netlist";
    rep["mode"] = network::mode_name(mode);
    rep["ports"] = net.port_names();
    rep["Rref"] = net.rrefs();
    json diag;
    diag["dissipative"] = lossy;
    const auto lag = network::build_lagrangian(net, mode, lossy);
    ratmat::RatMatrix primary = network::port_response(lag);
    std::optional<ratmat::RatMatrix> z, y;
    (mode == network::Mode::NodeFlux ? z : y) = primary;
    try {
        (mode == network::Mode::NodeFlux ? y : z) = ratmat::inverse(primary);
    } catch (const error& e) {
        if (e.code() != errc::no_immittance) throw;
        diag[mode == network::Mode::NodeFlux ? "Y" : "Z"] = std::string(e.name()) + ": " + e.what();
    }
    rep["Z"] = z ? io::to_json(*z) : json(nullptr);
    rep["Y"] = y ? io::to_json(*y) : json(nullptr);
    std::optional<ratmat::RatMatrix> s;
    if (z) s = ratmat::z_to_s(*z, net.rrefs());
    else {
        // S = (1 - R Y)(1 + R Y)^{-1} with R = diag(rref)
        const int n = y->rows();
        Mat rr = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) rr(i, i) = net.rrefs()[i];
        ratmat::RatMatrix ry = rr * *y, one = ratmat::RatMatrix::identity(n);
        s = (one - ry) * ratmat::inverse(one + ry);
    }
    rep["S"] = io::to_json(*s);
    if (z) diag["Z"] = lossless_report(*z);
    if (y) diag["Y"] = lossless_report(*y);
    if (!lossy) {
        try {
            auto sys = network::legendre(lag, hbar_of(cfg));
            auto w = symplectic::williamson(sys.h, sys.J);
            diag["frequencies"] = w.frequencies;
            diag["nondynamical_pairs"] = w.nondyn_indices.size();
        } catch (const error& e) {
            diag["hamiltonian"] = std::string(e.name()) + ": " + e.what();
        }
        const auto& f = z ? *z : *y;
        try {
            rep["foster"] = io::to_json(foster::foster_decompose(f, z ? foster::Kind::impedance : foster::Kind::admittance));
        } catch (const error& e) {
            diag["foster"] = std::string(e.name()) + ": " + e.what();
        }
        if (!z || !y) {
            const auto& rr = net.rrefs();
            rep["reduction"] = scattering_report(*s, rr[0], z ? foster::Kind::admittance : foster::Kind::impedance);
        }
    }
    rep["diagnostics"] = diag;
    return rep;
}

inline json analyze_scattering(const ratmat::RatMatrix& s, const std::vector<double>& rref) {
    json rep;
    rep["S"] = io::to_json(s);
    rep["Rref"] = rref;
    json diag;
    try {
        auto z = ratmat::s_to_z(s, rref);
        rep["Z"] = io::to_json(z);
        diag["Z"] = lossless_report(z);
    } catch (const error& e) {
        if (e.code() != errc::no_immittance) throw;
        rep["Z"] = nullptr;
        diag["Z"] = std::string(e.name()) + ": " + e.what();
        rep["reduction"] = scattering_report(s, rref[0], foster::Kind::impedance);
    }
    try {
        const int n = s.rows();
        ratmat::RatMatrix one = ratmat::RatMatrix::identity(n);
        Mat g = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) g(i, i) = 1.0 / rref[i];
        auto y = g * ((one - s) * ratmat::inverse(one + s));
        rep["Y"] = io::to_json(y);
        diag["Y"] = lossless_report(y);
    } catch (const error& e) {
        if (e.code() != errc::no_immittance) throw;
        rep["Y"] = nullptr;
        diag["Y"] = std::string(e.name()) + ": " + e.what();
    }
    rep["diagnostics"] = diag;
    return rep;
}

inline int cmd_analyze(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    if (cfg.inputs.size() != 1) throw usage_error("analyze takes exactly one input");
    const std::string text = read_input(cfg.inputs[0], in);
    json rep;
    if (!looks_like_json(text)) {
        rep = analyze_netlist(network::parse_netlist(text), cfg);
    } else {
        json j = io::parse_json(text);
        if (j.contains("example")) {
            auto s = example_scattering(j, rref_of(cfg));
            rep = analyze_scattering(s, std::vector<double>(s.rows(), j.value("Rref", rref_of(cfg))));
            rep["input"] = "example";
        } else {
            if (!j.contains("kind") || !j.contains("response")) raise(errc::syntax_error, "response JSON needs kind and response");
            const std::string kind = j["kind"].get<std::string>();
            auto r = io::ratmatrix_from_json(j["response"]);
            if (r.rows() == 0) raise(errc::no_ports, "response has no ports");
            auto rref = rref_list(j, r.rows(), rref_of(cfg));
            if (kind == "scattering") rep = analyze_scattering(r, rref);
            else if (kind == "impedance") rep = analyze_scattering(ratmat::z_to_s(r, rref), rref);
            else if (kind == "admittance") rep = analyze_scattering(ratmat::z_to_s(ratmat::inverse(r), rref), rref);
            else raise(errc::semantic_error, "response kind must be impedance, admittance or scattering");
            rep["input"] = kind;
        }
    }
    emit(cfg, rep.dump(2) + "\n", out);
    return 0;
}

inline int cmd_foster(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    if (cfg.inputs.size() != 1) throw usage_error("foster takes exactly one input");
    const std::string text = read_input(cfg.inputs[0], in);
    foster::FosterForm f;
    if (looks_like_json(text)) {
        json j = io::parse_json(text);
        if (j.contains("stages")) {
            f = io::foster_from_json(j);
        } else {
            if (!j.contains("kind") || !j.contains("response")) raise(errc::syntax_error, "response JSON needs kind and response");
            const std::string kind = j["kind"].get<std::string>();
            if (kind != "impedance" && kind != "admittance") raise(errc::semantic_error, "foster needs an impedance or admittance");
            f = foster::foster_decompose(io::ratmatrix_from_json(j["response"]),
                                         kind == "impedance" ? foster::Kind::impedance : foster::Kind::admittance);
        }
    } else {
        auto net = network::parse_netlist(text);
        require_ports(net);
        const auto mode = mode_of(cfg);
        f = foster::foster_decompose(network::port_response(network::build_lagrangian(net, mode)), kind_of(mode));
    }
    if (cfg.emit_netlist) {
        if (f.kind != foster::Kind::impedance) raise(errc::invalid_argument, "stage netlists are built for impedance forms");
        emit(cfg, netlist_text(foster::stage_netlist(f, rref_of(cfg))), out);
    } else {
        emit(cfg, io::to_json(f).dump(2) + "\n", out);
    }
    return 0;
}

inline int cmd_bath(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    if (cfg.inputs.size() != 1) throw usage_error("bath takes exactly one input");
    if (cfg.bath <= 0) throw usage_error("bath needs --bath N and --delta-omega");
    auto net = network::parse_netlist(read_input(cfg.inputs[0], in));
    auto expanded = correlator::expand_resistors(net, *cfg.delta_omega, cfg.bath);
    if (cfg.format == "json") {
        json modes = json::array();
        for (const auto& el : net.elements)
            if (const auto* r = std::get_if<network::Resistor>(&el))
                for (const auto& m : correlator::bath_discretize(1.0 / r->ohms, *cfg.delta_omega, cfg.bath))
                    modes.push_back({{"resistor", r->name}, {"C", m.C}, {"L", m.L}, {"omega", 1.0 / std::sqrt(m.L * m.C)}});
        emit(cfg, json{{"modes", modes}, {"netlist", netlist_text(expanded)}}.dump(2) + "\n", out);
    } else {
        emit(cfg, netlist_text(expanded), out);
    }
    return 0;
}

struct Check {
    std::string name;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string error;
};

inline Mat random_pd(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g(rng);
    return a * a.transpose() / d + 0.1 * Mat::Identity(d, d);
}

inline double max_rel_deviation(const correlator::CorrelatorSeries& a, const correlator::CorrelatorSeries& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        num = std::max(num, la::max_abs(CMat(a.values[k] - b.values[k])));
        den = std::max(den, la::max_abs(b.values[k]));
    }
    return den > 0 ? num / den : num;
}

inline std::vector<Check> run_verify(const RunConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ut(-5.0, 5.0);
    const double tol = cfg.tol.value_or(1e-9);
    std::vector<Check> checks;
    for (int n : cfg.sizes) {
        Check c{"fundamental identity, dim " + std::to_string(2 * n), 0.0, tol, false, {}};
        Mat h = random_pd(rng, 2 * n);
        if (cfg.corrupt) h(0, 1) += 0.5;
        Mat j = la::symplectic_form(n);
        try {
            for (int k = 0; k < cfg.samples; ++k)
                c.deviation = std::max(c.deviation, symplectic::verify_fundamental_identity(h, j, ut(rng), tol).max_abs_deviation);
            c.passed = c.deviation < tol;
        } catch (const error& e) {
            c.error = std::string(e.name()) + ": " + e.what();
        }
        checks.push_back(c);
    }
    // the three routes on a synthesized two-port
    Check r{"route equivalence, synthesized 2-port", 0.0, 1e-8, false, {}};
    Check db{"detailed balance", 0.0, 1e-10, false, {}};
    try {
        foster::FosterForm f = foster::random_foster_form(rng, 2, 3);
        auto net = foster::stage_netlist(f, 1.0);
        auto sys = network::legendre(network::build_lagrangian(net, network::Mode::NodeFlux), 1.0);
        correlator::ThermalState st{1.0, 1.0};
        std::vector<double> ts;
        for (int k = 0; k < cfg.samples; ++k) ts.push_back(ut(rng));
        auto a = correlator::correlate_lossless(foster::port_hermitian_measure(f), st, ts);
        auto w = symplectic::williamson(sys.h, sys.J);
        auto b = correlator::correlate_lossless(symplectic::w_hermitian_measure(w, sys.port_coord), st, ts);
        auto c = correlator::project(correlator::correlate_phase_space(sys.h, sys.J, st, ts), sys.port_coord);
        r.deviation = std::max(max_rel_deviation(a, c), max_rel_deviation(b, c));
        r.passed = r.deviation < r.tolerance;
        for (const auto& atom : foster::port_hermitian_measure(f).atoms) {
            double n = correlator::nth(st, atom.omega);
            CMat lhs = (n + 1.0) * atom.plus, rhs = n * atom.minus.conjugate();
            // plus/minus are conjugate, so the thermal ratio must be exact
            db.deviation = std::max(db.deviation, la::max_abs(CMat(lhs * n - rhs * (n + 1.0))) / std::max(la::max_abs(lhs), 1e-300));
        }
        db.passed = db.deviation < db.tolerance;
    } catch (const error& e) {
        r.error = db.error = std::string(e.name()) + ": " + e.what();
    }
    checks.push_back(r);
    checks.push_back(db);
    return checks;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    auto checks = run_verify(cfg);
    bool ok = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    if (cfg.format == "json") {
        json a = json::array();
        for (const auto& c : checks) {
            json e{{"check", c.name}, {"max_deviation", c.deviation}, {"tolerance", c.tolerance}, {"passed", c.passed}};
            if (!c.error.empty()) e["error"] = c.error;
            a.push_back(e);
        }
        emit(cfg, json{{"seed", cfg.seed}, {"passed", ok}, {"checks", a}}.dump(2) + "\n", out);
    } else {
        std::ostringstream t;
        t << "check,max_deviation,tolerance,result\n";
        for (const auto& c : checks)
            t << '"' << c.name << "\"," << c.deviation << "," << c.tolerance << "," << (c.passed ? "pass" : "FAIL " + c.error) << "\n";
        emit(cfg, t.str(), out);
    }
    return ok ? 0 : 4;
}

inline void report_error(std::ostream& err, const std::string& name, const std::string& msg, int code) {
    err << json{{"error", name}, {"message", msg}, {"exit_code", code}}.dump() << "\n";
}

inline int dispatch(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err) {
    try {
        validate(cfg);
        if (cfg.command == "analyze") return cmd_analyze(cfg, in, out);
        if (cfg.command == "foster") return cmd_foster(cfg, in, out);
        if (cfg.command == "correlate") return cmd_correlate(cfg, in, out, err);
        if (cfg.command == "bath") return cmd_bath(cfg, in, out);
        if (cfg.command == "verify") return cmd_verify(cfg, out);
        throw usage_error("unknown command '" + cfg.command + "'");
    } catch (const usage_error& e) {
        report_error(err, "UsageError", e.what(), 2);
        return 2;
    } catch (const syntax_error& e) {
        err << json{{"error", e.name()}, {"message", e.what()}, {"line", e.line()}, {"col", e.col()}, {"exit_code", 3}}.dump() << "\n";
        return 3;
    } catch (const error& e) {
        int code = e.is_parse_error() ? 3 : 4;
        report_error(err, e.name(), e.what(), code);
        return code;
    } catch (const nlohmann::json::exception& e) {
        report_error(err, "SyntaxError", e.what(), 3);
        return 3;
    } catch (const std::exception& e) {
        report_error(err, "InternalError", e.what(), 4);
        return 4;
    }
}

inline int main_entry(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"qfluct: quantum fluctuations of multiport linear networks"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string times, sizes;
    double beta = 0, temp = 0, hbar = 0, dw = 0, wmax = 0, wmin = 0, tol = 0, rref = 0;

    auto common = [&](CLI::App* sub, bool takes_input) {
        if (takes_input) sub->add_option("input", cfg.inputs, "netlist or JSON file, '-' for stdin")->required();
        sub->add_option("--mode", cfg.mode, "flux or charge")->check(CLI::IsMember({"flux", "charge"}));
        sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--output,-o", cfg.output, "write data here instead of stdout");
        sub->add_option("--rref", rref, "reference resistance for scattering (ohms)");
        sub->add_option("--tol", tol, "tolerance override");
        sub->add_option("--hbar", hbar, "override hbar");
        sub->add_flag("--natural-units", cfg.natural_units, "hbar = kB = 1");
    };
    auto* analyze = app.add_subcommand("analyze", "port immittances, scattering and diagnostics");
    common(analyze, true);
    auto* fost = app.add_subcommand("foster", "Foster decomposition");
    common(fost, true);
    fost->add_flag("--netlist", cfg.emit_netlist, "emit the stage netlist realizing the form");
    auto* corr = app.add_subcommand("correlate", "thermal port correlators");
    common(corr, true);
    auto* bath = app.add_subcommand("bath", "replace resistors by discrete LC baths");
    common(bath, true);
    auto* ver = app.add_subcommand("verify", "identity and route-equivalence suite");
    common(ver, false);
    for (auto* sub : {corr}) {
        sub->add_option("--beta", beta, "inverse temperature (1/J, or 1/energy with --natural-units)");
        sub->add_option("--temp", temp, "temperature (K, or energy with --natural-units)");
        sub->add_option("--times", times, "start:stop:count");
        sub->add_option("--omega-max", wmax, "upper quadrature limit");
        sub->add_option("--omega-min", wmin, "infrared cutoff of the quadrature");
        sub->add_flag("--lossy-quadrature", cfg.lossy_quadrature, "integrate the continuous measure of a dissipative netlist");
        sub->add_option("--route", cfg.route, "auto, williamson, foster or phase");
    }
    for (auto* sub : {corr, bath}) {
        sub->add_option("--bath", cfg.bath, "bath modes per resistor");
        sub->add_option("--delta-omega", dw, "bath mode spacing (rad/s)");
    }
    ver->add_option("--seed", cfg.seed, "random seed");
    ver->add_option("--sizes", sizes, "comma-separated oscillator counts");
    ver->add_option("--samples", cfg.samples, "random times per check");
    ver->add_flag("--corrupt", cfg.corrupt, "inject a non-symmetric Hamiltonian (negative test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "UsageError", e.what(), 2);
        return 2;
    }
    for (auto* sub : app.get_subcommands()) {
        cfg.command = sub->get_name();
        auto given = [&](const char* flag) {
            const CLI::Option* o = sub->get_option_no_throw(flag);
            return o != nullptr && o->count() > 0;
        };
        try {
            if (given("--beta")) cfg.beta = beta;
            if (given("--temp")) cfg.temp = temp;
            if (given("--hbar")) cfg.hbar = hbar;
            if (given("--delta-omega")) cfg.delta_omega = dw;
            if (given("--omega-max")) cfg.omega_max = wmax;
            if (given("--omega-min")) cfg.omega_min = wmin;
            if (given("--tol")) cfg.tol = tol;
            if (given("--rref")) cfg.rref = rref;
            if (given("--times")) cfg.times = parse_times(times);
            if (given("--sizes")) {
                cfg.sizes.clear();
                std::stringstream ss(sizes);
                std::string item;
                while (std::getline(ss, item, ',')) cfg.sizes.push_back(std::stoi(item));
            }
        } catch (const usage_error& e) {
            report_error(err, "UsageError", e.what(), 2);
            return 2;
        } catch (const std::logic_error&) {
            report_error(err, "UsageError", "--sizes expects comma-separated integers", 2);
            return 2;
        }
    }
    return dispatch(cfg, in, out, err);
}

} // namespace qfluct::cli
