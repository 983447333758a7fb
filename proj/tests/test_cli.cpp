#include <gtest/gtest.h>

#include <qfluct/cli.hpp>

#include <sstream>

using namespace qfluct;
using qfluct::io::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
    args.insert(args.begin(), "qfluct");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(stdin_text);
    std::ostringstream out, err;
    int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

std::string sample(const std::string& name) { return std::string(QFLUCT_SAMPLES) + "/" + name; }

cplx entry(const json& values, std::size_t k, int idx) {
    const auto& v = values[k][static_cast<std::size_t>(idx)];
    return {v[0].get<double>(), v[1].get<double>()};
}

} // namespace

TEST(Cli, AnalyzeNrhoImpedance) {
    auto r = run({"analyze", sample("nrho.net")});
    ASSERT_EQ(r.code, 0) << r.err;
    json j = json::parse(r.out);
    auto z = io::ratmatrix_from_json(j["Z"]);
    // Z = [[s/C, -R W^2], [R W^2, s/C]] / (s^2 + W^2) with C = R = W = 1
    EXPECT_NEAR(z(0, 0).num()[1], 1.0, 1e-12);
    EXPECT_NEAR(z(0, 1).num()[0], -1.0, 1e-12);
    EXPECT_NEAR(z(1, 0).num()[0], 1.0, 1e-12);
    EXPECT_NEAR(z(0, 0).den()[0], 1.0, 1e-12);
    EXPECT_TRUE(j["diagnostics"]["Z"]["lossless_positive_real"].get<bool>());
    EXPECT_EQ(j["diagnostics"]["nondynamical_pairs"].get<int>(), 1);
    EXPECT_NEAR(j["diagnostics"]["frequencies"][0].get<double>(), 1.0, 1e-12);
}

TEST(Cli, EmptyNetlistHasNoPorts) {
    auto r = run({"analyze", "-"}, "# nothing here\n");
    EXPECT_EQ(r.code, 4);
    json e = json::parse(r.err);
    EXPECT_EQ(e["error"], "NoPorts");
}

TEST(Cli, SingularThreePortReduction) {
    auto r = run({"analyze", sample("singular3.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    json j = json::parse(r.out);
    EXPECT_TRUE(j["Z"].is_null());
    EXPECT_EQ(j["reduction"]["k_open"].get<int>(), 2);
}

TEST(Cli, CorrelateGroundStateNrho) {
    auto r = run({"correlate", sample("nrho.net"), "--natural-units", "--times", "0:6:13"});
    ASSERT_EQ(r.code, 0) << r.err;
    json j = json::parse(r.out);
    for (std::size_t k = 0; k < 13; ++k) {
        double t = j["times"][k].get<double>();
        cplx want = 0.5 * std::exp(cplx(0.0, -t));
        EXPECT_LT(std::abs(entry(j["values"], k, 0) - want), 1e-12);
        EXPECT_LT(std::abs(entry(j["values"], k, 3) - want), 1e-12);
    }
}

TEST(Cli, ChargeModeShortCircuitHasNoCorrelations) {
    auto r = run({"correlate", sample("nrho.net"), "--natural-units", "--mode", "charge", "--beta", "1", "--times", "0:5:6"});
    ASSERT_EQ(r.code, 0) << r.err;
    json j = json::parse(r.out);
    for (const auto& v : j["values"])
        for (const auto& e : v) EXPECT_EQ(std::hypot(e[0].get<double>(), e[1].get<double>()), 0.0);
}

TEST(Cli, BathAgreesWithLossyQuadrature) {
    const std::string grid = "0:12.566370614359172:60";
    auto bath = run({"correlate", sample("nrho_dissipative.net"), "--natural-units", "--bath", "200", "--delta-omega", "0.1", "--times", grid});
    auto quad = run({"correlate", sample("nrho_dissipative.net"), "--natural-units", "--lossy-quadrature", "--omega-min", "0.05",
                     "--times", grid});
    ASSERT_EQ(bath.code, 0) << bath.err;
    ASSERT_EQ(quad.code, 0) << quad.err;
    json a = json::parse(bath.out), b = json::parse(quad.out);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < 60; ++k)
        for (int i = 0; i < 4; ++i) {
            num += std::norm(entry(a["values"], k, i) - entry(b["values"], k, i));
            den += std::norm(entry(b["values"], k, i));
        }
    EXPECT_LT(std::sqrt(num / den), 0.02);
}

TEST(Cli, LossyWithoutCutoffReportsDivergence) {
    auto r = run({"correlate", sample("nrho_dissipative.net"), "--natural-units", "--lossy-quadrature"});
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(json::parse(r.err)["error"], "InfraredDivergent");
    auto plain = run({"correlate", sample("nrho_dissipative.net"), "--natural-units"});
    EXPECT_EQ(plain.code, 4);
    EXPECT_EQ(json::parse(plain.err)["error"], "ModeUnsupportedElement");
}

TEST(Cli, VerifySuite) {
    auto ok = run({"verify"});
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_TRUE(json::parse(ok.out)["passed"].get<bool>());
    auto sized = run({"verify", "--sizes", "4", "--samples", "50"});
    EXPECT_EQ(sized.code, 0);
    auto bad = run({"verify", "--corrupt", "--sizes", "2"});
    EXPECT_NE(bad.code, 0);
    json j = json::parse(bad.out);
    EXPECT_FALSE(j["passed"].get<bool>());
    EXPECT_NE(j["checks"][0]["error"].get<std::string>().find("NotPSD"), std::string::npos);
}

TEST(Cli, DeterministicOutput) {
    auto a = run({"verify", "--seed", "42"});
    auto b = run({"verify", "--seed", "42"});
    EXPECT_EQ(a.out, b.out);
    auto c = run({"correlate", sample("nrho.net"), "--natural-units", "--beta", "2"});
    auto d = run({"correlate", sample("nrho.net"), "--natural-units", "--beta", "2"});
    EXPECT_EQ(c.out, d.out);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"correlate", sample("nrho.net"), "--beta", "1", "--temp", "3"}).code, 2);
    EXPECT_EQ(run({"correlate", sample("nrho.net"), "--times", "0:1"}).code, 2);
    EXPECT_EQ(run({"correlate", sample("nrho.net"), "--times", "0:1:0"}).code, 2);
    EXPECT_EQ(run({"correlate", sample("nrho.net"), "--tol", "-1"}).code, 2);
    EXPECT_EQ(run({"analyze", "/nonexistent/file.net"}).code, 2);
    auto parse = run({"analyze", "-"}, "C c1 1 0 1\nL l1 1 0 zz\nport p 1\n");
    EXPECT_EQ(parse.code, 3);
    json e = json::parse(parse.err);
    EXPECT_EQ(e["line"].get<int>(), 2);
    EXPECT_EQ(run({"analyze", "-"}, "{\"kind\": ").code, 3);
}

TEST(Cli, FosterAndBathCommands) {
    auto f = run({"foster", sample("nrho.net")});
    ASSERT_EQ(f.code, 0) << f.err;
    auto form = io::foster_from_json(json::parse(f.out));
    ASSERT_EQ(form.stages.size(), 1u);
    // the Foster JSON is itself a correlate input
    auto r = run({"correlate", "-", "--natural-units", "--times", "0:1:2"}, f.out);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LT(std::abs(entry(json::parse(r.out)["values"], 1, 0) - 0.5 * std::exp(cplx(0, -1))), 1e-12);
    auto n = run({"foster", sample("nrho.net"), "--netlist"});
    ASSERT_EQ(n.code, 0);
    auto net = network::parse_netlist(n.out);
    EXPECT_EQ(net.ports.size(), 2u);
    auto b = run({"bath", sample("nrho_dissipative.net"), "--bath", "5", "--delta-omega", "0.2"});
    ASSERT_EQ(b.code, 0) << b.err;
    auto expanded = network::parse_netlist(json::parse(b.out)["netlist"].get<std::string>());
    EXPECT_FALSE(expanded.has_resistors());
    EXPECT_EQ(expanded.elements.size(), 3u + 20u);
    auto text = run({"bath", sample("nrho_dissipative.net"), "--bath", "5", "--delta-omega", "0.2", "--format", "csv"});
    EXPECT_EQ(network::parse_netlist(text.out).elements.size(), 23u);
}

TEST(Io, RoundTripsAndCsv) {
    std::mt19937_64 rng(4);
    auto f = foster::random_foster_form(rng, 2, 2, true);
    auto g = io::foster_from_json(json::parse(io::to_json(f).dump()));
    EXPECT_LT(la::max_abs(Mat(g.stages[1].B - f.stages[1].B)), 1e-300);
    auto z = foster::foster_synthesize(f);
    auto z2 = io::ratmatrix_from_json(json::parse(io::to_json(z).dump()));
    EXPECT_LT(la::max_abs(CMat(z2.eval(cplx(0.3, 0.2)) - z.eval(cplx(0.3, 0.2)))), 1e-14);
    correlator::CorrelatorSeries s;
    s.times = {0.0, 0.5};
    s.values = {CMat::Identity(2, 2), CMat::Zero(2, 2)};
    s.labels = {"a", "b"};
    std::string csv = io::to_csv(s);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,re[a|a],im[a|a],re[a|b],im[a|b],re[b|a],im[b|a],re[b|b],im[b|b]");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
