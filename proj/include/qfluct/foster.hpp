#pragma once

// Foster expansion of lossless immittances, two-port stage factorization and
// reduction of scattering matrices that lack an immittance.

#include "errors.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "ratmat.hpp"
#include "spectral.hpp"

#include <algorithm>
#include <random>
#include <cmath>
#include <string>
#include <vector>

namespace qfluct::foster {

using ratmat::Poly;
using ratmat::RatFunc;
using ratmat::RatMatrix;

enum class Kind { impedance, admittance };

inline const char* kind_name(Kind k) { return k == Kind::impedance ? "impedance" : "admittance"; }

struct FosterStage {
    double omega = 0.0;
    Mat A; // symmetric PSD
    Mat B; // antisymmetric
};

// Z(s) = Binf + A0/s + s Ainf + sum_k (s A_k + B_k)/(s^2 + W_k^2)
struct FosterForm {
    Kind kind = Kind::impedance;
    Mat Binf, A0, Ainf;
    std::vector<FosterStage> stages;

    int dim() const { return static_cast<int>(Binf.rows()); }
};

// residue at s = iW
inline CMat stage_residue(const FosterStage& st) {
    return 0.5 * st.A.cast<cplx>() - cplx(0.0, 1.0 / (2.0 * st.omega)) * st.B.cast<cplx>();
}

inline FosterForm foster_decompose(const RatMatrix& z, Kind kind = Kind::impedance, double tol = 1e-8) {
    auto rep = ratmat::is_lossless_positive_real(z, tol);
    if (!rep.ok) raise(errc::not_lossless_pr, rep.reason);
    const int n = z.rows();
    FosterForm f;
    f.kind = kind;
    f.Binf = f.A0 = f.Ainf = Mat::Zero(n, n);
    RatMatrix proper(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            auto [q, r] = ratmat::divmod(z(i, j).num(), z(i, j).den());
            f.Binf(i, j) = q[0];
            f.Ainf(i, j) = q[1];
            proper(i, j) = RatFunc(r, z(i, j).den());
        }
    double scale = 0.0;
    auto ps = ratmat::poles(proper);
    for (const auto& p : ps) scale = std::max(scale, std::abs(p.location));
    for (const auto& p : ps) {
        if (std::abs(p.location) <= 1e-10 * scale || p.location == cplx(0.0)) {
            f.A0 = p.residue.real();
        } else if (p.location.imag() > 0) {
            FosterStage st;
            st.omega = p.location.imag();
            st.A = 2.0 * p.residue.real();
            st.B = -2.0 * st.omega * p.residue.imag();
            st.A = (st.A + st.A.transpose()) / 2.0;
            st.B = (st.B - st.B.transpose()) / 2.0;
            double lmin = la::min_eigenvalue_hermitian(stage_residue(st));
            double ref = std::max(la::max_abs(stage_residue(st)), 1e-300);
            if (lmin < -tol * ref)
                raise(errc::residue_not_psd, "residue at s=" + std::to_string(st.omega) + "i has eigenvalue " + std::to_string(lmin));
            f.stages.push_back(st);
        }
    }
    f.A0 = (f.A0 + f.A0.transpose()) / 2.0;
    f.Ainf = (f.Ainf + f.Ainf.transpose()) / 2.0;
    std::sort(f.stages.begin(), f.stages.end(), [](const FosterStage& a, const FosterStage& b) { return a.omega < b.omega; });
    return f;
}

inline RatMatrix foster_synthesize(const FosterForm& f) {
    const int n = f.dim();
    RatMatrix z(n, n);
    auto tiny = [](double v, double ref) { return std::abs(v) <= 1e-13 * ref; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // factors present in this entry
            std::vector<Poly> fac;
            std::vector<Poly> top;
            for (const auto& st : f.stages) {
                double ref = std::max({la::max_abs(st.A), la::max_abs(st.B), 1e-300});
                if (tiny(st.A(i, j), ref) && tiny(st.B(i, j), ref)) continue;
                fac.push_back(Poly{st.omega * st.omega, 0.0, 1.0});
                top.push_back(Poly{st.B(i, j), st.A(i, j)});
            }
            bool pole0 = f.A0(i, j) != 0.0;
            if (pole0) {
                fac.push_back(Poly{0.0, 1.0});
                top.push_back(Poly{f.A0(i, j)});
            }
            Poly den = Poly::constant(1.0);
            for (const auto& p : fac) den = den * p;
            Poly num = Poly{f.Binf(i, j), f.Ainf(i, j)} * den;
            for (std::size_t k = 0; k < fac.size(); ++k) {
                Poly other = Poly::constant(1.0);
                for (std::size_t m = 0; m < fac.size(); ++m)
                    if (m != k) other = other * fac[m];
                num = num + top[k] * other;
            }
            z(i, j) = RatFunc(num, den);
        }
    return z;
}

struct TwoPortStage {
    double omega = 0.0;
    double r_stage = 0.0; // gyration resistance, W R C = 1
    double c_stage = 1.0;
    bool nonreciprocal = true;
    Mat t_rows; // 2 x N or 1 x N
};

// T^T Z_stage(s) T; Z_stage is the nonreciprocal oscillator or the LC one-port
inline CMat stage_response(const TwoPortStage& st, cplx s) {
    const double w = st.omega;
    const cplx d = s * s + w * w;
    CMat zs;
    if (st.nonreciprocal) {
        zs.resize(2, 2);
        zs << s / st.c_stage, -st.r_stage * w * w, st.r_stage * w * w, s / st.c_stage;
    } else {
        zs.resize(1, 1);
        zs << s / st.c_stage;
    }
    CMat t = st.t_rows.cast<cplx>();
    return t.transpose() * (zs / d) * t;
}

// Eigen-pairing factorization of one Foster stage into canonical two-ports.
inline std::vector<TwoPortStage> stage_factorize(double omega, const Mat& a, const Mat& b, double tol = 1e-10) {
    const Eigen::Index n = a.rows();
    std::vector<TwoPortStage> out;
    double ref = std::max({la::max_abs(a), la::max_abs(b) / omega, 1e-300});
    if (la::max_abs(b) <= tol * omega * ref) {
        Eigen::SelfAdjointEigenSolver<Mat> es((a + a.transpose()) / 4.0);
        for (Eigen::Index k = 0; k < n; ++k) {
            double lam = es.eigenvalues()(k);
            if (lam < -1e-8 * ref) raise(errc::residue_not_psd, "stage residue has eigenvalue " + std::to_string(lam));
            if (lam <= tol * ref) continue;
            Vec u = es.eigenvectors().col(k);
            Eigen::Index im;
            u.cwiseAbs().maxCoeff(&im);
            if (u(im) < 0) u = -u;
            out.push_back({omega, 1.0 / omega, 1.0, false, std::sqrt(2.0 * lam) * u.transpose()});
        }
        return out;
    }
    FosterStage st{omega, a, b};
    CMat h = stage_residue(st);
    Eigen::SelfAdjointEigenSolver<CMat> es(la::hermitian_part(h));
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        double lam = es.eigenvalues()(k);
        if (lam < -1e-8 * ref) raise(errc::residue_not_psd, "stage residue has eigenvalue " + std::to_string(lam));
        if (lam <= tol * ref) continue;
        CVec u = es.eigenvectors().col(k);
        // phase making Re u orthogonal to Im u with |Re u| >= |Im u|
        cplx uu = u.transpose() * u;
        u *= std::exp(cplx(0.0, -0.5 * std::arg(uu)));
        Vec re = u.real(), imv = u.imag();
        Eigen::Index im;
        re.cwiseAbs().maxCoeff(&im);
        if (re(im) < 0) {
            re = -re;
            imv = -imv;
        }
        double g = std::sqrt(2.0 * lam);
        if (imv.norm() <= 1e-8 * re.norm()) {
            out.push_back({omega, 1.0 / omega, 1.0, false, g * re.transpose()});
        } else {
            Mat t(2, n);
            t.row(0) = g * re.transpose();
            t.row(1) = -g * imv.transpose();
            out.push_back({omega, 1.0 / omega, 1.0, true, t});
        }
    }
    return out;
}

// Netlist realizing the finite-frequency stages: canonical stage circuits on
// internal nodes, coupled to the ports through ideal transformers whose
// secondaries are chained in series at each port.
inline network::Netlist stage_netlist(const FosterForm& f, double rref = 50.0) {
    using namespace network;
    Netlist net;
    net.default_rref = rref;
    const int n = f.dim();
    std::vector<std::vector<std::pair<std::string, double>>> chain(n);
    int sid = 0;
    for (const auto& st : f.stages) {
        for (const auto& tp : stage_factorize(st.omega, st.A, st.B)) {
            std::string base = "s" + std::to_string(sid++);
            std::vector<std::string> nodes;
            if (tp.nonreciprocal) {
                nodes = {base + "a", base + "b"};
                net.add(Capacitor{"C" + base + "a", nodes[0], ground, tp.c_stage});
                net.add(Capacitor{"C" + base + "b", nodes[1], ground, tp.c_stage});
                net.add(Gyrator{"G" + base, nodes[0], ground, nodes[1], ground, tp.r_stage});
            } else {
                nodes = {base + "a"};
                net.add(Capacitor{"C" + base, nodes[0], ground, tp.c_stage});
                net.add(Inductor{"L" + base, nodes[0], ground, 1.0 / (tp.c_stage * st.omega * st.omega)});
            }
            for (std::size_t r = 0; r < nodes.size(); ++r)
                for (int p = 0; p < n; ++p)
                    if (tp.t_rows(r, p) != 0.0) chain[p].push_back({nodes[r], tp.t_rows(r, p)});
        }
    }
    for (int p = 0; p < n; ++p) {
        std::string top = "p" + std::to_string(p);
        std::string cur = top;
        for (std::size_t k = 0; k < chain[p].size(); ++k) {
            std::string next = k + 1 == chain[p].size() ? ground : top + "_" + std::to_string(k);
            net.add(Transformer{"T" + top + "_" + std::to_string(k), chain[p][k].first, ground, cur, next, chain[p][k].second});
            cur = next;
        }
        if (!chain[p].empty()) net.ports.push_back({"P" + std::to_string(p + 1), top, ground, std::nullopt});
    }
    return net;
}

// F^H atoms: residue at iW sits at -W, its conjugate at +W
inline SpectralMeasure port_hermitian_measure(const FosterForm& f) {
    SpectralMeasure m;
    m.dim = f.dim();
    for (const auto& st : f.stages) {
        CMat res = stage_residue(st);
        m.atoms.push_back({st.omega, res.conjugate(), res});
        m.peaks.push_back(st.omega);
    }
    return m;
}

struct ScatteringReduction {
    Kind kind = Kind::impedance;
    Mat T;          // orthogonal; rows [P; open rows]
    int k_open = 0; // eigenvalue +1 (impedance) or -1 (admittance) directions
    Mat P;          // (n-k) x n
    RatMatrix S_reduced;
    RatMatrix reduced_immittance;
};

namespace detail {

inline double frequency_scale(const RatMatrix& s) {
    double logsum = 0.0;
    int cnt = 0;
    for (int i = 0; i < s.rows(); ++i)
        for (int j = 0; j < s.cols(); ++j)
            for (const cplx& r : ratmat::roots(s(i, j).den()))
                if (std::abs(r) > 0) {
                    logsum += std::log(std::abs(r));
                    ++cnt;
                }
    return cnt ? std::exp(logsum / cnt) : 1.0;
}

} // namespace detail

inline ScatteringReduction reduce_singular_scattering(const RatMatrix& s, Kind kind = Kind::impedance, double rref = 50.0,
                                                      double tol = 1e-8) {
    const int n = s.rows();
    if (s.cols() != n) raise(errc::invalid_argument, "scattering matrix must be square");
    const double wc = detail::frequency_scale(s);
    const double sgn = kind == Kind::impedance ? 1.0 : -1.0;
    Mat stack(14 * n, n);
    for (int k = 0; k < 7; ++k) {
        double w = wc * std::pow(30.0, (k - 3) / 3.0);
        CMat sv = s.eval(cplx(0.0, w));
        if (la::max_abs(CMat(sv.adjoint() * sv - CMat::Identity(n, n))) > tol)
            raise(errc::not_lossless, "scattering matrix is not unitary at w=" + std::to_string(w));
        CMat d = sv - sgn * CMat::Identity(n, n);
        stack.middleRows(2 * n * k, n) = d.real();
        stack.middleRows(2 * n * k + n, n) = d.imag();
    }
    Eigen::JacobiSVD<Mat> svd(stack, Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * std::max(1.0, sv(0))) ++rank;
    const int k = n - rank;
    if (k == 0)
        raise(errc::no_constant_eigenspace,
              std::string("no frequency-independent eigenvalue ") + (kind == Kind::impedance ? "+1" : "-1") + " direction");
    ScatteringReduction red;
    red.kind = kind;
    red.k_open = k;
    Mat v = svd.matrixV();
    red.P = v.leftCols(rank).transpose();
    for (int r = 0; r < rank; ++r) {
        Eigen::Index im;
        red.P.row(r).cwiseAbs().maxCoeff(&im);
        if (red.P(r, im) < 0) red.P.row(r) *= -1.0;
    }
    red.T.resize(n, n);
    red.T.topRows(rank) = red.P;
    red.T.bottomRows(k) = v.rightCols(k).transpose();
    red.S_reduced = red.P * s * Mat(red.P.transpose());
    if (rank > 0) {
        if (kind == Kind::impedance) {
            red.reduced_immittance = ratmat::s_to_z(red.S_reduced, rref);
        } else {
            RatMatrix one = RatMatrix::identity(rank);
            red.reduced_immittance = (1.0 / rref) * ((one - red.S_reduced) * ratmat::inverse(one + red.S_reduced));
        }
    } else {
        red.reduced_immittance = RatMatrix(0, 0);
    }
    return red;
}

inline SpectralMeasure port_hermitian_measure(const ScatteringReduction& red) {
    if (red.P.rows() == 0) {
        SpectralMeasure m;
        m.dim = static_cast<int>(red.T.cols());
        return m;
    }
    FosterForm f = foster_decompose(red.reduced_immittance, red.kind);
    return port_hermitian_measure(f).project(red.P.transpose());
}

// Random lossless form: stage residues sum of rank-one hermitian terms u u^H,
// frequencies in [0.5, 3]. A0, Ainf PSD and Binf antisymmetric when poles_at_ends.
inline FosterForm random_foster_form(std::mt19937_64& rng, int dim, int stages, bool poles_at_ends = false) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> uw(0.5, 3.0);
    std::uniform_int_distribution<int> ur(1, dim);
    auto psd = [&](int rank) {
        Mat v(dim, rank);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < rank; ++j) v(i, j) = g(rng);
        return Mat(v * v.transpose() / rank);
    };
    FosterForm f;
    f.Binf = Mat::Zero(dim, dim);
    f.A0 = Mat::Zero(dim, dim);
    f.Ainf = Mat::Zero(dim, dim);
    if (poles_at_ends) {
        f.A0 = psd(ur(rng));
        f.Ainf = psd(ur(rng));
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                f.Binf(i, j) = g(rng);
                f.Binf(j, i) = -f.Binf(i, j);
            }
    }
    std::vector<double> ws;
    while (static_cast<int>(ws.size()) < stages) {
        double w = uw(rng);
        bool close = std::any_of(ws.begin(), ws.end(), [w](double x) { return std::abs(x - w) < 0.05; });
        if (!close) ws.push_back(w);
    }
    std::sort(ws.begin(), ws.end());
    for (double w : ws) {
        const int rank = ur(rng);
        CMat res = CMat::Zero(dim, dim);
        for (int r = 0; r < rank; ++r) {
            CVec u(dim);
            for (int i = 0; i < dim; ++i) u(i) = cplx(g(rng), g(rng));
            res += u * u.adjoint() / static_cast<double>(rank);
        }
        Mat a = 2.0 * res.real();
        Mat b = -2.0 * w * res.imag();
        f.stages.push_back({w, (a + a.transpose()) / 2.0, (b - b.transpose()) / 2.0});
    }
    return f;
}

// Unit vector d of the three-port with a single resonator mode
inline Vec singular3_direction(double phi_z, double phi_x) {
    Vec d(3);
    d << std::cos(phi_z), -std::sin(phi_z) * std::cos(phi_x), std::sin(phi_z) * std::sin(phi_x);
    return d;
}

// S = 1 + d d^T (s_LC - 1) with s_LC the reflection of a parallel LC of
// capacitance c and frequency omega; no impedance exists for n > 1.
inline RatMatrix embedded_resonator_scattering(const Vec& d, double c, double omega, double rref) {
    RatFunc sc(Poly{-rref * omega * omega, 1.0 / c, -rref}, Poly{rref * omega * omega, 1.0 / c, rref});
    const int n = static_cast<int>(d.size());
    RatMatrix s(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s(i, j) = (i == j ? RatFunc(1.0) : RatFunc()) + (d(i) * d(j)) * (sc - RatFunc(1.0));
    return s;
}

} // namespace qfluct::foster
