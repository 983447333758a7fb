#pragma once

// Williamson normal form, gain-immittance W(s), exp(tJh) and the spectral
// representation of the fundamental matrix.

#include "errors.hpp"
#include "linalg.hpp"
#include "spectral.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace qfluct::symplectic {

struct WilliamsonResult {
    Mat S; // x = S y, S^T J S = J, S^T h S = blockdiag(W_k 1_2, 0)
    std::vector<double> frequencies;
    std::vector<std::pair<int, int>> dyn_indices;
    std::vector<std::pair<int, int>> nondyn_indices;
};

struct SkewForm {
    Mat O;                  // orthogonal, O^T K O = blockdiag(mu_k J2)
    std::vector<double> mu; // mu_k > 0
};

// Normal form of a nondegenerate real antisymmetric matrix. Pairs (e, f) are
// built from eigenvectors of -K^2 = K^T K with f = -K e / |K e|, choosing
// at each step the candidate with the largest residual against the pairs
// already taken; this keeps degenerate eigenspaces consistent.
inline SkewForm skew_normal_form(const Mat& k) {
    const Eigen::Index d = k.rows();
    Mat kk = k.transpose() * k;
    Eigen::SelfAdjointEigenSolver<Mat> es((kk + kk.transpose()) / 2.0);
    const Mat& v = es.eigenvectors();
    Mat res = v; // candidates minus their projection on accepted pairs
    std::vector<bool> used(d, false);
    Mat o(d, d);
    std::vector<double> mu;
    Eigen::Index taken = 0;
    while (taken < d) {
        Eigen::Index best = -1;
        double bn = -1.0;
        for (Eigen::Index c = 0; c < d; ++c) {
            if (used[c]) continue;
            double nr = res.col(c).norm();
            if (nr > bn) {
                bn = nr;
                best = c;
            }
        }
        used[best] = true;
        if (bn < 1e-6) continue;
        Vec e = res.col(best) / bn;
        if (taken) e -= o.leftCols(taken) * (o.leftCols(taken).transpose() * e);
        e.normalize();
        Vec ke = k * e;
        double m = ke.norm();
        Vec f = -ke / m;
        // re-orthogonalize f against earlier pairs and e
        if (taken) f -= o.leftCols(taken) * (o.leftCols(taken).transpose() * f);
        f -= e * e.dot(f);
        f.normalize();
        o.col(taken) = e;
        o.col(taken + 1) = f;
        mu.push_back(e.dot(k * f));
        taken += 2;
        res -= e * (e.transpose() * res);
        res -= f * (f.transpose() * res);
    }
    return {o, mu};
}

// symplectic basis (columns) of a subspace spanned by orthonormal columns b
// on which J is nondegenerate
inline Mat symplectic_basis(const Mat& b, const Mat& j) {
    Mat jb = b.transpose() * j * b;
    jb = (jb - jb.transpose()) / 2.0;
    SkewForm sf = skew_normal_form(jb);
    Mat t = sf.O;
    for (std::size_t i = 0; i < sf.mu.size(); ++i) t.middleCols(2 * i, 2) /= std::sqrt(sf.mu[i]);
    return b * t;
}

inline WilliamsonResult williamson(const Mat& h_in, const Mat& j, double tol = 1e-10) {
    const Eigen::Index d = h_in.rows();
    if (h_in.cols() != d || j.rows() != d || j.cols() != d || d % 2)
        raise(errc::invalid_argument, "williamson: h and J must be square of equal even dimension");
    double hn = std::max(la::max_abs(h_in), 1e-300);
    if (la::max_abs(Mat(h_in - h_in.transpose())) > tol * hn)
        raise(errc::not_psd, "Hamiltonian matrix is not symmetric");
    Mat h = (h_in + h_in.transpose()) / 2.0;
    WilliamsonResult res;
    if (d == 0) return res;
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const Vec& lam = es.eigenvalues();
    double norm = std::max(std::abs(lam(0)), std::abs(lam(d - 1)));
    if (norm == 0.0) norm = 1.0;
    if (lam(0) < -1e-9 * norm)
        raise(errc::not_psd, "Hamiltonian matrix has negative eigenvalue " + std::to_string(lam(0)));
    std::vector<Eigen::Index> ker;
    for (Eigen::Index i = 0; i < d; ++i)
        if (lam(i) <= tol * norm) ker.push_back(i);
    const Eigen::Index k = static_cast<Eigen::Index>(ker.size());
    Mat kb(d, k);
    for (Eigen::Index i = 0; i < k; ++i) kb.col(i) = es.eigenvectors().col(ker[i]);

    Mat nondyn(d, 0);
    if (k > 0) {
        // the kernel must be a symplectic subspace, otherwise Jh has a
        // nontrivial Jordan block at zero
        Mat jk = kb.transpose() * j * kb;
        double smin = k % 2 ? 0.0 : Eigen::JacobiSVD<Mat>(jk).singularValues()(k - 1);
        if (smin <= 1e-9)
            raise(errc::free_particle_sector,
                  "Jh has a non-diagonal Jordan block at zero (free-particle sector, kernel dimension " +
                      std::to_string(k) + ")");
        nondyn = symplectic_basis(kb, j);
    }
    Mat b = k > 0 ? la::null_space((j * kb).transpose(), 1e-10) : Mat::Identity(d, d);
    Mat v = symplectic_basis(b, j);
    const Eigen::Index m = v.cols();

    Mat hv = v.transpose() * h * v;
    hv = (hv + hv.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Mat> ev(hv);
    Vec lv = ev.eigenvalues();
    if (m > 0 && lv(0) <= 0.0) raise(errc::not_psd, "dynamical sector is not positive definite");
    Mat hmh = ev.eigenvectors() * lv.cwiseSqrt().cwiseInverse().asDiagonal() * ev.eigenvectors().transpose();
    Mat jm = la::symplectic_form(m / 2);
    Mat kp = hmh * jm * hmh;
    kp = (kp - kp.transpose()) / 2.0;
    SkewForm sf = skew_normal_form(kp);
    // ascending frequency = descending mu
    std::vector<std::size_t> ord(sf.mu.size());
    for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b2) { return sf.mu[a] > sf.mu[b2]; });
    Mat sv(m, m);
    for (std::size_t p = 0; p < ord.size(); ++p) {
        double w = 1.0 / sf.mu[ord[p]];
        sv.middleCols(2 * p, 2) = hmh * sf.O.middleCols(2 * ord[p], 2) * std::sqrt(w);
        res.frequencies.push_back(w);
        res.dyn_indices.emplace_back(static_cast<int>(2 * p), static_cast<int>(2 * p + 1));
    }
    res.S.resize(d, d);
    res.S.leftCols(m) = v * sv;
    res.S.rightCols(k) = nondyn;
    for (Eigen::Index p = 0; p < k / 2; ++p)
        res.nondyn_indices.emplace_back(static_cast<int>(m + 2 * p), static_cast<int>(m + 2 * p + 1));
    return res;
}

// W(s) = -s (s 1 - Jh)^{-1} J
inline CMat gain_immittance(const Mat& h, const Mat& j, cplx s) {
    const Eigen::Index d = h.rows();
    CMat a = s * CMat::Identity(d, d) - (j * h).cast<cplx>();
    Eigen::PartialPivLU<CMat> lu(a);
    if (!(lu.rcond() > 1e-13)) raise(errc::resonant_evaluation, "s is an eigenvalue of Jh");
    return -s * lu.solve(j.cast<cplx>());
}

inline Mat fundamental(const Mat& h, const Mat& j, double t) {
    Mat a = t * (j * h);
    return a.exp();
}

// atoms of W^H(w): canonical blocks (W/2)(1 -+ sigma_y) at +-W, transported by S
// with proj: atoms of proj W^H proj^T, never forming the full-size blocks
inline SpectralMeasure w_hermitian_measure(const WilliamsonResult& w, const Mat& proj) {
    SpectralMeasure m;
    m.dim = static_cast<int>(proj.rows());
    const CMat sy = la::sigma_y();
    const CMat id = CMat::Identity(2, 2);
    for (std::size_t k = 0; k < w.frequencies.size(); ++k) {
        double om = w.frequencies[k];
        CMat sk = (proj * w.S.middleCols(w.dyn_indices[k].first, 2)).cast<cplx>();
        CMat plus = sk * ((om / 2.0) * (id - sy)) * sk.transpose();
        CMat minus = sk * ((om / 2.0) * (id + sy)) * sk.transpose();
        m.atoms.push_back({om, plus, minus});
        m.peaks.push_back(om);
    }
    return m;
}

inline SpectralMeasure w_hermitian_measure(const WilliamsonResult& w) {
    return w_hermitian_measure(w, Mat::Identity(w.S.rows(), w.S.rows()));
}

inline SpectralMeasure w_hermitian_measure(const Mat& h, const Mat& j) { return w_hermitian_measure(williamson(h, j)); }

struct IdentityReport {
    double t = 0.0;
    double max_abs_deviation = 0.0;
    bool passed = false;
};

// exp(tJh) against i sum_k (1/W_k)[plus_k e^{-iW_k t} - minus_k e^{iW_k t}] J
inline IdentityReport verify_fundamental_identity(const Mat& h, const Mat& j, double t, double tol = 1e-9) {
    SpectralMeasure m = w_hermitian_measure(h, j);
    CMat acc = CMat::Zero(h.rows(), h.cols());
    const cplx i(0.0, 1.0);
    for (const auto& a : m.atoms)
        acc += (1.0 / a.omega) * (a.plus * std::exp(-i * (a.omega * t)) - a.minus * std::exp(i * (a.omega * t)));
    CMat rhs = i * acc * j.cast<cplx>();
    Mat lhs = fundamental(h, j, t);
    double dev = la::max_abs(CMat(rhs - lhs.cast<cplx>()));
    return {t, dev, dev < tol};
}

} // namespace qfluct::symplectic
