#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

namespace qfluct {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar_si = 1.054571817e-34;
inline constexpr double kb_si = 1.380649e-23;

namespace la {

// [[0,1],[-1,0]]
inline Mat j2() {
    Mat j(2, 2);
    j << 0, 1, -1, 0;
    return j;
}

inline CMat sigma_y() {
    CMat s(2, 2);
    s << 0, cplx(0, -1), cplx(0, 1), 0;
    return s;
}

// canonical symplectic form on interleaved (q1,p1,q2,p2,...)
inline Mat symplectic_form(Eigen::Index n) {
    Mat j = Mat::Zero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        j(2 * k, 2 * k + 1) = 1;
        j(2 * k + 1, 2 * k) = -1;
    }
    return j;
}

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline CMat hermitian_part(const CMat& f) { return (f + f.adjoint()) / 2.0; }

// orthonormal basis (columns) of the null space of a
inline Mat null_space(const Mat& a, double rel_tol) {
    const Eigen::Index n = a.cols();
    if (a.rows() == 0) return Mat::Identity(n, n);
    Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    double smax = sv.size() ? sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * std::max(smax, 1e-300)) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

// orthonormal basis of the orthogonal complement of span(cols of b) in R^n
inline Mat orth_complement(const Mat& b, Eigen::Index n, double rel_tol = 1e-10) {
    if (b.cols() == 0) return Mat::Identity(n, n);
    return null_space(b.transpose(), rel_tol);
}

inline double min_eigenvalue_hermitian(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

} // namespace la
} // namespace qfluct
