#pragma once

// Rational matrix functions of the Laplace variable s.

#include "errors.hpp"
#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace qfluct::ratmat {

// results whose magnitude falls below cancel_eps times the magnitude of the
// contributing terms are treated as exact cancellation
inline constexpr double cancel_eps = 64 * std::numeric_limits<double>::epsilon();

class Poly {
public:
    Poly() = default;
    explicit Poly(std::vector<double> c) : c_(std::move(c)) { trim(); }
    Poly(std::initializer_list<double> c) : c_(c) { trim(); }

    static Poly constant(double a) { return Poly(std::vector<double>{a}); }
    static Poly monomial(double a, int k) {
        std::vector<double> c(k + 1, 0.0);
        c[k] = a;
        return Poly(std::move(c));
    }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.empty(); }
    const std::vector<double>& coeffs() const { return c_; }
    double operator[](int k) const { return k >= 0 && k < static_cast<int>(c_.size()) ? c_[k] : 0.0; }
    double lead() const { return c_.empty() ? 0.0 : c_.back(); }

    template <class T>
    T operator()(T s) const {
        T acc = T(0);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * s + T(*it);
        return acc;
    }

    // sum |c_k| r^k; reference magnitude for cancellation tests at |s| = r
    double abs_scale(double r) const {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * r + std::abs(*it);
        return acc;
    }

    double norm_inf() const {
        double m = 0.0;
        for (double v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    // p(-s)
    Poly reflect() const {
        std::vector<double> c = c_;
        for (std::size_t k = 1; k < c.size(); k += 2) c[k] = -c[k];
        return Poly(std::move(c));
    }

    Poly derivative() const {
        if (c_.size() <= 1) return {};
        std::vector<double> c(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) c[k - 1] = static_cast<double>(k) * c_[k];
        return Poly(std::move(c));
    }

    Poly operator-() const {
        std::vector<double> c = c_;
        for (double& v : c) v = -v;
        return Poly(std::move(c));
    }

private:
    void trim() {
        while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    }
    std::vector<double> c_;
};

inline Poly operator*(double a, const Poly& p) {
    if (a == 0.0) return {};
    std::vector<double> c = p.coeffs();
    for (double& v : c) v *= a;
    return Poly(std::move(c));
}

inline Poly operator+(const Poly& a, const Poly& b) {
    const int n = std::max(a.degree(), b.degree()) + 1;
    std::vector<double> c(std::max(n, 0));
    for (int k = 0; k < n; ++k) {
        double x = a[k], y = b[k];
        double v = x + y;
        if (std::abs(v) <= cancel_eps * (std::abs(x) + std::abs(y))) v = 0.0;
        c[k] = v;
    }
    return Poly(std::move(c));
}

inline Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

inline Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    const int da = a.degree(), db = b.degree();
    std::vector<double> c(da + db + 1, 0.0), mag(da + db + 1, 0.0);
    for (int i = 0; i <= da; ++i)
        for (int j = 0; j <= db; ++j) {
            double t = a[i] * b[j];
            c[i + j] += t;
            mag[i + j] += std::abs(t);
        }
    for (std::size_t k = 0; k < c.size(); ++k)
        if (std::abs(c[k]) <= cancel_eps * mag[k]) c[k] = 0.0;
    return Poly(std::move(c));
}

// long division a = q*b + r, deg r < deg b
inline std::pair<Poly, Poly> divmod(const Poly& a, const Poly& b) {
    if (b.is_zero()) raise(errc::invalid_argument, "polynomial division by zero");
    if (a.degree() < b.degree()) return {Poly{}, a};
    std::vector<double> r = a.coeffs(), mag(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) mag[k] = std::abs(r[k]);
    const int db = b.degree();
    std::vector<double> q(a.degree() - db + 1, 0.0);
    for (int k = a.degree() - db; k >= 0; --k) {
        double f = r[k + db] / b.lead();
        q[k] = f;
        r[k + db] = 0.0;
        for (int j = 0; j < db; ++j) {
            double t = f * b[j];
            r[k + j] -= t;
            mag[k + j] += std::abs(t);
        }
    }
    for (std::size_t k = 0; k < r.size(); ++k)
        if (std::abs(r[k]) <= cancel_eps * mag[k]) r[k] = 0.0;
    r.resize(std::min<std::size_t>(r.size(), db));
    return {Poly(std::move(q)), Poly(std::move(r))};
}

// real polynomial lead * prod (s - r_k); conjugate pairs expected
inline Poly from_roots(const std::vector<cplx>& roots, double lead = 1.0) {
    std::vector<cplx> c{cplx(1.0)};
    for (const cplx& r : roots) {
        std::vector<cplx> n(c.size() + 1, cplx(0.0));
        for (std::size_t k = 0; k < c.size(); ++k) {
            n[k + 1] += c[k];
            n[k] -= r * c[k];
        }
        c = std::move(n);
    }
    std::vector<double> out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = lead * c[k].real();
    return Poly(std::move(out));
}

// Companion-matrix roots with frequency scaling and a guarded Newton polish.
// Exact zero roots are returned exactly.
inline std::vector<cplx> roots(const Poly& p, bool polish = true) {
    std::vector<cplx> out;
    if (p.degree() < 1) return out;
    const auto& c0 = p.coeffs();
    std::size_t z = 0;
    while (z < c0.size() && c0[z] == 0.0) ++z;
    for (std::size_t k = 0; k < z; ++k) out.emplace_back(0.0, 0.0);
    std::vector<double> c(c0.begin() + z, c0.end());
    const int n = static_cast<int>(c.size()) - 1;
    if (n < 1) return out;
    const double sigma = std::pow(std::abs(c[0] / c[n]), 1.0 / n);
    Mat comp = Mat::Zero(n, n);
    double sk = 1.0, sn = std::pow(sigma, n);
    for (int k = 0; k < n; ++k) {
        comp(k, n - 1) = -c[k] * sk / (c[n] * sn);
        if (k > 0) comp(k, k - 1) = 1.0;
        sk *= sigma;
    }
    Eigen::EigenSolver<Mat> es(comp, false);
    Poly q(c);
    Poly dq = q.derivative();
    for (int k = 0; k < n; ++k) {
        cplx r = es.eigenvalues()(k) * sigma;
        if (polish) {
            for (int it = 0; it < 3; ++it) {
                cplx f = q(r), d = dq(r);
                if (d == cplx(0.0)) break;
                cplx rn = r - f / d;
                if (std::abs(q(rn)) < std::abs(f)) r = rn;
                else break;
            }
        }
        out.push_back(r);
    }
    // restore exact conjugate symmetry
    for (auto& r : out)
        if (std::abs(r.imag()) <= 1e-14 * std::abs(r)) r = cplx(r.real(), 0.0);
    return out;
}

struct RootCluster {
    cplx root;
    int multiplicity;
};

// groups numerically split multiple roots; relative tolerance
inline std::vector<RootCluster> root_clusters(const Poly& p, double tol = 1e-6) {
    std::vector<cplx> r = roots(p);
    std::vector<RootCluster> out;
    std::vector<bool> used(r.size(), false);
    double scale = 0.0;
    for (auto& x : r) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> grp{i};
        used[i] = true;
        for (std::size_t g = 0; g < grp.size(); ++g)
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (used[j]) continue;
                double ref = std::max({std::abs(r[grp[g]]), std::abs(r[j]), 1e-3 * scale});
                if (std::abs(r[grp[g]] - r[j]) <= tol * ref) {
                    used[j] = true;
                    grp.push_back(j);
                }
            }
        cplx mean(0.0);
        for (auto j : grp) mean += r[j];
        mean /= static_cast<double>(grp.size());
        if (std::abs(mean.imag()) <= 1e-14 * std::abs(mean)) mean = cplx(mean.real(), 0.0);
        out.push_back({mean, static_cast<int>(grp.size())});
    }
    return out;
}

class RatFunc {
public:
    RatFunc() : num_(), den_(Poly::constant(1.0)) {}
    RatFunc(double c) : num_(Poly::constant(c)), den_(Poly::constant(1.0)) {} // NOLINT
    explicit RatFunc(Poly num, Poly den = Poly::constant(1.0)) : num_(std::move(num)), den_(std::move(den)) {
        normalize();
    }

    const Poly& num() const { return num_; }
    const Poly& den() const { return den_; }
    bool is_zero() const { return num_.is_zero(); }

    template <class T>
    auto operator()(T s) const {
        return num_(s) / den_(s);
    }

    // evaluation guarded against poles
    cplx eval(cplx s, double tol = 1e-13) const {
        cplx d = den_(s);
        if (std::abs(d) <= tol * den_.abs_scale(std::abs(s)))
            raise(errc::pole_evaluation, "evaluation at a pole of the rational function");
        return num_(s) / d;
    }

    RatFunc reflect() const { return RatFunc(num_.reflect(), den_.reflect()); }

    // cancels numerator/denominator roots closer than tol (relative)
    RatFunc reduced(double tol = 1e-6) const {
        if (num_.degree() < 1 || den_.degree() < 1) return *this;
        std::vector<cplx> rn = roots(num_), rd = roots(den_);
        double scale = 0.0;
        for (auto& x : rn) scale = std::max(scale, std::abs(x));
        for (auto& x : rd) scale = std::max(scale, std::abs(x));
        std::vector<bool> used(rd.size(), false);
        std::vector<cplx> keep_n;
        bool any = false;
        for (const cplx& a : rn) {
            std::size_t best = rd.size();
            double bd = 0.0;
            for (std::size_t j = 0; j < rd.size(); ++j) {
                if (used[j]) continue;
                double d = std::abs(a - rd[j]);
                double ref = std::max({std::abs(a), std::abs(rd[j]), 1e-3 * scale});
                if (d <= tol * ref && (best == rd.size() || d < bd)) {
                    best = j;
                    bd = d;
                }
            }
            if (best < rd.size()) {
                used[best] = true;
                any = true;
            } else {
                keep_n.push_back(a);
            }
        }
        if (!any) return *this;
        std::vector<cplx> keep_d;
        for (std::size_t j = 0; j < rd.size(); ++j)
            if (!used[j]) keep_d.push_back(rd[j]);
        return RatFunc(from_roots(keep_n, num_.lead()), from_roots(keep_d, 1.0));
    }

    RatFunc operator-() const { return RatFunc(-num_, den_); }

private:
    void normalize() {
        if (den_.is_zero()) raise(errc::invalid_argument, "rational function with zero denominator");
        if (num_.is_zero()) {
            den_ = Poly::constant(1.0);
            return;
        }
        double l = den_.lead();
        if (l != 1.0) {
            num_ = (1.0 / l) * num_;
            den_ = (1.0 / l) * den_;
        }
    }
    Poly num_, den_;
};

inline bool same_poly(const Poly& a, const Poly& b, double rel = 1e-12) {
    if (a.degree() != b.degree()) return false;
    double s = std::max(a.norm_inf(), b.norm_inf());
    for (int k = 0; k <= a.degree(); ++k)
        if (std::abs(a[k] - b[k]) > rel * s) return false;
    return true;
}

inline RatFunc operator+(const RatFunc& a, const RatFunc& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (same_poly(a.den(), b.den())) return RatFunc(a.num() + b.num(), a.den()).reduced();
    return RatFunc(a.num() * b.den() + b.num() * a.den(), a.den() * b.den()).reduced();
}
inline RatFunc operator-(const RatFunc& a, const RatFunc& b) { return a + (-b); }
inline RatFunc operator*(const RatFunc& a, const RatFunc& b) {
    if (a.is_zero() || b.is_zero()) return {};
    return RatFunc(a.num() * b.num(), a.den() * b.den()).reduced();
}
inline RatFunc operator*(double c, const RatFunc& a) { return RatFunc(c * a.num(), a.den()); }
inline RatFunc operator/(const RatFunc& a, const RatFunc& b) {
    if (b.is_zero()) raise(errc::invalid_argument, "division by the zero rational function");
    return RatFunc(a.num() * b.den(), a.den() * b.num()).reduced();
}

class RatMatrix {
public:
    RatMatrix() = default;
    RatMatrix(int rows, int cols) : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows) * cols) {}

    static RatMatrix identity(int n) {
        RatMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = RatFunc(1.0);
        return m;
    }
    static RatMatrix constant(const Mat& c) {
        RatMatrix m(static_cast<int>(c.rows()), static_cast<int>(c.cols()));
        for (int i = 0; i < m.rows_; ++i)
            for (int j = 0; j < m.cols_; ++j) m(i, j) = RatFunc(c(i, j));
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    RatFunc& operator()(int i, int j) { return e_[static_cast<std::size_t>(i) * cols_ + j]; }
    const RatFunc& operator()(int i, int j) const { return e_[static_cast<std::size_t>(i) * cols_ + j]; }

    CMat eval(cplx s, double tol = 1e-13) const {
        CMat out(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j).eval(s, tol);
        return out;
    }

    RatMatrix transpose() const {
        RatMatrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    // M(-s)
    RatMatrix reflect() const {
        RatMatrix t(rows_, cols_);
        for (std::size_t k = 0; k < e_.size(); ++k) t.e_[k] = e_[k].reflect();
        return t;
    }

    bool is_zero() const {
        return std::all_of(e_.begin(), e_.end(), [](const RatFunc& f) { return f.is_zero(); });
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<RatFunc> e_;
};

inline void check_same_shape(const RatMatrix& a, const RatMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        raise(errc::invalid_argument, "rational matrix shape mismatch");
}

inline RatMatrix operator+(const RatMatrix& a, const RatMatrix& b) {
    check_same_shape(a, b);
    RatMatrix m(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) + b(i, j);
    return m;
}
inline RatMatrix operator-(const RatMatrix& a, const RatMatrix& b) {
    check_same_shape(a, b);
    RatMatrix m(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) - b(i, j);
    return m;
}
inline RatMatrix operator*(double c, const RatMatrix& a) {
    RatMatrix m(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m(i, j) = c * a(i, j);
    return m;
}
inline RatMatrix operator*(const RatMatrix& a, const RatMatrix& b) {
    if (a.cols() != b.rows()) raise(errc::invalid_argument, "rational matrix product shape mismatch");
    RatMatrix m(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            RatFunc acc;
            for (int k = 0; k < a.cols(); ++k) {
                if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
                acc = acc + a(i, k) * b(k, j);
            }
            m(i, j) = acc;
        }
    return m;
}
inline RatMatrix operator*(const Mat& c, const RatMatrix& a) { return RatMatrix::constant(c) * a; }
inline RatMatrix operator*(const RatMatrix& a, const Mat& c) { return a * RatMatrix::constant(c); }

namespace detail {

// determinant of a polynomial matrix by expansion over column subsets
inline Poly poly_det(const std::vector<std::vector<Poly>>& p) {
    const int n = static_cast<int>(p.size());
    if (n == 0) return Poly::constant(1.0);
    std::vector<Poly> f(std::size_t(1) << n);
    f[0] = Poly::constant(1.0);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        int r = __builtin_popcount(mask) - 1;
        Poly acc;
        for (int j = 0; j < n; ++j) {
            if (!(mask & (1u << j))) continue;
            unsigned rest = mask & ~(1u << j);
            if (f[rest].is_zero() || p[r][j].is_zero()) continue;
            int above = __builtin_popcount(rest & ~((1u << (j + 1)) - 1));
            Poly t = p[r][j] * f[rest];
            acc = (above % 2) ? acc - t : acc + t;
        }
        f[mask] = acc;
    }
    return f[(1u << n) - 1];
}

// lcm of denominators as merged root clusters
inline Poly common_denominator(const RatMatrix& m, double tol = 1e-8) {
    std::vector<RootCluster> all;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) {
            for (const auto& rc : root_clusters(m(i, j).den())) {
                bool merged = false;
                for (auto& a : all) {
                    double ref = std::max({std::abs(a.root), std::abs(rc.root), 1e-300});
                    if (std::abs(a.root - rc.root) <= tol * ref || (a.root == rc.root)) {
                        a.multiplicity = std::max(a.multiplicity, rc.multiplicity);
                        merged = true;
                        break;
                    }
                }
                if (!merged) all.push_back(rc);
            }
        }
    std::vector<cplx> r;
    for (auto& a : all)
        for (int k = 0; k < a.multiplicity; ++k) r.push_back(a.root);
    return from_roots(r, 1.0);
}

} // namespace detail

// det(M(s)) vanishing on random samples relative to the row-norm (Hadamard) bound
inline bool is_singular_identically(const RatMatrix& m, double tol = 1e-10) {
    const cplx samples[] = {cplx(0.37, 1.13), cplx(1.71, -0.29), cplx(-0.53, 2.47), cplx(3.1, 0.77)};
    // also sample at the characteristic frequency of the entries
    double scale = 1.0;
    {
        double logsum = 0.0;
        int cnt = 0;
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                const Poly& d = m(i, j).den();
                if (d.degree() >= 1 && d[0] != 0.0) {
                    logsum += std::log(std::abs(d[0] / d.lead())) / d.degree();
                    ++cnt;
                }
            }
        if (cnt) scale = std::exp(logsum / cnt);
    }
    for (cplx s0 : samples) {
        for (double sc : {1.0, scale}) {
            cplx s = s0 * sc;
            CMat v;
            try {
                v = m.eval(s, 0.0);
            } catch (const error&) {
                continue;
            }
            double bound = 1.0;
            for (int i = 0; i < v.rows(); ++i) bound *= v.row(i).norm();
            if (bound == 0.0) continue;
            if (std::abs(v.determinant()) > tol * bound) return false;
        }
    }
    return true;
}

inline RatMatrix inverse(const RatMatrix& m) {
    if (m.rows() != m.cols()) raise(errc::invalid_argument, "inverse of a non-square rational matrix");
    const int n = m.rows();
    if (n == 0) return m;
    if (is_singular_identically(m)) raise(errc::no_immittance, "rational matrix is singular for all s");
    Poly d = detail::common_denominator(m);
    std::vector<std::vector<Poly>> p(n, std::vector<Poly>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p[i][j] = m(i, j).num() * divmod(d, m(i, j).den()).first;
    Poly det = detail::poly_det(p);
    if (det.is_zero()) raise(errc::no_immittance, "rational matrix is singular for all s");
    RatMatrix inv(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // cofactor of entry (j, i)
            std::vector<std::vector<Poly>> minor;
            for (int r = 0; r < n; ++r) {
                if (r == j) continue;
                std::vector<Poly> row;
                for (int c = 0; c < n; ++c)
                    if (c != i) row.push_back(p[r][c]);
                minor.push_back(std::move(row));
            }
            Poly cof = detail::poly_det(minor);
            if ((i + j) % 2) cof = -cof;
            inv(i, j) = RatFunc(cof * d, det).reduced();
        }
    return inv;
}

struct PoleData {
    cplx location;
    int order = 1;
    CMat residue;
};

// Poles of all entries after cancellation, merged by single linkage within
// tol relative to the pole magnitude.
inline std::vector<PoleData> poles(const RatMatrix& m, double tol = 1e-8) {
    struct Item {
        cplx root;
        int mult;
        int entry;
    };
    std::vector<Item> items;
    double scale = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) {
            RatFunc f = m(i, j).reduced();
            if (f.is_zero()) continue;
            for (auto& rc : root_clusters(f.den())) {
                items.push_back({rc.root, rc.multiplicity, i * m.cols() + j});
                scale = std::max(scale, std::abs(rc.root));
            }
        }
    auto close = [&](cplx a, cplx b) {
        double ref = std::max({std::abs(a), std::abs(b), 1e-6 * scale});
        return std::abs(a - b) <= tol * ref;
    };
    std::vector<int> label(items.size(), -1);
    int nclusters = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (label[i] >= 0) continue;
        label[i] = nclusters;
        std::vector<std::size_t> stack{i};
        while (!stack.empty()) {
            std::size_t a = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < items.size(); ++b)
                if (label[b] < 0 && close(items[a].root, items[b].root)) {
                    label[b] = nclusters;
                    stack.push_back(b);
                }
        }
        ++nclusters;
    }
    std::vector<PoleData> out;
    for (int c = 0; c < nclusters; ++c) {
        std::vector<std::size_t> mem;
        for (std::size_t i = 0; i < items.size(); ++i)
            if (label[i] == c) mem.push_back(i);
        cplx loc(0.0);
        int order = 0;
        double diam = 0.0;
        for (auto a : mem) {
            loc += items[a].root;
            order = std::max(order, items[a].mult);
            for (auto b : mem) diam = std::max(diam, std::abs(items[a].root - items[b].root));
        }
        loc /= static_cast<double>(mem.size());
        double ref = std::max(std::abs(loc), 1e-6 * scale);
        if (diam > 2 * tol * ref)
            raise(errc::cluster_ambiguity, "pole cluster near " + std::to_string(loc.real()) + "+" +
                                               std::to_string(loc.imag()) + "i spans more than the clustering tolerance");
        if (std::abs(loc.imag()) <= 1e-14 * std::abs(loc)) loc = cplx(loc.real(), 0.0);
        CMat res = CMat::Zero(m.rows(), m.cols());
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) {
                RatFunc f = m(i, j).reduced();
                if (f.is_zero()) continue;
                // leading Laurent coefficient of order `order`
                cplx prod = f.den().lead();
                int taken = 0;
                for (auto& rc : root_clusters(f.den())) {
                    double r2 = std::max({std::abs(rc.root), std::abs(loc), 1e-6 * scale});
                    if (std::abs(rc.root - loc) <= 2 * tol * r2) {
                        taken = rc.multiplicity;
                        continue;
                    }
                    for (int k = 0; k < rc.multiplicity; ++k) prod *= (loc - rc.root);
                }
                if (taken == order) res(i, j) = f.num()(loc) / prod;
            }
        out.push_back({loc, order, res});
    }
    std::sort(out.begin(), out.end(), [](const PoleData& a, const PoleData& b) {
        if (a.location.imag() != b.location.imag()) return a.location.imag() < b.location.imag();
        return a.location.real() < b.location.real();
    });
    return out;
}

inline CMat hermitian_part(const CMat& f) { return la::hermitian_part(f); }

struct LosslessReport {
    bool ok = true;
    std::string reason;
};

inline LosslessReport is_lossless_positive_real(const RatMatrix& z, double tol = 1e-8) {
    auto fail = [](std::string why) { return LosslessReport{false, std::move(why)}; };
    if (z.rows() != z.cols()) return fail("matrix is not square");
    const int n = z.rows();
    // Z(-s) = -Z(s)^T by cross-multiplied coefficients
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const RatFunc& a = z(i, j);
            const RatFunc& b = z(j, i);
            Poly lhs = a.num().reflect() * b.den();
            Poly rhs = b.num() * a.den().reflect();
            Poly sum = lhs + rhs;
            double ref = std::max(lhs.norm_inf(), rhs.norm_inf());
            if (sum.norm_inf() > tol * std::max(ref, 1e-300) && !sum.is_zero())
                return fail("Z(-s) != -Z(s)^T at entry (" + std::to_string(i) + "," + std::to_string(j) +
                            "): nonzero hermitian part on the imaginary axis");
        }
    for (cplx s : {cplx(0.31, 0.77), cplx(1.9, -0.4), cplx(0.05, 3.3)}) {
        try {
            CMat d = z.eval(s) + z.eval(-s).transpose();
            double ref = std::max(1.0, la::max_abs(z.eval(s)));
            if (la::max_abs(d) > 1e3 * tol * ref) return fail("Z(-s) != -Z(s)^T on sampled s");
        } catch (const error&) {
        }
    }
    // behaviour at infinity
    Mat ainf = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int excess = z(i, j).num().degree() - z(i, j).den().degree();
            if (z(i, j).is_zero()) continue;
            if (excess > 1) return fail("pole at infinity of order > 1");
            if (excess == 1) ainf(i, j) = z(i, j).num().lead() / z(i, j).den().lead();
        }
    if (la::max_abs(Mat(ainf - ainf.transpose())) > tol * std::max(1.0, la::max_abs(ainf)))
        return fail("residue at infinity is not symmetric");
    if (n > 0 && la::min_eigenvalue_hermitian(ainf.cast<cplx>()) < -tol * std::max(1.0, la::max_abs(ainf)))
        return fail("residue at infinity is not positive semidefinite");
    std::vector<PoleData> ps;
    try {
        ps = poles(z);
    } catch (const error& e) {
        return fail(std::string("pole extraction failed: ") + e.what());
    }
    for (const auto& p : ps) {
        double mag = std::abs(p.location);
        if (std::abs(p.location.real()) > tol * std::max(mag, 1e-300) && mag > 0)
            return fail("pole off the imaginary axis at s=" + std::to_string(p.location.real()) + "+" +
                        std::to_string(p.location.imag()) + "i");
        if (p.order != 1) return fail("pole of order " + std::to_string(p.order) + " on the imaginary axis");
        if (p.location.imag() < 0) continue;
        double rs = std::max(la::max_abs(p.residue), 1e-300);
        if (la::max_abs(CMat(p.residue - p.residue.adjoint())) > 1e-6 * rs)
            return fail("residue at s=" + std::to_string(p.location.imag()) + "i is not hermitian");
        double lmin = la::min_eigenvalue_hermitian(p.residue);
        if (lmin < -1e-6 * rs)
            return fail("residue at s=" + std::to_string(p.location.imag()) +
                        "i is not positive semidefinite (eigenvalue " + std::to_string(lmin) + ")");
    }
    return {};
}

// scattering <-> immittance with per-port real reference resistances
inline RatMatrix s_to_z(const RatMatrix& s, const std::vector<double>& rref) {
    const int n = s.rows();
    if (s.cols() != n || static_cast<int>(rref.size()) != n)
        raise(errc::invalid_argument, "s_to_z: shape mismatch");
    RatMatrix one = RatMatrix::identity(n);
    RatMatrix a = one - s;
    if (is_singular_identically(a))
        raise(errc::no_immittance, "1 - S is singular for all s; use reduce_singular_scattering");
    RatMatrix z = inverse(a) * (one + s);
    Mat sq = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) sq(i, i) = std::sqrt(rref[i]);
    return sq * z * sq;
}

inline RatMatrix s_to_z(const RatMatrix& s, double rref) {
    return s_to_z(s, std::vector<double>(s.rows(), rref));
}

inline RatMatrix z_to_s(const RatMatrix& z, const std::vector<double>& rref) {
    const int n = z.rows();
    if (z.cols() != n || static_cast<int>(rref.size()) != n)
        raise(errc::invalid_argument, "z_to_s: shape mismatch");
    Mat isq = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) isq(i, i) = 1.0 / std::sqrt(rref[i]);
    RatMatrix zt = isq * z * isq;
    RatMatrix one = RatMatrix::identity(n);
    return (zt - one) * inverse(zt + one);
}

inline RatMatrix z_to_s(const RatMatrix& z, double rref) {
    return z_to_s(z, std::vector<double>(z.rows(), rref));
}

inline RatMatrix y_from_z(const RatMatrix& z) {
    if (z.rows() != z.cols()) raise(errc::invalid_argument, "y_from_z: non-square matrix");
    if (is_singular_identically(z)) raise(errc::no_immittance, "impedance matrix is singular for all s");
    return inverse(z);
}

} // namespace qfluct::ratmat
