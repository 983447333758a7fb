#pragma once

// Hermitian part of a response as a distribution in omega:
//   F^H(w) = pi * sum_k [plus_k delta(w - W_k) + minus_k delta(w + W_k)] + density(w)

#include "linalg.hpp"

#include <functional>
#include <vector>

namespace qfluct {

struct Atom {
    double omega = 0.0;
    CMat plus;  // weight at +omega
    CMat minus; // weight at -omega, conj(plus)
};

struct SpectralMeasure {
    int dim = 0;
    std::vector<Atom> atoms;
    std::function<CMat(double)> density; // empty for lossless measures
    std::vector<double> peaks;           // quadrature hints (positive frequencies)
    double peak_width = 0.0;

    bool has_density() const { return static_cast<bool>(density); }

    // x -> P x for every atom and the density
    SpectralMeasure project(const Mat& p) const {
        SpectralMeasure out;
        out.dim = static_cast<int>(p.rows());
        CMat pc = p.cast<cplx>();
        for (const auto& a : atoms) out.atoms.push_back({a.omega, pc * a.plus * pc.transpose(), pc * a.minus * pc.transpose()});
        if (density) {
            auto d = density;
            out.density = [d, pc](double w) -> CMat { return pc * d(w) * pc.transpose(); };
        }
        out.peaks = peaks;
        out.peak_width = peak_width;
        return out;
    }
};

} // namespace qfluct
