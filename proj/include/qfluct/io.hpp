#pragma once

// JSON / CSV interchange for responses, Foster forms and correlator series.

#include "correlator.hpp"
#include "errors.hpp"
#include "foster.hpp"
#include "linalg.hpp"
#include "ratmat.hpp"

#include <json.hpp>

#include <iomanip>
#include <sstream>
#include <string>

namespace qfluct::io {

using json = nlohmann::json;

inline json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Mat mat_from_json(const json& j, const char* what) {
    if (!j.is_array()) raise(errc::syntax_error, std::string(what) + ": expected an array of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    Eigen::Index m = n ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Mat out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != m)
            raise(errc::syntax_error, std::string(what) + ": ragged matrix");
        for (Eigen::Index k = 0; k < m; ++k) {
            if (!j[i][k].is_number()) raise(errc::syntax_error, std::string(what) + ": non-numeric entry");
            out(i, k) = j[i][k].get<double>();
        }
    }
    return out;
}

inline json poly_to_json(const ratmat::Poly& p) {
    json a = json::array();
    for (double c : p.coeffs()) a.push_back(c);
    if (a.empty()) a.push_back(0.0);
    return a;
}

inline ratmat::Poly poly_from_json(const json& j) {
    if (!j.is_array() || j.empty()) raise(errc::syntax_error, "polynomial: expected a nonempty coefficient array");
    std::vector<double> c;
    for (const auto& x : j) {
        if (!x.is_number()) raise(errc::syntax_error, "polynomial: non-numeric coefficient");
        c.push_back(x.get<double>());
    }
    return ratmat::Poly(std::move(c));
}

// {"rows","cols","entries":[{"num","den"}]} with ascending coefficients, row-major
inline json to_json(const ratmat::RatMatrix& m) {
    json e = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) e.push_back({{"num", poly_to_json(m(i, j).num())}, {"den", poly_to_json(m(i, j).den())}});
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", e}};
}

inline ratmat::RatMatrix ratmatrix_from_json(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("entries"))
        raise(errc::syntax_error, "RatMatrix JSON needs rows, cols and entries");
    int r = j["rows"].get<int>(), c = j["cols"].get<int>();
    const auto& e = j["entries"];
    if (r < 0 || c < 0 || !e.is_array() || static_cast<int>(e.size()) != r * c)
        raise(errc::syntax_error, "RatMatrix JSON: entries must hold rows*cols items");
    ratmat::RatMatrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int k = 0; k < c; ++k) {
            const auto& x = e[static_cast<std::size_t>(i * c + k)];
            if (!x.contains("num") || !x.contains("den")) raise(errc::syntax_error, "RatMatrix entry needs num and den");
            auto den = poly_from_json(x["den"]);
            if (den.is_zero()) raise(errc::semantic_error, "RatMatrix entry has a zero denominator");
            m(i, k) = ratmat::RatFunc(poly_from_json(x["num"]), den);
        }
    return m;
}

inline json to_json(const foster::FosterForm& f) {
    json st = json::array();
    for (const auto& s : f.stages) st.push_back({{"omega", s.omega}, {"A", mat_to_json(s.A)}, {"B", mat_to_json(s.B)}});
    return {{"kind", foster::kind_name(f.kind)}, {"Binf", mat_to_json(f.Binf)}, {"A0", mat_to_json(f.A0)},
            {"Ainf", mat_to_json(f.Ainf)}, {"stages", st}};
}

inline foster::FosterForm foster_from_json(const json& j) {
    for (const char* key : {"kind", "Binf", "A0", "Ainf", "stages"})
        if (!j.contains(key)) raise(errc::syntax_error, std::string("FosterForm JSON is missing '") + key + "'");
    foster::FosterForm f;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "impedance") f.kind = foster::Kind::impedance;
    else if (kind == "admittance") f.kind = foster::Kind::admittance;
    else raise(errc::semantic_error, "FosterForm kind must be impedance or admittance");
    f.Binf = mat_from_json(j["Binf"], "Binf");
    f.A0 = mat_from_json(j["A0"], "A0");
    f.Ainf = mat_from_json(j["Ainf"], "Ainf");
    const Eigen::Index n = f.Binf.rows();
    auto check = [n](const Mat& m, const char* what) {
        if (m.rows() != n || m.cols() != n) raise(errc::semantic_error, std::string("FosterForm ") + what + " has the wrong shape");
    };
    check(f.A0, "A0");
    check(f.Ainf, "Ainf");
    for (const auto& s : j["stages"]) {
        foster::FosterStage st{s.at("omega").get<double>(), mat_from_json(s.at("A"), "A"), mat_from_json(s.at("B"), "B")};
        if (!(st.omega > 0)) raise(errc::semantic_error, "FosterForm stage frequency must be positive");
        check(st.A, "A");
        check(st.B, "B");
        f.stages.push_back(std::move(st));
    }
    return f;
}

inline json to_json(const CMat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back({m(i, j).real(), m(i, j).imag()});
    return a;
}

// {"times":[...],"values":[[[re,im],...],...]} plus dim and labels
inline json to_json(const correlator::CorrelatorSeries& s) {
    json v = json::array();
    for (const auto& m : s.values) v.push_back(to_json(m));
    return {{"dim", s.dim()}, {"labels", s.labels}, {"times", s.times}, {"values", v}};
}

inline std::string to_csv(const correlator::CorrelatorSeries& s) {
    std::ostringstream out;
    out << std::setprecision(17);
    const int d = s.dim();
    auto name = [&](int i) { return i < static_cast<int>(s.labels.size()) ? s.labels[i] : std::to_string(i); };
    out << "t";
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out << ",re[" << name(i) << "|" << name(j) << "],im[" << name(i) << "|" << name(j) << "]";
    out << "\n";
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        out << s.times[k];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out << "," << s.values[k](i, j).real() << "," << s.values[k](i, j).imag();
        out << "\n";
    }
    return out.str();
}

inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        raise(errc::syntax_error, std::string("invalid JSON: ") + e.what());
    }
}

} // namespace qfluct::io
