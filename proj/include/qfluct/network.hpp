#pragma once

// Lumped netlists, quadratic Lagrangians and Hamiltonian systems.

#include "errors.hpp"
#include "linalg.hpp"
#include "ratmat.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qfluct::network {

inline const std::string ground = "0";

struct Capacitor {
    std::string name, n1, n2;
    double farads;
};
struct Inductor {
    std::string name, n1, n2;
    double henries;
};
// pair A = (a1, a2), pair B = (b1, b2)
struct Gyrator {
    std::string name, a1, a2, b1, b2;
    double ohms;
};
// secondary flux = ratio * primary flux
struct Transformer {
    std::string name, p1, p2, s1, s2;
    double ratio;
};
struct Resistor {
    std::string name, n1, n2;
    double ohms;
};

using Element = std::variant<Capacitor, Inductor, Gyrator, Transformer, Resistor>;

inline const std::string& element_name(const Element& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.name; }, e);
}

struct Port {
    std::string name, plus, minus = ground;
    std::optional<double> rref;
};

struct Netlist {
    std::vector<Element> elements;
    std::vector<std::string> nodes; // non-ground, first-appearance order
    std::vector<Port> ports;
    double default_rref = 50.0;

    std::vector<double> rrefs() const {
        std::vector<double> r;
        for (const auto& p : ports) r.push_back(p.rref.value_or(default_rref));
        return r;
    }
    std::vector<std::string> port_names() const {
        std::vector<std::string> r;
        for (const auto& p : ports) r.push_back(p.name);
        return r;
    }
    bool has_resistors() const {
        return std::any_of(elements.begin(), elements.end(),
                           [](const Element& e) { return std::holds_alternative<Resistor>(e); });
    }
    void add(Element e) {
        std::visit(
            [this](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Gyrator>) {
                    for (auto* n : {&x.a1, &x.a2, &x.b1, &x.b2}) note_node(*n);
                } else if constexpr (std::is_same_v<T, Transformer>) {
                    for (auto* n : {&x.p1, &x.p2, &x.s1, &x.s2}) note_node(*n);
                } else {
                    note_node(x.n1);
                    note_node(x.n2);
                }
            },
            e);
        elements.push_back(std::move(e));
    }
    void note_node(const std::string& n) {
        if (n != ground && std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
    }
};

namespace detail {

struct Token {
    std::string text;
    std::size_t col;
};

inline std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        out.push_back({line.substr(i, j - i), i + 1});
        i = j;
    }
    return out;
}

// number with optional engineering suffix (f p n u m k meg g t)
inline std::optional<double> parse_value(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* b = s.c_str();
    char* e = nullptr;
    double v = std::strtod(b, &e);
    if (e == b) return std::nullopt;
    std::string suf(e);
    std::transform(suf.begin(), suf.end(), suf.begin(), [](unsigned char c) { return std::tolower(c); });
    static const std::map<std::string, double> mult = {
        {"", 1.0},   {"f", 1e-15}, {"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6},
        {"m", 1e-3}, {"k", 1e3},   {"meg", 1e6}, {"g", 1e9},  {"t", 1e12}};
    auto it = mult.find(suf);
    if (it == mult.end() || !std::isfinite(v)) return std::nullopt;
    return v * it->second;
}

} // namespace detail

inline Netlist parse_netlist(std::string_view text) {
    Netlist net;
    std::set<std::string> names, port_names;
    std::map<std::string, int> terminal_count;
    std::vector<std::pair<std::size_t, Port>> port_lines;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto tok = detail::tokenize(line);
        if (tok.empty()) continue;
        const std::string& kw = tok[0].text;
        auto value = [&](std::size_t k) {
            auto v = detail::parse_value(tok[k].text);
            if (!v) throw syntax_error(lineno, tok[k].col, "invalid number '" + tok[k].text + "'");
            if (*v <= 0.0)
                raise(errc::semantic_error, "line " + std::to_string(lineno) + ": nonpositive value '" +
                                                tok[k].text + "' for " + tok[1].text);
            return *v;
        };
        auto expect = [&](std::size_t n, const char* form) {
            if (tok.size() != n) {
                std::size_t col = tok.size() > n ? tok[n].col : line.size() + 1;
                throw syntax_error(lineno, col, std::string("expected '") + form + "'");
            }
        };
        auto claim = [&](const std::string& name) {
            if (!names.insert(name).second)
                raise(errc::semantic_error, "line " + std::to_string(lineno) + ": duplicate element name '" + name + "'");
        };
        auto two_terminal = [&](const std::string& a, const std::string& b) {
            if (a == b)
                raise(errc::semantic_error,
                      "line " + std::to_string(lineno) + ": element '" + tok[1].text + "' has both terminals on node " + a);
            ++terminal_count[a];
            ++terminal_count[b];
        };
        if (kw == "C" || kw == "L" || kw == "R") {
            expect(5, (kw + " <name> <node+> <node-> <value>").c_str());
            claim(tok[1].text);
            two_terminal(tok[2].text, tok[3].text);
            double v = value(4);
            if (kw == "C") net.add(Capacitor{tok[1].text, tok[2].text, tok[3].text, v});
            else if (kw == "L") net.add(Inductor{tok[1].text, tok[2].text, tok[3].text, v});
            else net.add(Resistor{tok[1].text, tok[2].text, tok[3].text, v});
        } else if (kw == "G" || kw == "T") {
            expect(7, (kw + " <name> <n1+> <n1-> <n2+> <n2-> <value>").c_str());
            claim(tok[1].text);
            two_terminal(tok[2].text, tok[3].text);
            two_terminal(tok[4].text, tok[5].text);
            double v = value(6);
            if (kw == "G") net.add(Gyrator{tok[1].text, tok[2].text, tok[3].text, tok[4].text, tok[5].text, v});
            else net.add(Transformer{tok[1].text, tok[2].text, tok[3].text, tok[4].text, tok[5].text, v});
        } else if (kw == "port") {
            if (tok.size() < 3 || tok.size() > 5)
                throw syntax_error(lineno, tok.size() > 5 ? tok[5].col : line.size() + 1,
                                   "expected 'port <name> <node+> [<node->] [Rref=<ohms>]'");
            Port p{tok[1].text, tok[2].text, ground, std::nullopt};
            for (std::size_t k = 3; k < tok.size(); ++k) {
                const std::string& t = tok[k].text;
                if (t.rfind("Rref=", 0) == 0 || t.rfind("rref=", 0) == 0) {
                    auto v = detail::parse_value(t.substr(5));
                    if (!v) throw syntax_error(lineno, tok[k].col + 5, "invalid number in '" + t + "'");
                    if (*v <= 0.0)
                        raise(errc::semantic_error, "line " + std::to_string(lineno) + ": nonpositive Rref");
                    p.rref = *v;
                } else if (k == 3) {
                    p.minus = t;
                } else {
                    throw syntax_error(lineno, tok[k].col, "unexpected token '" + t + "'");
                }
            }
            if (p.plus == p.minus)
                raise(errc::semantic_error, "line " + std::to_string(lineno) + ": port '" + p.name + "' is shorted");
            if (!port_names.insert(p.name).second)
                raise(errc::semantic_error, "line " + std::to_string(lineno) + ": duplicate port name '" + p.name + "'");
            port_lines.emplace_back(lineno, p);
        } else {
            throw syntax_error(lineno, tok[0].col, "unknown element keyword '" + kw + "'");
        }
    }
    for (auto& [ln, p] : port_lines) {
        for (const std::string* n : {&p.plus, &p.minus})
            if (*n != ground && !terminal_count.count(*n))
                raise(errc::semantic_error, "line " + std::to_string(ln) + ": port '" + p.name + "' references unknown node '" + *n + "'");
        net.ports.push_back(p);
    }
    for (auto& [n, c] : terminal_count) {
        if (n == ground || c > 1) continue;
        bool at_port = std::any_of(net.ports.begin(), net.ports.end(),
                                   [&](const Port& p) { return p.plus == n || p.minus == n; });
        if (!at_port) raise(errc::semantic_error, "dangling node '" + n + "' (single connection, no port)");
    }
    return net;
}

enum class Mode { NodeFlux, LoopCharge };

inline const char* mode_name(Mode m) { return m == Mode::NodeFlux ? "flux" : "charge"; }

// L = 1/2 qd^T C qd + 1/2 qd^T G q - 1/2 q^T M q, Rayleigh dissipation 1/2 qd^T D qd.
// In flux mode q are node fluxes; in charge mode loop charges.
struct QuadraticLagrangian {
    Mode mode = Mode::NodeFlux;
    int n = 0;
    Mat Cmat, Gmat, Mmat, Dmat;
    std::vector<std::string> coord_labels;
    Mat port_rows; // ports x n
    std::vector<std::string> port_names;
};

namespace detail {

// Solves K q = 0 by substitution; returns E with q = E r. Columns listed in
// `prefer` are eliminated first when their pivot is not too small.
inline Mat constraint_basis(const Mat& k, int n, const std::vector<int>& prefer, std::vector<int>& free_cols) {
    Mat a = k;
    std::vector<int> pivot_col;
    std::vector<bool> is_pivot(n, false);
    int row = 0;
    for (int r = 0; r < a.rows() && row < a.rows(); ++r) {
        // pick pivot in row `row`
        double mx = a.row(row).cwiseAbs().maxCoeff();
        if (mx <= 1e-12) {
            // redundant constraint
            a.row(row).swap(a.row(a.rows() - 1));
            a.conservativeResize(a.rows() - 1, Eigen::NoChange);
            --r;
            continue;
        }
        int pc = -1;
        for (int c : prefer)
            if (!is_pivot[c] && std::abs(a(row, c)) >= 1e-3 * mx) {
                pc = c;
                break;
            }
        if (pc < 0) a.row(row).cwiseAbs().maxCoeff(&pc);
        a.row(row) /= a(row, pc);
        for (int o = 0; o < a.rows(); ++o)
            if (o != row && a(o, pc) != 0.0) a.row(o) -= a(o, pc) * a.row(row);
        is_pivot[pc] = true;
        pivot_col.push_back(pc);
        ++row;
    }
    free_cols.clear();
    for (int c = 0; c < n; ++c)
        if (!is_pivot[c]) free_cols.push_back(c);
    Mat e = Mat::Zero(n, free_cols.size());
    for (std::size_t f = 0; f < free_cols.size(); ++f) e(free_cols[f], f) = 1.0;
    for (std::size_t p = 0; p < pivot_col.size(); ++p)
        for (std::size_t f = 0; f < free_cols.size(); ++f) e(pivot_col[p], f) = -a(p, free_cols[f]);
    return e;
}

inline QuadraticLagrangian reduce_constraints(QuadraticLagrangian lag, const Mat& k, const std::vector<int>& prefer) {
    if (k.rows() == 0) return lag;
    std::vector<int> free_cols;
    Mat e = constraint_basis(k, lag.n, prefer, free_cols);
    lag.Cmat = e.transpose() * lag.Cmat * e;
    lag.Gmat = e.transpose() * lag.Gmat * e;
    lag.Mmat = e.transpose() * lag.Mmat * e;
    lag.Dmat = e.transpose() * lag.Dmat * e;
    lag.port_rows = lag.port_rows * e;
    std::vector<std::string> labels;
    for (int c : free_cols) labels.push_back(lag.coord_labels[c]);
    lag.coord_labels = labels;
    lag.n = static_cast<int>(free_cols.size());
    return lag;
}

inline QuadraticLagrangian flux_lagrangian(const Netlist& net, bool allow_dissipation) {
    QuadraticLagrangian lag;
    lag.mode = Mode::NodeFlux;
    const int n = static_cast<int>(net.nodes.size());
    lag.n = n;
    std::map<std::string, int> idx;
    for (int i = 0; i < n; ++i) idx[net.nodes[i]] = i;
    auto u = [&](const std::string& a, const std::string& b) {
        Vec v = Vec::Zero(n);
        if (a != ground) v(idx.at(a)) += 1.0;
        if (b != ground) v(idx.at(b)) -= 1.0;
        return v;
    };
    lag.Cmat = lag.Gmat = lag.Mmat = lag.Dmat = Mat::Zero(n, n);
    std::vector<Vec> cons;
    std::vector<int> prefer;
    for (const auto& el : net.elements) {
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Capacitor>) {
                    Vec v = u(x.n1, x.n2);
                    lag.Cmat += x.farads * v * v.transpose();
                } else if constexpr (std::is_same_v<T, Inductor>) {
                    Vec v = u(x.n1, x.n2);
                    lag.Mmat += (1.0 / x.henries) * v * v.transpose();
                } else if constexpr (std::is_same_v<T, Gyrator>) {
                    Vec a = u(x.a1, x.a2), b = u(x.b1, x.b2);
                    lag.Gmat += (1.0 / x.ohms) * (a * b.transpose() - b * a.transpose());
                } else if constexpr (std::is_same_v<T, Transformer>) {
                    cons.push_back(u(x.s1, x.s2) - x.ratio * u(x.p1, x.p2));
                    if (x.s1 != ground) prefer.push_back(idx.at(x.s1));
                    if (x.s2 != ground) prefer.push_back(idx.at(x.s2));
                } else {
                    if (!allow_dissipation)
                        raise(errc::mode_unsupported_element,
                              "resistor '" + x.name + "' in a lossless build; expand it into a bath first");
                    Vec v = u(x.n1, x.n2);
                    lag.Dmat += (1.0 / x.ohms) * v * v.transpose();
                }
            },
            el);
    }
    lag.coord_labels = net.nodes;
    lag.port_rows = Mat::Zero(net.ports.size(), n);
    for (std::size_t p = 0; p < net.ports.size(); ++p) {
        lag.port_rows.row(p) = u(net.ports[p].plus, net.ports[p].minus).transpose();
        lag.port_names.push_back(net.ports[p].name);
    }
    Mat k(cons.size(), n);
    for (std::size_t r = 0; r < cons.size(); ++r) k.row(r) = cons[r].transpose();
    return reduce_constraints(std::move(lag), k, prefer);
}

struct Branch {
    std::string from, to; // current flows from -> to through the branch
    int kind;             // 0 C, 1 L, 2 gyrator A, 3 gyrator B, 4 transformer P, 5 transformer S, 6 port, 7 R
    std::size_t element;
};

inline QuadraticLagrangian charge_lagrangian(const Netlist& net, bool allow_dissipation) {
    std::vector<Branch> br;
    for (std::size_t e = 0; e < net.elements.size(); ++e) {
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Capacitor>) br.push_back({x.n1, x.n2, 0, e});
                else if constexpr (std::is_same_v<T, Inductor>) br.push_back({x.n1, x.n2, 1, e});
                else if constexpr (std::is_same_v<T, Gyrator>) {
                    br.push_back({x.a1, x.a2, 2, e});
                    br.push_back({x.b1, x.b2, 3, e});
                } else if constexpr (std::is_same_v<T, Transformer>) {
                    br.push_back({x.p1, x.p2, 4, e});
                    br.push_back({x.s1, x.s2, 5, e});
                } else {
                    if (!allow_dissipation)
                        raise(errc::mode_unsupported_element,
                              "resistor '" + x.name + "' in a lossless build; expand it into a bath first");
                    br.push_back({x.n1, x.n2, 7, e});
                }
            },
            net.elements[e]);
    }
    // port branch carries the current entering the network at node+
    for (std::size_t p = 0; p < net.ports.size(); ++p) br.push_back({net.ports[p].minus, net.ports[p].plus, 6, p});

    std::map<std::string, int> nid;
    nid[ground] = 0;
    for (const auto& b : br)
        for (const auto* s : {&b.from, &b.to})
            if (!nid.count(*s)) nid[*s] = static_cast<int>(nid.size());
    const int nn = static_cast<int>(nid.size());
    std::vector<int> parent(nn);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };

    // tree: non-port branches first so ports become chords
    std::vector<std::size_t> order(br.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (br[a].kind == 6) < (br[b].kind == 6);
    });
    std::vector<bool> in_tree(br.size(), false);
    std::vector<std::vector<std::pair<int, std::size_t>>> adj(nn);
    for (std::size_t b : order) {
        int x = nid[br[b].from], y = nid[br[b].to];
        int rx = find(x), ry = find(y);
        if (rx == ry) continue;
        parent[rx] = ry;
        in_tree[b] = true;
        adj[x].push_back({y, b});
        adj[y].push_back({x, b});
    }
    // fundamental loops: chord from->to, then the tree path to->from
    std::vector<Vec> loops;
    std::vector<std::string> labels;
    const int nb = static_cast<int>(br.size());
    for (std::size_t c = 0; c < br.size(); ++c) {
        if (in_tree[c]) continue;
        int src = nid[br[c].to], dst = nid[br[c].from];
        std::vector<int> prev_node(nn, -1);
        std::vector<std::size_t> prev_branch(nn, 0);
        std::vector<int> queue{src};
        prev_node[src] = src;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            int x = queue[qi];
            for (auto [y, b] : adj[x])
                if (prev_node[y] < 0) {
                    prev_node[y] = x;
                    prev_branch[y] = b;
                    queue.push_back(y);
                }
        }
        Vec w = Vec::Zero(nb);
        w(c) = 1.0;
        for (int x = dst; x != src;) {
            int px = prev_node[x];
            std::size_t b = prev_branch[x];
            // traversal px -> x
            w(b) += (nid[br[b].from] == px && nid[br[b].to] == x) ? 1.0 : -1.0;
            x = px;
        }
        loops.push_back(w);
        labels.push_back(br[c].kind == 6 ? "loop:" + net.ports[br[c].element].name
                                         : "loop:" + element_name(net.elements[br[c].element]));
    }
    const int n = static_cast<int>(loops.size());
    Mat bm(n, nb);
    for (int l = 0; l < n; ++l) bm.row(l) = loops[l].transpose();

    QuadraticLagrangian lag;
    lag.mode = Mode::LoopCharge;
    lag.n = n;
    lag.Cmat = lag.Gmat = lag.Mmat = lag.Dmat = Mat::Zero(n, n);
    lag.coord_labels = labels;
    lag.port_rows = Mat::Zero(net.ports.size(), n);
    std::vector<Vec> cons;
    std::vector<Vec> gyr_a(net.elements.size()), trans_p(net.elements.size());
    for (int b = 0; b < nb; ++b) {
        Vec w = bm.col(b);
        const auto& el = br[b].kind == 6 ? Element{} : net.elements[br[b].element];
        switch (br[b].kind) {
        case 0: lag.Mmat += (1.0 / std::get<Capacitor>(el).farads) * w * w.transpose(); break;
        case 1: lag.Cmat += std::get<Inductor>(el).henries * w * w.transpose(); break;
        case 2: gyr_a[br[b].element] = w; break;
        case 3: {
            const Vec& a = gyr_a[br[b].element];
            lag.Gmat += std::get<Gyrator>(el).ohms * (w * a.transpose() - a * w.transpose());
            break;
        }
        case 4: trans_p[br[b].element] = w; break;
        case 5: cons.push_back(trans_p[br[b].element] + std::get<Transformer>(el).ratio * w); break;
        case 6:
            lag.port_rows.row(br[b].element) = w.transpose();
            break;
        case 7: lag.Dmat += std::get<Resistor>(el).ohms * w * w.transpose(); break;
        }
    }
    for (const auto& p : net.ports) lag.port_names.push_back(p.name);
    Mat k(cons.size(), n);
    for (std::size_t r = 0; r < cons.size(); ++r) k.row(r) = cons[r].transpose();
    return reduce_constraints(std::move(lag), k, {});
}

} // namespace detail

inline QuadraticLagrangian build_lagrangian(const Netlist& net, Mode mode, bool allow_dissipation = false) {
    return mode == Mode::NodeFlux ? detail::flux_lagrangian(net, allow_dissipation)
                                  : detail::charge_lagrangian(net, allow_dissipation);
}

// H = 1/2 x^T h x with x interleaved (q1,p1,q2,p2,...)
struct HamiltonianSystem {
    Mode mode = Mode::NodeFlux;
    Mat h, J;
    Mat port_coord;    // ports x 2n, observed coordinates (flux or charge)
    Mat port_momentum; // ports x 2n, their conjugate momenta
    double hbar = hbar_si;
    std::vector<std::string> labels;
    std::vector<std::string> port_names;
    QuadraticLagrangian lagrangian;

    int dim() const { return static_cast<int>(h.rows()); }
};

inline HamiltonianSystem legendre(const QuadraticLagrangian& lag, double hbar = hbar_si, double cond_bound = 1e12) {
    const int n = lag.n;
    if (lag.Dmat.size() && la::max_abs(lag.Dmat) > 0)
        raise(errc::mode_unsupported_element, "dissipative Lagrangian has no Hamiltonian; expand resistors first");
    HamiltonianSystem sys;
    sys.mode = lag.mode;
    sys.hbar = hbar;
    sys.lagrangian = lag;
    sys.port_names = lag.port_names;
    Mat cinv = Mat::Zero(n, n);
    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(lag.Cmat);
        double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(n - 1);
        if (lmax <= 0.0 || lmin <= lmax / cond_bound)
            raise(errc::singular_kinetic,
                  std::string("kinetic matrix is singular (condition bound ") + std::to_string(cond_bound) +
                      "); every " + (lag.mode == Mode::NodeFlux ? "node needs a capacitive path" : "loop needs an inductance"));
        cinv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
        cinv = (cinv + cinv.transpose()) / 2.0;
    }
    const Mat& g = lag.Gmat;
    Mat hqq = lag.Mmat + 0.25 * g.transpose() * cinv * g;
    Mat hpp = cinv;
    Mat hpq = -0.5 * cinv * g;
    hqq = (hqq + hqq.transpose()) / 2.0;
    sys.h = Mat::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            sys.h(2 * i, 2 * j) = hqq(i, j);
            sys.h(2 * i + 1, 2 * j + 1) = hpp(i, j);
            sys.h(2 * i + 1, 2 * j) = hpq(i, j);
            sys.h(2 * j, 2 * i + 1) = hpq(i, j);
        }
    sys.J = la::symplectic_form(n);
    const int p = static_cast<int>(lag.port_rows.rows());
    sys.port_coord = Mat::Zero(p, 2 * n);
    sys.port_momentum = Mat::Zero(p, 2 * n);
    for (int i = 0; i < n; ++i) {
        sys.port_coord.col(2 * i) = lag.port_rows.col(i);
        sys.port_momentum.col(2 * i + 1) = lag.port_rows.col(i);
        sys.labels.push_back((lag.mode == Mode::NodeFlux ? "Phi:" : "Q:") + lag.coord_labels[i]);
        sys.labels.push_back((lag.mode == Mode::NodeFlux ? "Pi:" : "P:") + lag.coord_labels[i]);
    }
    return sys;
}

// Roots of det(s^2 C + s(G+D) + M) through the first-order companion form.
inline std::vector<cplx> natural_frequencies(const QuadraticLagrangian& lag) {
    const int n = lag.n;
    if (n == 0) return {};
    Eigen::FullPivLU<Mat> lu(lag.Cmat);
    if (!lu.isInvertible()) raise(errc::singular_kinetic, "kinetic matrix is singular");
    Mat a = Mat::Zero(2 * n, 2 * n);
    a.topRightCorner(n, n) = Mat::Identity(n, n);
    a.bottomLeftCorner(n, n) = -lu.solve(lag.Mmat);
    a.bottomRightCorner(n, n) = -lu.solve(Mat(lag.Gmat + lag.Dmat));
    Eigen::EigenSolver<Mat> es(a, false);
    std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + 2 * n);
    return out;
}

// Port immittance s P (s^2 C + s(G+D) + M)^{-1} P^T evaluated numerically.
// Impedance in flux mode, admittance in charge mode.
inline CMat port_response_at(const QuadraticLagrangian& lag, cplx s) {
    const int n = lag.n;
    CMat q = (s * s) * lag.Cmat.cast<cplx>() + s * (lag.Gmat + lag.Dmat).cast<cplx>() + lag.Mmat.cast<cplx>();
    CMat p = lag.port_rows.cast<cplx>();
    if (n == 0) return CMat::Zero(p.rows(), p.rows());
    Eigen::PartialPivLU<CMat> lu(q);
    if (!(lu.rcond() > 1e-14)) raise(errc::resonant_evaluation, "port response evaluated at a natural frequency");
    return s * p * lu.solve(p.transpose());
}

// Exact rational port immittance from the polynomial pencil Q(s) = s^2 C + s(G+D) + M.
// Uses c^T adj(Q) b = det(Q + b c^T) - det(Q); practical up to ~14 coordinates.
inline ratmat::RatMatrix port_response(const QuadraticLagrangian& lag) {
    using ratmat::Poly;
    const int n = lag.n;
    const int p = static_cast<int>(lag.port_rows.rows());
    if (n > 14) raise(errc::invalid_argument, "rational port response limited to 14 coordinates");
    ratmat::RatMatrix out(p, p);
    if (n == 0) return out;
    Mat gd = lag.Gmat + lag.Dmat;
    auto pencil = [&](const Mat& extra) {
        std::vector<std::vector<Poly>> q(n, std::vector<Poly>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) q[i][j] = Poly{lag.Mmat(i, j) + extra(i, j), gd(i, j), lag.Cmat(i, j)};
        return q;
    };
    Poly det = ratmat::detail::poly_det(pencil(Mat::Zero(n, n)));
    if (det.is_zero()) raise(errc::no_immittance, "port response pencil is singular for all s");
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            Vec c = lag.port_rows.row(i).transpose(), b = lag.port_rows.row(j).transpose();
            Poly num = ratmat::detail::poly_det(pencil(b * c.transpose())) - det;
            out(i, j) = ratmat::RatFunc(Poly{0.0, 1.0} * num, det).reduced();
        }
    return out;
}

} // namespace qfluct::network
