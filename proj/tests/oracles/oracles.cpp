#include "oracles.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace oracle {

namespace {

// Solves M z = r in place; false when singular.
bool solve_square(std::vector<std::vector<double>> m, std::vector<double> r, std::vector<double> &z)
{
    const std::size_t n = r.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::fabs(m[i][col]) > std::fabs(m[piv][col]))
                piv = i;
        if (std::fabs(m[piv][col]) < 1e-11)
            return false;
        std::swap(m[piv], m[col]);
        std::swap(r[piv], r[col]);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col || m[i][col] == 0.0)
                continue;
            const double f = m[i][col] / m[col][col];
            for (std::size_t j = col; j < n; ++j)
                m[i][j] -= f * m[col][j];
            r[i] -= f * r[col];
        }
    }
    z.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = r[i] / m[i][i];
    return true;
}

// Constraint planes: rows first, then lo_k, hi_k for each variable.
struct Plane {
    std::vector<double> a;
    double b;
    int var = -1;  // bound planes only
    bool equality = false;
};

} // namespace

VertexResult vertex_enumerate(const DenseLp &lp, double feas_tol)
{
    const std::size_t n = lp.lo.size();
    std::vector<Plane> mandatory, optional;
    for (const auto &row : lp.rows) {
        Plane p{row.a, row.b, -1, row.rel == rhv::Relation::Equal};
        (p.equality ? mandatory : optional).push_back(p);
    }
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> e(n, 0.0);
        e[k] = 1.0;
        optional.push_back({e, lp.lo[k], static_cast<int>(k), false});
        optional.push_back({e, lp.hi[k], static_cast<int>(k), false});
    }

    VertexResult out;
    auto feasible = [&](const std::vector<double> &x) {
        for (std::size_t k = 0; k < n; ++k)
            if (x[k] < lp.lo[k] - feas_tol * (1 + std::fabs(lp.lo[k])) ||
                x[k] > lp.hi[k] + feas_tol * (1 + std::fabs(lp.hi[k])))
                return false;
        for (const auto &row : lp.rows) {
            double act = 0.0, mag = std::fabs(row.b);
            for (std::size_t k = 0; k < n; ++k) {
                act += row.a[k] * x[k];
                mag += std::fabs(row.a[k] * x[k]);
            }
            const double tol = feas_tol * (1 + mag);
            if (row.rel == rhv::Relation::LessEq && act > row.b + tol)
                return false;
            if (row.rel == rhv::Relation::GreaterEq && act < row.b - tol)
                return false;
            if (row.rel == rhv::Relation::Equal && std::fabs(act - row.b) > tol)
                return false;
        }
        return true;
    };
    auto consider = [&](const std::vector<const Plane *> &active) {
        std::vector<std::vector<double>> m;
        std::vector<double> r;
        for (const auto *p : active) {
            m.push_back(p->a);
            r.push_back(p->b);
        }
        std::vector<double> x;
        if (!solve_square(m, r, x) || !feasible(x))
            return;
        double v = lp.c0;
        for (std::size_t k = 0; k < n; ++k)
            v += lp.c[k] * x[k];
        if (!out.feasible || v < out.min) {
            out.min = v;
            out.argmin = x;
        }
        if (!out.feasible || v > out.max) {
            out.max = v;
            out.argmax = x;
        }
        out.feasible = true;
    };

    if (mandatory.size() > n) {
        // Over-determined equalities: pick n of them and let the check decide.
        std::vector<Plane> all = mandatory;
        all.insert(all.end(), optional.begin(), optional.end());
        optional = std::move(all);
        mandatory.clear();
    }
    std::vector<const Plane *> active;
    for (const auto &p : mandatory)
        active.push_back(&p);
    const std::size_t need = n - active.size();
    std::vector<int> used_bound(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t left) {
        if (left == 0) {
            consider(active);
            return;
        }
        for (std::size_t i = start; i + left <= optional.size(); ++i) {
            const Plane &p = optional[i];
            if (p.var >= 0 && used_bound[static_cast<std::size_t>(p.var)])
                continue;
            if (p.var >= 0)
                used_bound[static_cast<std::size_t>(p.var)] = 1;
            active.push_back(&p);
            rec(i + 1, left - 1);
            active.pop_back();
            if (p.var >= 0)
                used_bound[static_cast<std::size_t>(p.var)] = 0;
        }
    };
    if (n == 0) {
        out.feasible = feasible({});
        out.min = out.max = lp.c0;
        return out;
    }
    rec(0, need);
    return out;
}

rhv::LinearProgram to_linear_program(const DenseLp &lp, rhv::Sense sense)
{
    rhv::LinearProgram out;
    for (std::size_t k = 0; k < lp.lo.size(); ++k)
        out.add_variable("x" + std::to_string(k), lp.lo[k], lp.hi[k]);
    for (const auto &row : lp.rows) {
        rhv::SparseRow coeffs;
        for (std::size_t k = 0; k < row.a.size(); ++k)
            if (row.a[k] != 0.0)
                coeffs.emplace_back(static_cast<int>(k), row.a[k]);
        out.add_constraint(coeffs, row.rel, row.b);
    }
    out.objective.sense = sense;
    for (std::size_t k = 0; k < lp.c.size(); ++k)
        if (lp.c[k] != 0.0)
            out.objective.coeffs.emplace_back(static_cast<int>(k), lp.c[k]);
    out.objective.constant = lp.c0;
    return out;
}

std::vector<std::vector<double>> forward(const rhv::NetworkGraph &net, const std::vector<double> &x)
{
    const int L = net.num_gemms();
    std::vector<std::vector<double>> pre(static_cast<std::size_t>(L) + 1), post(static_cast<std::size_t>(L) + 1);
    pre[0] = post[0] = x;
    for (int i = 1; i <= L; ++i) {
        std::vector<double> in;
        for (int src : net.gemm_sources(i))
            in.insert(in.end(), post[static_cast<std::size_t>(src)].begin(), post[static_cast<std::size_t>(src)].end());
        const auto &g = net.gemm(i);
        std::vector<double> y(g.bias);
        for (std::size_t r = 0; r < g.weights.rows; ++r)
            for (std::size_t c = 0; c < g.weights.cols; ++c)
                y[r] += g.weights(r, c) * in[c];
        post[static_cast<std::size_t>(i)] = y;
        for (auto &v : post[static_cast<std::size_t>(i)])
            v = std::max(v, 0.0);
        pre[static_cast<std::size_t>(i)] = std::move(y);
    }
    return pre;
}

namespace {

struct Affine {
    std::vector<double> a;  // over the inputs
    double c = 0.0;
};

using AffineLayer = std::vector<Affine>;

} // namespace

PatternResult enumerate_patterns(const rhv::NetworkGraph &net, const rhv::BoundStore &store, int t,
                                 const std::vector<double> &coeffs, double c0)
{
    const std::size_t n0 = net.input_dim();
    const auto &box = store.input();

    // Own interval pass, used only to decide which neurons are fixed.
    std::vector<std::vector<std::pair<double, double>>> post_iv(static_cast<std::size_t>(t) + 1);
    std::vector<std::vector<std::pair<double, double>>> pre_iv(static_cast<std::size_t>(t) + 1);
    for (const auto &iv : box)
        post_iv[0].emplace_back(iv.lo, iv.hi);
    for (int i = 1; i <= t; ++i) {
        std::vector<std::pair<double, double>> in;
        for (int src : net.gemm_sources(i))
            in.insert(in.end(), post_iv[static_cast<std::size_t>(src)].begin(),
                      post_iv[static_cast<std::size_t>(src)].end());
        const auto &g = net.gemm(i);
        for (std::size_t r = 0; r < g.weights.rows; ++r) {
            double lo = g.bias[r], hi = g.bias[r];
            for (std::size_t c = 0; c < g.weights.cols; ++c) {
                const double w = g.weights(r, c);
                lo += w > 0 ? w * in[c].first : w * in[c].second;
                hi += w > 0 ? w * in[c].second : w * in[c].first;
            }
            pre_iv[static_cast<std::size_t>(i)].emplace_back(lo, hi);
            post_iv[static_cast<std::size_t>(i)].emplace_back(std::max(lo, 0.0), std::max(hi, 0.0));
        }
    }
    std::vector<std::pair<int, std::size_t>> unstable;
    for (int i = 1; i < t; ++i)
        if (net.has_relu(i))
            for (std::size_t k = 0; k < pre_iv[static_cast<std::size_t>(i)].size(); ++k) {
                const auto [lo, hi] = pre_iv[static_cast<std::size_t>(i)][k];
                if (lo < 0.0 && hi > 0.0)
                    unstable.emplace_back(i, k);
            }
    if (unstable.size() > 20)
        throw std::runtime_error("too many unstable neurons for enumeration");

    PatternResult out;
    const std::size_t patterns = std::size_t{1} << unstable.size();
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        DenseLp lp;
        for (const auto &iv : box) {
            lp.lo.push_back(iv.lo);
            lp.hi.push_back(iv.hi);
        }
        std::vector<AffineLayer> post(static_cast<std::size_t>(t) + 1);
        for (std::size_t k = 0; k < n0; ++k) {
            Affine e{std::vector<double>(n0, 0.0), 0.0};
            e.a[k] = 1.0;
            post[0].push_back(e);
        }
        AffineLayer target;
        std::size_t bit = 0;
        for (int i = 1; i <= t; ++i) {
            AffineLayer in;
            for (int src : net.gemm_sources(i))
                in.insert(in.end(), post[static_cast<std::size_t>(src)].begin(), post[static_cast<std::size_t>(src)].end());
            const auto &g = net.gemm(i);
            AffineLayer pre;
            for (std::size_t r = 0; r < g.weights.rows; ++r) {
                Affine y{std::vector<double>(n0, 0.0), g.bias[r]};
                for (std::size_t c = 0; c < g.weights.cols; ++c) {
                    const double w = g.weights(r, c);
                    for (std::size_t k = 0; k < n0; ++k)
                        y.a[k] += w * in[c].a[k];
                    y.c += w * in[c].c;
                }
                pre.push_back(std::move(y));
            }
            if (i == t) {
                target = std::move(pre);
                break;
            }
            AffineLayer x = pre;
            for (std::size_t k = 0; k < pre.size(); ++k) {
                const auto [lo, hi] = pre_iv[static_cast<std::size_t>(i)][k];
                bool on;
                if (hi <= 0.0) {
                    on = false;
                } else if (lo >= 0.0) {
                    on = true;
                } else {
                    on = (mask >> bit++) & 1;
                    lp.rows.push_back({pre[k].a, on ? rhv::Relation::GreaterEq : rhv::Relation::LessEq, -pre[k].c});
                }
                if (!on)
                    x[k] = Affine{std::vector<double>(n0, 0.0), 0.0};
            }
            post[static_cast<std::size_t>(i)] = std::move(x);
        }
        lp.c.assign(n0, 0.0);
        lp.c0 = c0;
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            for (std::size_t k = 0; k < n0; ++k)
                lp.c[k] += coeffs[j] * target[j].a[k];
            lp.c0 += coeffs[j] * target[j].c;
        }
        const auto v = vertex_enumerate(lp);
        ++out.patterns;
        if (!v.feasible)
            continue;
        if (!out.feasible || v.min < out.min) {
            out.min = v.min;
            out.argmin = v.argmin;
        }
        if (!out.feasible || v.max > out.max) {
            out.max = v.max;
            out.argmax = v.argmax;
        }
        out.feasible = true;
    }
    return out;
}

namespace {

struct Node {
    bool list = false;
    std::string atom;
    std::vector<Node> kids;
};

std::vector<Node> read_sexprs(const std::string &text)
{
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < text.size();) {
        const char ch = text[i];
        if (ch == ';') {
            while (i < text.size() && text[i] != '\n')
                ++i;
        } else if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
        } else if (ch == '(' || ch == ')') {
            toks.emplace_back(1, ch);
            ++i;
        } else {
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '(' &&
                   text[j] != ')' && text[j] != ';')
                ++j;
            toks.push_back(text.substr(i, j - i));
            i = j;
        }
    }
    std::size_t pos = 0;
    std::function<Node()> parse = [&]() -> Node {
        Node n;
        if (toks.at(pos) == "(") {
            n.list = true;
            ++pos;
            while (toks.at(pos) != ")")
                n.kids.push_back(parse());
            ++pos;
        } else {
            n.atom = toks.at(pos++);
        }
        return n;
    };
    std::vector<Node> out;
    while (pos < toks.size())
        out.push_back(parse());
    return out;
}

double num(const Node &n, const std::map<std::string, double> &env)
{
    if (!n.list) {
        auto it = env.find(n.atom);
        return it != env.end() ? it->second : std::stod(n.atom);
    }
    const std::string &op = n.kids[0].atom;
    if (op == "+") {
        double s = 0;
        for (std::size_t i = 1; i < n.kids.size(); ++i)
            s += num(n.kids[i], env);
        return s;
    }
    if (op == "-") {
        if (n.kids.size() == 2)
            return -num(n.kids[1], env);
        double s = num(n.kids[1], env);
        for (std::size_t i = 2; i < n.kids.size(); ++i)
            s -= num(n.kids[i], env);
        return s;
    }
    if (op == "*") {
        double p = 1;
        for (std::size_t i = 1; i < n.kids.size(); ++i)
            p *= num(n.kids[i], env);
        return p;
    }
    throw std::runtime_error("oracle: unknown numeric operator " + op);
}

bool truth(const Node &n, const std::map<std::string, double> &env)
{
    const std::string &op = n.kids.at(0).atom;
    if (op == "and") {
        for (std::size_t i = 1; i < n.kids.size(); ++i)
            if (!truth(n.kids[i], env))
                return false;
        return true;
    }
    if (op == "or") {
        for (std::size_t i = 1; i < n.kids.size(); ++i)
            if (truth(n.kids[i], env))
                return true;
        return false;
    }
    const double a = num(n.kids.at(1), env), b = num(n.kids.at(2), env);
    if (op == "<=")
        return a <= b;
    if (op == ">=")
        return a >= b;
    if (op == "<")
        return a < b;
    if (op == ">")
        return a > b;
    throw std::runtime_error("oracle: unknown boolean operator " + op);
}

} // namespace

bool vnnlib_satisfied(const std::string &text, const std::vector<double> &x, const std::vector<double> &y)
{
    std::map<std::string, double> env;
    for (std::size_t k = 0; k < x.size(); ++k)
        env["X_" + std::to_string(k)] = x[k];
    for (std::size_t k = 0; k < y.size(); ++k)
        env["Y_" + std::to_string(k)] = y[k];
    for (const auto &cmd : read_sexprs(text))
        if (cmd.kids.at(0).atom == "assert" && !truth(cmd.kids.at(1), env))
            return false;
    return true;
}

void grid_points(const rhv::IntervalVector &box, int per_dim, const std::function<void(const std::vector<double> &)> &fn)
{
    std::vector<double> x(box.size());
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (k == box.size()) {
            fn(x);
            return;
        }
        for (int i = 0; i < per_dim; ++i) {
            const double frac = per_dim == 1 ? 0.5 : static_cast<double>(i) / (per_dim - 1);
            x[k] = box[k].lo + frac * (box[k].hi - box[k].lo);
            rec(k + 1);
        }
    };
    rec(0);
}

} // namespace oracle
