#include "rhv/error.hpp"
#include "rhv/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

namespace rhv {

double OutputAtom::objective(std::span<const double> y) const
{
    double dot = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k)
        dot += coeffs[k] * y[k];
    return relation == Relation::GreaterEq ? rhs - dot : dot - rhs;
}

LinearForm OutputAtom::objective_form() const
{
    const double sign = relation == Relation::GreaterEq ? -1.0 : 1.0;
    LinearForm f;
    for (std::size_t k = 0; k < coeffs.size(); ++k)
        if (coeffs[k] != 0.0)
            f.terms.emplace_back(static_cast<int>(k), sign * coeffs[k]);
    f.constant = -sign * rhs;
    return f;
}

double ViolationClause::slack(std::span<const double> y) const
{
    double worst = -kInfinity;
    for (const auto &atom : atoms)
        worst = std::max(worst, atom.objective(y));
    return worst;
}

double PropertySpec::violation_slack(std::span<const double> y) const
{
    double best = kInfinity;
    for (const auto &clause : clauses)
        best = std::min(best, clause.slack(y));
    return best;
}

bool PropertySpec::empty_input_box() const
{
    return std::any_of(input_box.begin(), input_box.end(), [](const Interval &iv) { return iv.lo > iv.hi; });
}

namespace {

struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    std::size_t offset = 0;
};

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    std::vector<SExpr> read_all()
    {
        std::vector<SExpr> out;
        while (skip_space())
            out.push_back(read());
        return out;
    }

private:
    bool skip_space()
    {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                return true;
            }
        }
        return false;
    }

    SExpr read()
    {
        SExpr e;
        e.offset = pos_;
        const char c = text_[pos_];
        if (c == ')')
            throw Error(ErrorKind::SyntaxError, "unexpected ')'", pos_);
        if (c == '(') {
            e.is_list = true;
            ++pos_;
            while (true) {
                if (!skip_space())
                    throw Error(ErrorKind::SyntaxError, "unterminated list opened here", e.offset);
                if (text_[pos_] == ')') {
                    ++pos_;
                    return e;
                }
                e.items.push_back(read());
            }
        }
        const std::size_t begin = pos_;
        while (pos_ < text_.size()) {
            const char d = text_[pos_];
            if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d)))
                break;
            ++pos_;
        }
        e.atom = std::string(text_.substr(begin, pos_ - begin));
        return e;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

enum class VarKind { X, Y };

struct VarRef {
    VarKind kind;
    int index;
    auto operator<=>(const VarRef &) const = default;
};

struct LinearExpr {
    std::map<VarRef, double> coeffs;
    double constant = 0.0;

    bool is_constant() const { return coeffs.empty(); }
    void add(const LinearExpr &o, double scale)
    {
        for (const auto &[v, c] : o.coeffs)
            coeffs[v] += scale * c;
        constant += scale * o.constant;
    }
    void scale(double s)
    {
        for (auto &[v, c] : coeffs)
            c *= s;
        constant *= s;
    }
    void prune()
    {
        std::erase_if(coeffs, [](const auto &kv) { return kv.second == 0.0; });
    }
};

// expr (<= or >=) 0
struct RawAtom {
    LinearExpr expr;
    Relation relation;
    std::size_t offset;
};

using Dnf = std::vector<std::vector<RawAtom>>;

constexpr std::size_t kMaxClauses = 100000;

std::optional<VarRef> parse_var_name(const std::string &name)
{
    if (name.size() < 3 || name[1] != '_' || (name[0] != 'X' && name[0] != 'Y'))
        return std::nullopt;
    int idx = 0;
    for (std::size_t i = 2; i < name.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(name[i])))
            return std::nullopt;
        idx = idx * 10 + (name[i] - '0');
        if (idx > 100000000)
            return std::nullopt;
    }
    return VarRef{name[0] == 'X' ? VarKind::X : VarKind::Y, idx};
}

class PropertyBuilder {
public:
    PropertySpec build(const std::vector<SExpr> &commands);

private:
    LinearExpr expr(const SExpr &e);
    Dnf boolean(const SExpr &e);
    void declare(const SExpr &cmd);

    std::set<VarRef> declared_;
};

LinearExpr PropertyBuilder::expr(const SExpr &e)
{
    LinearExpr out;
    if (!e.is_list) {
        if (auto v = parse_var_name(e.atom)) {
            if (!declared_.count(*v))
                throw Error(ErrorKind::SchemaError, "undeclared variable '" + e.atom + "'", e.offset);
            out.coeffs[*v] = 1.0;
            return out;
        }
        const char *begin = e.atom.c_str();
        char *end = nullptr;
        const double value = std::strtod(begin, &end);
        if (e.atom.empty() || *end != '\0' || !std::isfinite(value))
            throw Error(ErrorKind::SyntaxError, "expected a number or variable, got '" + e.atom + "'", e.offset);
        out.constant = value;
        return out;
    }
    if (e.items.empty() || e.items.front().is_list)
        throw Error(ErrorKind::SyntaxError, "expected an operator", e.offset);
    const std::string &op = e.items.front().atom;
    const std::size_t argc = e.items.size() - 1;
    if (op == "+") {
        for (std::size_t i = 1; i < e.items.size(); ++i)
            out.add(expr(e.items[i]), 1.0);
    } else if (op == "-") {
        if (argc == 0)
            throw Error(ErrorKind::SyntaxError, "'-' needs an argument", e.offset);
        out = expr(e.items[1]);
        if (argc == 1)
            out.scale(-1.0);
        for (std::size_t i = 2; i < e.items.size(); ++i)
            out.add(expr(e.items[i]), -1.0);
    } else if (op == "*") {
        if (argc == 0)
            throw Error(ErrorKind::SyntaxError, "'*' needs arguments", e.offset);
        out.constant = 1.0;
        for (std::size_t i = 1; i < e.items.size(); ++i) {
            LinearExpr f = expr(e.items[i]);
            if (f.is_constant()) {
                out.scale(f.constant);
            } else if (out.is_constant()) {
                f.scale(out.constant);
                out = std::move(f);
            } else {
                throw Error(ErrorKind::NonlinearTerm, "product of two variable expressions", e.offset);
            }
        }
    } else {
        throw Error(ErrorKind::NonlinearTerm, "unsupported operator '" + op + "'", e.offset);
    }
    out.prune();
    return out;
}

Dnf PropertyBuilder::boolean(const SExpr &e)
{
    if (!e.is_list || e.items.empty() || e.items.front().is_list)
        throw Error(ErrorKind::SyntaxError, "expected a boolean expression", e.offset);
    const std::string &op = e.items.front().atom;
    if (op == "<=" || op == ">=" || op == "<" || op == ">") {
        if (e.items.size() != 3)
            throw Error(ErrorKind::SyntaxError, "'" + op + "' takes exactly two arguments", e.offset);
        RawAtom atom;
        atom.offset = e.offset;
        atom.relation = (op[0] == '<') ? Relation::LessEq : Relation::GreaterEq;
        atom.expr = expr(e.items[1]);
        atom.expr.add(expr(e.items[2]), -1.0);
        atom.expr.prune();
        bool has_x = false, has_y = false;
        for (const auto &[v, c] : atom.expr.coeffs)
            (v.kind == VarKind::X ? has_x : has_y) = true;
        if (has_x && has_y)
            throw Error(ErrorKind::MixedVariableAtom, "atom mixes input and output variables", e.offset);
        if (!has_x && !has_y)
            throw Error(ErrorKind::SchemaError, "atom has no variables", e.offset);
        return {{atom}};
    }
    if (op == "and") {
        Dnf acc{{}};
        for (std::size_t i = 1; i < e.items.size(); ++i) {
            const Dnf part = boolean(e.items[i]);
            Dnf next;
            if (acc.size() * part.size() > kMaxClauses)
                throw Error(ErrorKind::SchemaError, "disjunctive normal form too large", e.offset);
            for (const auto &a : acc)
                for (const auto &b : part) {
                    auto merged = a;
                    merged.insert(merged.end(), b.begin(), b.end());
                    next.push_back(std::move(merged));
                }
            acc = std::move(next);
        }
        return acc;
    }
    if (op == "or") {
        Dnf acc;
        for (std::size_t i = 1; i < e.items.size(); ++i) {
            Dnf part = boolean(e.items[i]);
            acc.insert(acc.end(), part.begin(), part.end());
        }
        if (acc.empty())
            throw Error(ErrorKind::SchemaError, "empty disjunction", e.offset);
        return acc;
    }
    throw Error(ErrorKind::SchemaError, "unsupported boolean operator '" + op + "'", e.offset);
}

void PropertyBuilder::declare(const SExpr &cmd)
{
    if (cmd.items.size() != 3 || cmd.items[1].is_list || cmd.items[2].is_list)
        throw Error(ErrorKind::SyntaxError, "malformed declare-const", cmd.offset);
    const auto v = parse_var_name(cmd.items[1].atom);
    if (!v)
        throw Error(ErrorKind::SchemaError, "variable names must be X_i or Y_j, got '" + cmd.items[1].atom + "'",
                    cmd.offset);
    if (cmd.items[2].atom != "Real")
        throw Error(ErrorKind::SchemaError, "only Real variables are supported", cmd.offset);
    if (!declared_.insert(*v).second)
        throw Error(ErrorKind::SchemaError, "variable '" + cmd.items[1].atom + "' declared twice", cmd.offset);
}

PropertySpec PropertyBuilder::build(const std::vector<SExpr> &commands)
{
    std::vector<const SExpr *> asserts;
    for (const auto &cmd : commands) {
        if (!cmd.is_list || cmd.items.empty() || cmd.items.front().is_list)
            throw Error(ErrorKind::SyntaxError, "expected a command", cmd.offset);
        const std::string &head = cmd.items.front().atom;
        if (head == "declare-const") {
            declare(cmd);
        } else if (head == "assert") {
            if (cmd.items.size() != 2)
                throw Error(ErrorKind::SyntaxError, "assert takes one argument", cmd.offset);
            asserts.push_back(&cmd.items[1]);
        } else {
            throw Error(ErrorKind::SchemaError, "unsupported command '" + head + "'", cmd.offset);
        }
    }

    int nx = 0, ny = 0;
    for (const auto &v : declared_)
        (v.kind == VarKind::X ? nx : ny) += 1;
    for (const auto &v : declared_) {
        const int count = v.kind == VarKind::X ? nx : ny;
        if (v.index >= count)
            throw Error(ErrorKind::SchemaError, "variable indices must be contiguous from 0");
    }
    if (nx == 0)
        throw Error(ErrorKind::SchemaError, "no input variables declared");
    if (ny == 0)
        throw Error(ErrorKind::SchemaError, "no output variables declared");

    PropertySpec prop;
    prop.num_outputs = static_cast<std::size_t>(ny);
    prop.input_box.assign(static_cast<std::size_t>(nx), Interval{-kInfinity, kInfinity});

    Dnf outputs{{}};
    bool any_output = false;
    for (const SExpr *a : asserts) {
        Dnf dnf = boolean(*a);
        bool has_x = false, has_y = false;
        for (const auto &clause : dnf)
            for (const auto &atom : clause)
                (atom.expr.coeffs.begin()->first.kind == VarKind::X ? has_x : has_y) = true;
        if (has_x) {
            if (dnf.size() != 1 || has_y)
                throw Error(ErrorKind::SchemaError,
                            "input constraints must be plain conjunctions, separate from output constraints",
                            a->offset);
            for (const auto &atom : dnf.front()) {
                if (atom.expr.coeffs.size() != 1)
                    throw Error(ErrorKind::SchemaError, "input constraint is not a bound on a single variable",
                                atom.offset);
                const auto &[var, coef] = *atom.expr.coeffs.begin();
                // coef * x + constant (rel) 0
                const double bound = -atom.expr.constant / coef;
                const bool upper = (atom.relation == Relation::LessEq) == (coef > 0.0);
                auto &iv = prop.input_box[var.index];
                if (upper)
                    iv.hi = std::min(iv.hi, bound);
                else
                    iv.lo = std::max(iv.lo, bound);
            }
            continue;
        }
        any_output = true;
        if (outputs.size() * dnf.size() > kMaxClauses)
            throw Error(ErrorKind::SchemaError, "disjunctive normal form too large", a->offset);
        Dnf next;
        for (const auto &base : outputs)
            for (const auto &clause : dnf) {
                auto merged = base;
                merged.insert(merged.end(), clause.begin(), clause.end());
                next.push_back(std::move(merged));
            }
        outputs = std::move(next);
    }
    if (!any_output)
        throw Error(ErrorKind::SchemaError, "property missing: no assertion over output variables");

    for (std::size_t k = 0; k < prop.input_box.size(); ++k)
        if (!std::isfinite(prop.input_box[k].lo) || !std::isfinite(prop.input_box[k].hi))
            throw Error(ErrorKind::UnboundedInputBox, "X_" + std::to_string(k) + " is not bounded on both sides");

    for (const auto &clause : outputs) {
        ViolationClause vc;
        for (const auto &atom : clause) {
            OutputAtom out;
            out.coeffs.assign(prop.num_outputs, 0.0);
            for (const auto &[var, coef] : atom.expr.coeffs)
                out.coeffs[var.index] = coef;
            out.relation = atom.relation;
            out.rhs = -atom.expr.constant;
            vc.atoms.push_back(std::move(out));
        }
        prop.clauses.push_back(std::move(vc));
    }
    return prop;
}

} // namespace

PropertySpec parse_vnnlib(std::string_view text)
{
    Reader reader(text);
    const auto commands = reader.read_all();
    PropertyBuilder builder;
    return builder.build(commands);
}

namespace {

std::string number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".e") == std::string::npos)
        out += ".0";
    return out;
}

std::string atom_text(const OutputAtom &atom)
{
    std::string lhs;
    std::size_t terms = 0;
    for (std::size_t j = 0; j < atom.coeffs.size(); ++j) {
        if (atom.coeffs[j] == 0.0)
            continue;
        const std::string var = "Y_" + std::to_string(j);
        lhs += (terms++ ? " " : "") + (atom.coeffs[j] == 1.0 ? var : "(* " + number(atom.coeffs[j]) + " " + var + ")");
    }
    if (terms == 0)
        lhs = "0.0";
    else if (terms > 1)
        lhs = "(+ " + lhs + ")";
    return std::string("(") + (atom.relation == Relation::LessEq ? "<=" : ">=") + " " + lhs + " " +
           number(atom.rhs) + ")";
}

} // namespace

std::string emit_vnnlib(const PropertySpec &prop)
{
    std::string out;
    for (std::size_t k = 0; k < prop.input_box.size(); ++k)
        out += "(declare-const X_" + std::to_string(k) + " Real)\n";
    for (std::size_t j = 0; j < prop.num_outputs; ++j)
        out += "(declare-const Y_" + std::to_string(j) + " Real)\n";
    out += "\n";
    for (std::size_t k = 0; k < prop.input_box.size(); ++k) {
        const std::string x = "X_" + std::to_string(k);
        out += "(assert (>= " + x + " " + number(prop.input_box[k].lo) + "))\n";
        out += "(assert (<= " + x + " " + number(prop.input_box[k].hi) + "))\n";
    }
    out += "\n";
    auto clause_text = [](const ViolationClause &c) {
        if (c.atoms.size() == 1)
            return atom_text(c.atoms.front());
        std::string s = "(and";
        for (const auto &a : c.atoms)
            s += " " + atom_text(a);
        return s + ")";
    };
    if (prop.clauses.size() == 1) {
        out += "(assert " + clause_text(prop.clauses.front()) + ")\n";
    } else {
        out += "(assert (or\n";
        for (const auto &c : prop.clauses)
            out += "  " + clause_text(c) + "\n";
        out += "))\n";
    }
    return out;
}

} // namespace rhv
