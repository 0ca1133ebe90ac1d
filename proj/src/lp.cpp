#include "rhv/lp.hpp"

#include "rhv/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rhv {

const char *to_string(Relation rel)
{
    switch (rel) {
    case Relation::LessEq: return "<=";
    case Relation::Equal: return "=";
    case Relation::GreaterEq: return ">=";
    }
    return "?";
}

const char *to_string(Sense sense)
{
    return sense == Sense::Minimize ? "min" : "max";
}

const char *to_string(LpStatus status)
{
    switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
    }
    return "?";
}

int LinearProgram::add_variable(std::string name, double lo, double hi)
{
    variables.push_back({std::move(name), lo, hi});
    return static_cast<int>(variables.size()) - 1;
}

int LinearProgram::add_constraint(SparseRow coeffs, Relation relation, double rhs)
{
    constraints.push_back({std::move(coeffs), relation, rhs});
    return static_cast<int>(constraints.size()) - 1;
}

void LinearProgram::validate() const
{
    const int n = static_cast<int>(variables.size());
    for (const auto &v : variables) {
        if (std::isnan(v.lo) || std::isnan(v.hi) || v.lo > v.hi || v.lo == kInfinity || v.hi == -kInfinity)
            throw Error(ErrorKind::InvalidModel, "variable '" + v.name + "' has invalid bounds");
    }
    auto check_row = [n](const SparseRow &row, const std::string &what) {
        for (const auto &[var, coef] : row) {
            if (var < 0 || var >= n)
                throw Error(ErrorKind::InvalidModel, what + " references undeclared variable " + std::to_string(var));
            if (!std::isfinite(coef))
                throw Error(ErrorKind::InvalidModel, what + " has a non-finite coefficient");
        }
    };
    for (std::size_t r = 0; r < constraints.size(); ++r) {
        check_row(constraints[r].coeffs, "row " + std::to_string(r));
        if (!std::isfinite(constraints[r].rhs))
            throw Error(ErrorKind::InvalidModel, "row " + std::to_string(r) + " has a non-finite right-hand side");
    }
    check_row(objective.coeffs, "objective");
    if (!std::isfinite(objective.constant))
        throw Error(ErrorKind::InvalidModel, "objective constant is not finite");
}

LinearProgram fix_variable(const LinearProgram &lp, int var, double value)
{
    if (var < 0 || static_cast<std::size_t>(var) >= lp.variables.size())
        throw Error(ErrorKind::InvalidModel, "cannot fix undeclared variable " + std::to_string(var));
    const auto &v = lp.variables[var];
    if (!(value >= v.lo && value <= v.hi)) {
        std::ostringstream os;
        os << "value " << value << " outside [" << v.lo << ", " << v.hi << "] of '" << v.name << "'";
        throw Error(ErrorKind::ValueOutOfBounds, os.str());
    }
    LinearProgram out = lp;
    out.variables[var].lo = value;
    out.variables[var].hi = value;
    return out;
}

LinearProgram add_rows(const LinearProgram &lp, const std::vector<LpConstraint> &rows)
{
    LinearProgram out = lp;
    out.constraints.insert(out.constraints.end(), rows.begin(), rows.end());
    return out;
}

double row_activity(const SparseRow &row, const std::vector<double> &x)
{
    double sum = 0.0;
    for (const auto &[var, coef] : row)
        sum += coef * x[var];
    return sum;
}

double evaluate_objective(const LpObjective &obj, const std::vector<double> &x)
{
    return obj.constant + row_activity(obj.coeffs, x);
}

double max_violation(const LinearProgram &lp, const std::vector<double> &x)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < lp.variables.size(); ++j) {
        worst = std::max(worst, lp.variables[j].lo - x[j]);
        worst = std::max(worst, x[j] - lp.variables[j].hi);
    }
    for (const auto &c : lp.constraints) {
        const double a = row_activity(c.coeffs, x);
        if (c.relation != Relation::GreaterEq)
            worst = std::max(worst, a - c.rhs);
        if (c.relation != Relation::LessEq)
            worst = std::max(worst, c.rhs - a);
    }
    return worst;
}

namespace {

enum class VarState { Basic, AtLower, AtUpper, Free };

// Columns: n structural variables, then one row-activity variable w_r per row
// (A x - w = 0), then one artificial per row used only by phase 1.
class BoundedSimplex {
public:
    BoundedSimplex(const LinearProgram &lp, const LpLimits &limits)
        : lp_(lp)
        , limits_(limits)
        , tol_(limits.tolerances)
        , n_(static_cast<int>(lp.variables.size()))
        , m_(static_cast<int>(lp.constraints.size()))
        , cols_(n_ + 2 * m_)
    {
    }

    LpResult run();

private:
    double &a(int r, int j) { return full_[static_cast<std::size_t>(r) * cols_ + j]; }
    double &t(int r, int j) { return tab_[static_cast<std::size_t>(r) * cols_ + j]; }
    bool is_artificial(int j) const { return j >= n_ + m_; }

    void setup();
    bool refactor();
    void price_from_scratch();
    // Returns false on an unbounded ray.
    enum class Step { Optimal, Moved, Unbounded };
    Step iterate();
    void pivot(int row, int col);
    LpStatus run_phase(bool phase_one);

    const LinearProgram &lp_;
    LpLimits limits_;
    LpTolerances tol_;
    int n_, m_, cols_;

    std::vector<double> full_;  // m x cols original matrix
    std::vector<double> tab_;   // m x cols, B^-1 * full
    std::vector<double> lo_, hi_, val_, cost_, dj_;
    std::vector<VarState> state_;
    std::vector<int> basis_;

    std::size_t iterations_ = 0;
    std::size_t since_refactor_ = 0;
    std::size_t degenerate_streak_ = 0;
    std::size_t bland_pivots_ = 0;
    bool hit_limit_ = false;
};

void BoundedSimplex::setup()
{
    full_.assign(static_cast<std::size_t>(m_) * cols_, 0.0);
    lo_.assign(cols_, 0.0);
    hi_.assign(cols_, 0.0);
    val_.assign(cols_, 0.0);
    state_.assign(cols_, VarState::AtLower);
    basis_.assign(m_, -1);

    for (int j = 0; j < n_; ++j) {
        lo_[j] = lp_.variables[j].lo;
        hi_[j] = lp_.variables[j].hi;
        if (std::isfinite(lo_[j])) {
            val_[j] = lo_[j];
            state_[j] = VarState::AtLower;
        } else if (std::isfinite(hi_[j])) {
            val_[j] = hi_[j];
            state_[j] = VarState::AtUpper;
        } else {
            val_[j] = 0.0;
            state_[j] = VarState::Free;
        }
    }
    for (int r = 0; r < m_; ++r) {
        const auto &c = lp_.constraints[r];
        for (const auto &[var, coef] : c.coeffs)
            a(r, var) += coef;
        const int w = n_ + r;
        const int art = n_ + m_ + r;
        a(r, w) = -1.0;
        lo_[w] = c.relation == Relation::LessEq ? -kInfinity : c.rhs;
        hi_[w] = c.relation == Relation::GreaterEq ? kInfinity : c.rhs;
        lo_[art] = 0.0;
        hi_[art] = kInfinity;

        double activity = 0.0;
        for (int j = 0; j < n_; ++j)
            activity += a(r, j) * val_[j];
        if (activity >= lo_[w] && activity <= hi_[w]) {
            basis_[r] = w;
            state_[w] = VarState::Basic;
            val_[w] = activity;
            a(r, art) = 1.0;
            state_[art] = VarState::AtLower;
            val_[art] = 0.0;
        } else {
            const bool below = activity < lo_[w];
            val_[w] = below ? lo_[w] : hi_[w];
            state_[w] = below ? VarState::AtLower : VarState::AtUpper;
            const double gap = val_[w] - activity;
            a(r, art) = gap > 0.0 ? 1.0 : -1.0;
            basis_[r] = art;
            state_[art] = VarState::Basic;
            val_[art] = std::abs(gap);
        }
    }
}

bool BoundedSimplex::refactor()
{
    since_refactor_ = 0;
    if (m_ == 0) {
        tab_.clear();
        price_from_scratch();
        return true;
    }
    // Gauss-Jordan on [B | full] with partial pivoting.
    std::vector<double> b(static_cast<std::size_t>(m_) * m_);
    for (int r = 0; r < m_; ++r)
        for (int k = 0; k < m_; ++k)
            b[static_cast<std::size_t>(r) * m_ + k] = a(r, basis_[k]);
    std::vector<double> work = full_;
    std::vector<int> row_of(m_);
    for (int r = 0; r < m_; ++r)
        row_of[r] = r;
    for (int k = 0; k < m_; ++k) {
        int best = -1;
        double best_abs = 0.0;
        for (int r = k; r < m_; ++r) {
            const double v = std::abs(b[static_cast<std::size_t>(row_of[r]) * m_ + k]);
            if (v > best_abs) {
                best_abs = v;
                best = r;
            }
        }
        if (best < 0 || best_abs < 1e-12)
            return false;
        std::swap(row_of[k], row_of[best]);
        const int pr = row_of[k];
        const double p = b[static_cast<std::size_t>(pr) * m_ + k];
        for (int c = 0; c < m_; ++c)
            b[static_cast<std::size_t>(pr) * m_ + c] /= p;
        for (int c = 0; c < cols_; ++c)
            work[static_cast<std::size_t>(pr) * cols_ + c] /= p;
        for (int r = 0; r < m_; ++r) {
            const int rr = row_of[r];
            if (rr == pr)
                continue;
            const double f = b[static_cast<std::size_t>(rr) * m_ + k];
            if (f == 0.0)
                continue;
            for (int c = 0; c < m_; ++c)
                b[static_cast<std::size_t>(rr) * m_ + c] -= f * b[static_cast<std::size_t>(pr) * m_ + c];
            for (int c = 0; c < cols_; ++c)
                work[static_cast<std::size_t>(rr) * cols_ + c] -= f * work[static_cast<std::size_t>(pr) * cols_ + c];
        }
    }
    tab_.assign(static_cast<std::size_t>(m_) * cols_, 0.0);
    for (int k = 0; k < m_; ++k)
        std::copy_n(work.begin() + static_cast<std::ptrdiff_t>(row_of[k]) * cols_, cols_,
                    tab_.begin() + static_cast<std::ptrdiff_t>(k) * cols_);

    // x_B = -B^-1 N x_N, i.e. x_B = -sum over nonbasic j of T_j x_j.
    for (int r = 0; r < m_; ++r) {
        double v = 0.0;
        for (int j = 0; j < cols_; ++j)
            if (state_[j] != VarState::Basic && val_[j] != 0.0)
                v -= t(r, j) * val_[j];
        val_[basis_[r]] = v;
    }
    price_from_scratch();
    return true;
}

void BoundedSimplex::price_from_scratch()
{
    dj_ = cost_;
    for (int r = 0; r < m_; ++r) {
        const double cb = cost_[basis_[r]];
        if (cb == 0.0)
            continue;
        for (int j = 0; j < cols_; ++j)
            dj_[j] -= cb * t(r, j);
    }
    for (int r = 0; r < m_; ++r)
        dj_[basis_[r]] = 0.0;
}

void BoundedSimplex::pivot(int row, int col)
{
    const double p = t(row, col);
    for (int j = 0; j < cols_; ++j)
        t(row, j) /= p;
    t(row, col) = 1.0;
    for (int r = 0; r < m_; ++r) {
        if (r == row)
            continue;
        const double f = t(r, col);
        if (f == 0.0)
            continue;
        for (int j = 0; j < cols_; ++j)
            t(r, j) -= f * t(row, j);
        t(r, col) = 0.0;
    }
    const double f = dj_[col];
    if (f != 0.0)
        for (int j = 0; j < cols_; ++j)
            dj_[j] -= f * t(row, j);
    dj_[col] = 0.0;
}

BoundedSimplex::Step BoundedSimplex::iterate()
{
    const bool bland = degenerate_streak_ >= limits_.degeneracy_streak;

    int enter = -1;
    int dir = 0;
    double best = 0.0;
    for (int j = 0; j < cols_; ++j) {
        if (state_[j] == VarState::Basic || lo_[j] == hi_[j])
            continue;
        const double d = dj_[j];
        int cand = 0;
        if (state_[j] == VarState::AtLower && d < -tol_.reduced_cost)
            cand = 1;
        else if (state_[j] == VarState::AtUpper && d > tol_.reduced_cost)
            cand = -1;
        else if (state_[j] == VarState::Free && std::abs(d) > tol_.reduced_cost)
            cand = d < 0.0 ? 1 : -1;
        if (cand == 0)
            continue;
        if (bland) {
            enter = j;
            dir = cand;
            break;
        }
        if (std::abs(d) > best) {
            best = std::abs(d);
            enter = j;
            dir = cand;
        }
    }
    if (enter < 0)
        return Step::Optimal;

    double theta = (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter])) ? hi_[enter] - lo_[enter] : kInfinity;
    int leave_row = -1;
    bool leave_at_upper = false;
    double leave_alpha = 0.0;
    for (int r = 0; r < m_; ++r) {
        const double alpha = dir * t(r, enter);
        if (std::abs(alpha) <= tol_.pivot)
            continue;
        const int b = basis_[r];
        double ratio;
        bool to_upper;
        if (alpha > 0.0) {
            if (!std::isfinite(lo_[b]))
                continue;
            ratio = (val_[b] - lo_[b]) / alpha;
            to_upper = false;
        } else {
            if (!std::isfinite(hi_[b]))
                continue;
            ratio = (hi_[b] - val_[b]) / -alpha;
            to_upper = true;
        }
        ratio = std::max(ratio, 0.0);
        const double tie = std::isfinite(theta) ? 1e-12 * (1.0 + theta) : 0.0;
        bool take = false;
        if (!std::isfinite(theta) || ratio < theta - tie) {
            take = true;
        } else if (ratio <= theta + tie && leave_row >= 0) {
            take = bland ? b < basis_[leave_row] : std::abs(alpha) > std::abs(leave_alpha);
        }
        if (take) {
            theta = ratio;
            leave_row = r;
            leave_at_upper = to_upper;
            leave_alpha = alpha;
        }
    }
    if (!std::isfinite(theta))
        return Step::Unbounded;

    if (theta <= 1e-12)
        ++degenerate_streak_;
    else
        degenerate_streak_ = 0;
    if (bland)
        ++bland_pivots_;

    if (theta > 0.0) {
        val_[enter] += dir * theta;
        for (int r = 0; r < m_; ++r)
            val_[basis_[r]] -= dir * t(r, enter) * theta;
    }
    if (leave_row < 0) {
        state_[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
        val_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
        return Step::Moved;
    }
    const int leaving = basis_[leave_row];
    state_[leaving] = leave_at_upper ? VarState::AtUpper : VarState::AtLower;
    val_[leaving] = leave_at_upper ? hi_[leaving] : lo_[leaving];
    pivot(leave_row, enter);
    basis_[leave_row] = enter;
    state_[enter] = VarState::Basic;
    ++since_refactor_;
    return Step::Moved;
}

LpStatus BoundedSimplex::run_phase(bool phase_one)
{
    cost_.assign(cols_, 0.0);
    if (phase_one) {
        for (int j = n_ + m_; j < cols_; ++j)
            cost_[j] = 1.0;
    } else {
        const double sign = lp_.objective.sense == Sense::Minimize ? 1.0 : -1.0;
        for (const auto &[var, coef] : lp_.objective.coeffs)
            cost_[var] += sign * coef;
    }
    refactor();
    bool just_refactored = true;
    while (true) {
        if (iterations_ >= limits_.max_iterations) {
            hit_limit_ = true;
            return LpStatus::IterationLimit;
        }
        if (since_refactor_ >= 50) {
            refactor();
            just_refactored = true;
        }
        const Step step = iterate();
        if (step == Step::Optimal) {
            if (just_refactored)
                return LpStatus::Optimal;
            refactor();
            just_refactored = true;
            continue;
        }
        if (step == Step::Unbounded)
            return LpStatus::Unbounded;
        ++iterations_;
        just_refactored = false;
    }
}

LpResult BoundedSimplex::run()
{
    LpResult result;
    setup();

    double scale = 1.0;
    for (const auto &c : lp_.constraints)
        scale = std::max(scale, std::abs(c.rhs));

    bool needs_phase_one = false;
    for (int r = 0; r < m_; ++r)
        if (is_artificial(basis_[r]) && val_[basis_[r]] > 0.0)
            needs_phase_one = true;

    if (needs_phase_one) {
        const LpStatus s = run_phase(true);
        double infeas = 0.0;
        for (int j = n_ + m_; j < cols_; ++j)
            infeas += std::max(val_[j], 0.0);
        result.infeasibility = infeas;
        if (s == LpStatus::IterationLimit) {
            result.status = LpStatus::IterationLimit;
            result.iterations = iterations_;
            result.bland_pivots = bland_pivots_;
            return result;
        }
        if (infeas > tol_.feasibility * scale) {
            result.status = LpStatus::Infeasible;
            result.iterations = iterations_;
            result.bland_pivots = bland_pivots_;
            return result;
        }
    }
    for (int j = n_ + m_; j < cols_; ++j) {
        hi_[j] = 0.0;
        if (state_[j] != VarState::Basic) {
            state_[j] = VarState::AtLower;
            val_[j] = 0.0;
        }
    }
    degenerate_streak_ = 0;

    const LpStatus s = run_phase(false);
    result.status = s;
    result.iterations = iterations_;
    result.bland_pivots = bland_pivots_;
    result.primal.assign(val_.begin(), val_.begin() + n_);
    // Snap structural values onto their bounds where rounding pushed them out.
    for (int j = 0; j < n_; ++j)
        result.primal[j] = std::clamp(result.primal[j], lo_[j], hi_[j]);
    if (s == LpStatus::Optimal || s == LpStatus::IterationLimit) {
        result.primal_feasible = true;
        result.objective_value = evaluate_objective(lp_.objective, result.primal);
    }
    return result;
}

} // namespace

LpResult solve_lp(const LinearProgram &lp, const LpLimits &limits)
{
    lp.validate();
    BoundedSimplex simplex(lp, limits);
    return simplex.run();
}

std::string to_text(const LinearProgram &lp)
{
    std::ostringstream os;
    os.precision(17);
    auto term_list = [&](const SparseRow &row) {
        bool first = true;
        for (const auto &[var, coef] : row) {
            os << (first ? "" : " ") << (coef < 0 ? "- " : (first ? "" : "+ ")) << std::abs(coef) << " "
               << lp.variables[var].name;
            first = false;
        }
        if (first)
            os << "0";
    };
    os << (lp.objective.sense == Sense::Minimize ? "minimize" : "maximize") << "\n  obj: ";
    term_list(lp.objective.coeffs);
    if (lp.objective.constant != 0.0)
        os << " + " << lp.objective.constant;
    os << "\nsubject to\n";
    for (std::size_t r = 0; r < lp.constraints.size(); ++r) {
        os << "  r" << r << ": ";
        term_list(lp.constraints[r].coeffs);
        os << " " << to_string(lp.constraints[r].relation) << " " << lp.constraints[r].rhs << "\n";
    }
    os << "bounds\n";
    for (const auto &v : lp.variables)
        os << "  " << v.lo << " <= " << v.name << " <= " << v.hi << "\n";
    os << "end\n";
    return os.str();
}

} // namespace rhv
