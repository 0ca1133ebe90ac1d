#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace rhv {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { LessEq, Equal, GreaterEq };
enum class Sense { Minimize, Maximize };

const char *to_string(Relation rel);
const char *to_string(Sense sense);

using SparseRow = std::vector<std::pair<int, double>>;

struct LpVariable {
    std::string name;
    double lo = 0.0;
    double hi = kInfinity;
};

struct LpConstraint {
    SparseRow coeffs;
    Relation relation = Relation::LessEq;
    double rhs = 0.0;
};

struct LpObjective {
    Sense sense = Sense::Minimize;
    SparseRow coeffs;
    double constant = 0.0;
};

// Plain value type; derived problems (fixings, extra rows) are copies.
struct LinearProgram {
    std::vector<LpVariable> variables;
    std::vector<LpConstraint> constraints;
    LpObjective objective;

    int add_variable(std::string name, double lo, double hi);
    int add_constraint(SparseRow coeffs, Relation relation, double rhs);

    std::size_t num_variables() const { return variables.size(); }
    std::size_t num_constraints() const { return constraints.size(); }

    // Throws InvalidModel on crossed bounds, non-finite coefficients, or
    // references to undeclared variables.
    void validate() const;
};

// Copy of `lp` with variable `var` fixed at `value`; throws ValueOutOfBounds
// if the value lies outside the variable's bounds.
LinearProgram fix_variable(const LinearProgram &lp, int var, double value);

LinearProgram add_rows(const LinearProgram &lp, const std::vector<LpConstraint> &rows);

double evaluate_objective(const LpObjective &obj, const std::vector<double> &x);
double row_activity(const SparseRow &row, const std::vector<double> &x);

// Largest bound or row violation of `x` (0 when feasible).
double max_violation(const LinearProgram &lp, const std::vector<double> &x);

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char *to_string(LpStatus status);

struct LpTolerances {
    double feasibility = 1e-7;   // primal bound and row violation
    double optimality = 1e-6;    // objective accuracy promised to callers
    double pivot = 1e-9;         // smallest usable pivot element
    double reduced_cost = 1e-9;  // pricing threshold
};

struct LpLimits {
    std::size_t max_iterations = 100000;
    // Consecutive degenerate pivots before switching to Bland's rule.
    std::size_t degeneracy_streak = 50;
    LpTolerances tolerances;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double objective_value = 0.0;  // meaningful when Optimal or IterationLimit with a feasible point
    std::vector<double> primal;    // structural variable values
    bool primal_feasible = false;
    // Minimal sum of artificial infeasibility reached by phase 1.
    double infeasibility = 0.0;
    std::size_t iterations = 0;
    std::size_t bland_pivots = 0;
};

// Dense bounded-variable primal simplex: phase 1 over artificial variables,
// Dantzig pricing, Bland's rule after a degeneracy streak.
LpResult solve_lp(const LinearProgram &lp, const LpLimits &limits = {});

// Human-readable dump (objective, rows, bounds sections).
std::string to_text(const LinearProgram &lp);

} // namespace rhv
