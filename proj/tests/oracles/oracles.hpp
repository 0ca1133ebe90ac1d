#pragma once

// Reference implementations used only by the tests. None of them share code
// with the solver paths they check.

#include "rhv/interval.hpp"
#include "rhv/lp.hpp"
#include "rhv/model_graph.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Dense LP over a bounded box: rows are a.x (<=|=|>=) b.
struct DenseRow {
    std::vector<double> a;
    rhv::Relation rel = rhv::Relation::LessEq;
    double b = 0.0;
};

struct DenseLp {
    std::vector<double> lo, hi;  // finite
    std::vector<DenseRow> rows;
    std::vector<double> c;
    double c0 = 0.0;
};

struct VertexResult {
    bool feasible = false;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> argmin, argmax;
};

// Tries every choice of n active constraints (rows or bounds), solves the
// square system by Gaussian elimination and keeps feasible points. Exact for
// bounded feasible regions, exponential in the size.
VertexResult vertex_enumerate(const DenseLp &lp, double feas_tol = 1e-9);

rhv::LinearProgram to_linear_program(const DenseLp &lp, rhv::Sense sense);

// min and max of  coeffs . y_t + c0  over x in store.input(). Fixes every
// activation pattern of the ReLUs (layers < t) that a private interval pass
// leaves unstable, then optimizes the resulting LP in x by vertex enumeration.
struct PatternResult {
    bool feasible = false;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> argmin, argmax;
    std::size_t patterns = 0;
};

PatternResult enumerate_patterns(const rhv::NetworkGraph &net, const rhv::BoundStore &store, int t,
                                 const std::vector<double> &coeffs, double c0);

// Independent forward pass: returns the pre-activations of every Gemm
// ordinal (index 0 = input).
std::vector<std::vector<double>> forward(const rhv::NetworkGraph &net, const std::vector<double> &x);

// Evaluates a VNN-LIB text directly: true iff every assertion holds at (x, y).
bool vnnlib_satisfied(const std::string &text, const std::vector<double> &x, const std::vector<double> &y);

// Calls fn on every point of a regular grid with `per_dim` points per axis.
void grid_points(const rhv::IntervalVector &box, int per_dim, const std::function<void(const std::vector<double> &)> &fn);

} // namespace oracle
