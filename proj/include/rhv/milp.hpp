#pragma once

#include "rhv/interval.hpp"
#include "rhv/lp.hpp"
#include "rhv/model_graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rhv {

enum class ReluPhase { Unstable, Active, Inactive };

// One big-M link group: x >= 0, x >= y, x <= y - lo (1 - z), x <= hi z.
struct ReluBlock {
    int y_var = -1;
    int x_var = -1;
    int z_var = -1;
    double lo = 0.0;
    double hi = 0.0;
    int layer = 0;   // Gemm ordinal
    int neuron = 0;
};

// Forward recipe for one pre-activation variable: y = bias + sum(terms), then
// the ReLU that follows it (if inside the window).
struct EvalStep {
    int y_var = -1;
    SparseRow terms;
    double bias = 0.0;
    bool has_relu = false;
    ReluPhase phase = ReluPhase::Unstable;
    int x_var = -1;
    int z_var = -1;
};

// Linear function of the target layer's pre-activations: sum(coef * y_t[k]) + constant.
struct LinearForm {
    SparseRow terms;  // (neuron index, coefficient)
    double constant = 0.0;
};

struct MilpProblem {
    LinearProgram lp;  // binaries relaxed to [0, 1]; integrality is carried by `binaries`
    std::vector<ReluBlock> relu_blocks;
    std::vector<int> binaries;
    std::vector<int> entry_vars;  // window input variables, entry ordinals ascending
    std::vector<EvalStep> eval;   // topological
    std::vector<std::vector<int>> y_vars;  // by Gemm ordinal; empty outside the window
    int target = 0;
};

// Big-M model of a window: Gemm equality rows, stored boxes on every window
// variable, one block per unstable ReLU. Stabilized ReLUs are substituted.
// Throws UnboundedVariable when a window variable has an infinite bound.
MilpProblem encode_window(const NetworkGraph &net, const WindowSubGraph &win, const BoundStore &bounds,
                          const LinearForm &objective);

// Adds the row form(y_t) `rel` rhs.
void add_target_constraint(MilpProblem &mip, const LinearForm &form, Relation rel, double rhs);

LinearProgram lp_relax(const MilpProblem &mip, Sense sense = Sense::Minimize);

struct Incumbent {
    double value = 0.0;
    std::vector<double> point;  // every LP variable
};

// Clamps the entry components of `relaxed` into their boxes, propagates them
// through the window exactly and scores the objective. Returns nothing if the
// propagated point violates a stored box or extra row.
std::optional<Incumbent> rounding_incumbent(const MilpProblem &mip, const std::vector<double> &relaxed);

enum class BnbStatus { Optimal, Infeasible, CutoffPruned, EarlyStopped, TimeLimit };

const char *to_string(BnbStatus status);

enum class EarlyStop { None, ThresholdAtZero };

struct BnbControls {
    // Nodes whose relaxation cannot beat this value are pruned.
    std::optional<double> cutoff;
    // Stops once the global dual bound proves the objective's sign
    // (max: <= 0, min: >= 0).
    EarlyStop early_stop = EarlyStop::None;
    double time_limit_s = kInfinity;
    std::size_t node_limit = static_cast<std::size_t>(-1);
    double gap = 1e-6;
    double integrality = 1e-6;
    bool trace = false;
    LpLimits lp;
};

struct NodeTrace {
    std::size_t id = 0;
    std::size_t parent = 0;
    std::size_t depth = 0;
    std::optional<double> bound;  // raw node LP value in the problem's sense
    std::string action;
};

struct BnbResult {
    BnbStatus status = BnbStatus::Infeasible;
    std::optional<double> incumbent_value;
    std::optional<std::vector<double>> incumbent_point;  // entry variable values
    double dual_bound = 0.0;
    std::optional<double> root_bound;
    std::size_t nodes_explored = 0;
    double wall_time = 0.0;
    std::vector<NodeTrace> trace;
};

// Best-first branch-and-bound over LP relaxations. Branches on the most
// fractional binary (ties: widest block, then lowest block index).
BnbResult branch_and_bound(const MilpProblem &mip, Sense sense, const BnbControls &controls = {});

} // namespace rhv
