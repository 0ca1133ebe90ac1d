#pragma once

#include "rhv/interval.hpp"
#include "rhv/milp.hpp"
#include "rhv/model_graph.hpp"

#include <utility>
#include <vector>

namespace rhv {

struct HorizonSequence {
    std::vector<std::pair<int, int>> pairs;  // (s, t), strictly increasing t
    int horizon = 1;

    bool operator==(const HorizonSequence &) const = default;
};

// One pair per Gemm layer t >= 2 that feeds a ReLU, with s = max(0, t - H).
// Layer 1 is left to interval propagation, which is already exact there.
// `include_output` appends a final pair ending at the output layer.
HorizonSequence horizon_sequence(const NetworkGraph &net, int horizon, bool include_output = false);

struct ObbtConfig {
    int horizon = 2;
    double per_instance_time_limit_s = 30.0;
    bool early_stop = true;
    unsigned workers = 1;
    bool tighten_output = false;
    double total_time_limit_s = kInfinity;
    std::size_t node_limit = static_cast<std::size_t>(-1);
};

struct NeuronBound {
    double bound = 0.0;
    BnbStatus status = BnbStatus::Optimal;
    std::size_t nodes = 0;
};

// Solves max or min of y_t[neuron] over the window model built from
// `snapshot`. The returned bound is the search's dual bound, valid whatever
// the termination status. Throws InfeasibleBounds if the window is empty.
NeuronBound obbt_neuron(const NetworkGraph &net, const WindowSubGraph &win, const BoundStore &snapshot, int neuron,
                        Sense sense, const BnbControls &controls);

struct ObbtSummary {
    std::vector<std::pair<int, int>> windows;
    std::size_t subproblems = 0;
    std::size_t skipped = 0;        // neurons already stabilized
    std::size_t optimal = 0;
    std::size_t early_stopped = 0;
    std::size_t time_limited = 0;
    bool budget_exhausted = false;  // total time limit cut the sequence short
    double wall_time = 0.0;
};

struct TighteningResult {
    BoundStore bounds;
    ObbtSummary summary;
};

// Rolling-horizon tightening: interval bounds first, then for each window in
// sequence order every unstable neuron of the target layer is maximized and
// minimized against one frozen snapshot on the worker pool. Results are
// intersected into the store after the whole layer finishes.
TighteningResult obbt_rh(const NetworkGraph &net, const IntervalVector &input_box, const ObbtConfig &config);

// Same schedule with full-depth windows, bounding each neuron by the LP
// relaxation of its window model only.
TighteningResult lp_tighten(const NetworkGraph &net, const IntervalVector &input_box, const ObbtConfig &config);

} // namespace rhv
