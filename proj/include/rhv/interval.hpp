#pragma once

#include "rhv/model_graph.hpp"

#include <span>
#include <string>
#include <vector>

namespace rhv {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    bool contains(const Interval &other) const { return other.lo >= lo && other.hi <= hi; }
    bool operator==(const Interval &) const = default;
};

using IntervalVector = std::vector<Interval>;

enum class NeuronState { Inactive, Active, Unstabilized };

const char *to_string(NeuronState state);

// Inactive when hi <= 0, Active when lo >= 0, otherwise Unstabilized.
NeuronState classify(const Interval &iv);

inline bool is_stabilized(NeuronState s) { return s != NeuronState::Unstabilized; }

// Per-layer pre-activation and post-activation boxes. Bounds only ever shrink:
// every update is an intersection, and the post-activation box of a ReLU layer
// is always derived from its pre-activation box.
class BoundStore {
public:
    BoundStore() = default;
    BoundStore(const NetworkGraph &net, IntervalVector input_box);

    int num_gemms() const { return static_cast<int>(pre_.size()) - 1; }
    bool has_relu(int ordinal) const { return has_relu_.at(ordinal); }

    const IntervalVector &input() const { return post_.front(); }
    const IntervalVector &pre(int ordinal) const { return pre_.at(ordinal); }
    // post(0) is the input box; post(i) exists for every Gemm i that feeds a ReLU.
    const IntervalVector &post(int ordinal) const;

    // Replaces an unset (infinite) layer or intersects with existing bounds.
    // Throws InfeasibleBounds when an intersection is empty.
    void tighten_pre(int ordinal, std::size_t neuron, Interval iv);
    void tighten_pre(int ordinal, const IntervalVector &ivs);
    void tighten_input(const IntervalVector &ivs);

    // Returns true if every interval of `other` lies inside this store's.
    bool contains(const BoundStore &other) const;

    bool operator==(const BoundStore &) const = default;

private:
    void refresh_post(int ordinal, std::size_t neuron);

    std::vector<IntervalVector> pre_;   // index 0 unused
    std::vector<IntervalVector> post_;  // index 0 = input
    std::vector<bool> has_relu_;
};

// Two intervals within this distance of crossing are treated as touching.
inline constexpr double kCrossingTolerance = 1e-9;

Interval intersect(const Interval &a, const Interval &b);

// y_lo = W+ in_lo + W- in_hi + b, y_hi = W+ in_hi + W- in_lo + b.
IntervalVector gemm_interval(const Matrix &weights, std::span<const double> bias,
                             const IntervalVector &input);

struct IbpOptions {
    // Symmetric widening applied to each propagated interval.
    double inflation = 0.0;
};

// Concatenated post-activation boxes feeding Gemm `ordinal`.
IntervalVector gemm_input_box(const NetworkGraph &net, const BoundStore &store, int ordinal);

BoundStore ibp_forward(const NetworkGraph &net, const IntervalVector &input_box, IbpOptions options = {});

// Exact forward pass. pre[i] and post[i] follow the store's indexing.
struct LayerValues {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;

    const std::vector<double> &output() const { return pre.back(); }
};

LayerValues forward_eval(const NetworkGraph &net, std::span<const double> x0);

} // namespace rhv
