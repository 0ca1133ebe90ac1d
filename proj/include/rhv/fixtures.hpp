#pragma once

#include "rhv/interval.hpp"
#include "rhv/model_graph.hpp"
#include "rhv/parsers.hpp"

#include <cstdint>
#include <random>

namespace rhv {

// The 2-2-1 network y = (x1 + x2, x1 - x2), w = relu(y1) + relu(y2) over
// [-1, 1] x [0, 1].
NetworkGraph toy_network();
IntervalVector toy_box();

struct FixtureOptions {
    int max_gemms = 3;      // including the output layer
    int min_gemms = 2;
    int max_width = 6;
    int max_inputs = 4;
    int max_outputs = 3;
    int max_unstable = 8;   // under interval bounds
    bool skip_connections = false;
    double weight_scale = 1.0;
};

struct Fixture {
    std::uint64_t seed = 0;
    NetworkGraph net;
    PropertySpec property;  // property.input_box is the fixture's input region
};

// Dense feed-forward network with the given layer widths (last = outputs),
// weights uniform in [-scale, scale], biases in [-scale/2, scale/2].
NetworkGraph random_network(std::mt19937_64 &rng, std::size_t inputs, const std::vector<std::size_t> &widths,
                            double scale = 1.0, bool skip_connections = false);

// Reproducible small instance: resamples until the interval bounds leave at
// most max_unstable unstable ReLUs. The property mixes holding and violated
// clauses; thresholds come from sampled outputs.
Fixture random_fixture(std::uint64_t seed, const FixtureOptions &options = {});

// One or two clauses of one or two atoms over the outputs.
PropertySpec random_property(std::mt19937_64 &rng, const NetworkGraph &net, const IntervalVector &box);

// A fixed-shape chain of `gemms` Gemm layers, each hidden layer `width` wide.
NetworkGraph chain_network(std::uint64_t seed, int gemms, std::size_t inputs, std::size_t width,
                           std::size_t outputs);

// Uniform point in a box.
std::vector<double> sample_box(std::mt19937_64 &rng, const IntervalVector &box);

} // namespace rhv
