#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rhv {

// Dense row-major matrix. Only what the network and the LP layers need.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>> &rows);

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double &operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }

    std::span<const double> row(std::size_t r) const
    {
        return {values.data() + r * cols, cols};
    }

    bool operator==(const Matrix &) const = default;
};

enum class LayerKind { Input, Gemm, ReLU };

const char *to_string(LayerKind kind);

struct LayerSpec {
    int id = 0;
    LayerKind kind = LayerKind::Gemm;
    Matrix weights;            // Gemm only: n_out x n_in
    std::vector<double> bias;  // Gemm only: n_out
    std::vector<int> inputs;   // predecessor layer ids, in column order

    bool operator==(const LayerSpec &) const = default;
};

// Validated, immutable network. Gemm layers are addressed by their ordinal
// i in 1..L (topological order); ordinal 0 denotes the network input. The
// post-activation vector x^(i) is the output of the ReLU following Gemm i.
class NetworkGraph {
public:
    const std::vector<LayerSpec> &layers() const { return layers_; }
    const LayerSpec &layer(int id) const;

    std::size_t input_dim() const { return input_dim_; }
    int num_gemms() const { return static_cast<int>(gemm_ids_.size()); }
    int output_layer() const { return gemm_ids_.back(); }

    int gemm_layer_id(int ordinal) const;
    const LayerSpec &gemm(int ordinal) const { return layer(gemm_layer_id(ordinal)); }

    // n_i; width(0) is the input dimension.
    std::size_t width(int ordinal) const;

    bool has_relu(int ordinal) const;
    // Layer id of the ReLU consuming Gemm `ordinal`, or -1 for the output layer.
    int relu_layer_id(int ordinal) const;

    // Post-activation sources of Gemm `ordinal` as ordinals (0 = input), in
    // the column order of its weight matrix.
    const std::vector<int> &gemm_sources(int ordinal) const;

    // True when Gemm i reads exactly x^(i-1) for every i.
    bool is_sequential() const;

    bool operator==(const NetworkGraph &) const = default;

private:
    friend NetworkGraph build_graph(std::vector<LayerSpec> specs, std::size_t input_dim);

    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> position_;      // layer id -> index in layers_
    std::size_t input_dim_ = 0;
    std::vector<int> gemm_ids_;              // ordinal-1 -> layer id
    std::vector<int> relu_of_gemm_;          // ordinal-1 -> relu layer id or -1
    std::vector<std::vector<int>> sources_;  // ordinal-1 -> source ordinals
};

// Validates the specs and returns the graph with layers in a stable
// topological order (ties keep the order the specs were given in). An Input
// layer with id 0 is synthesized when the specs omit it.
NetworkGraph build_graph(std::vector<LayerSpec> specs, std::size_t input_dim);

struct WindowSubGraph {
    int s = 0;                 // entry ordinal (smallest entry source)
    int t = 0;                 // target Gemm ordinal
    std::vector<int> gemms;    // included Gemm ordinals, ascending
    std::vector<int> layers;   // included layer ids in topological order
    std::vector<int> entry_vars; // ordinals whose x^(j) enter as boxed inputs

    bool operator==(const WindowSubGraph &) const = default;
};

// Window holding the Gemm layers s+1..t that lead to t, plus the ReLUs
// between them.
WindowSubGraph extract_window(const NetworkGraph &net, int s, int t);

// Backward breadth-first window: keeps every ancestor Gemm of t whose longest
// path to t contains at most `horizon` Gemm layers. Sources outside the
// window become boxed entry variables.
WindowSubGraph bfs_window(const NetworkGraph &net, int t, int horizon);

} // namespace rhv
