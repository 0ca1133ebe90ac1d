#include "rhv/model_graph.hpp"

#include "rhv/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace rhv {

Matrix Matrix::from_rows(const std::vector<std::vector<double>> &rows)
{
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.empty() ? 0 : rows.front().size();
    m.values.reserve(m.rows * m.cols);
    for (const auto &r : rows) {
        if (r.size() != m.cols)
            throw Error(ErrorKind::DimensionMismatch, "ragged weight matrix rows");
        m.values.insert(m.values.end(), r.begin(), r.end());
    }
    return m;
}

const char *to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::Input: return "Input";
    case LayerKind::Gemm: return "Gemm";
    case LayerKind::ReLU: return "ReLU";
    }
    return "?";
}

namespace {

std::string layer_name(const LayerSpec &spec)
{
    std::ostringstream os;
    os << to_string(spec.kind) << " layer " << spec.id;
    return os.str();
}

} // namespace

const LayerSpec &NetworkGraph::layer(int id) const
{
    if (id < 0 || static_cast<std::size_t>(id) >= position_.size() ||
        position_[id] == static_cast<std::size_t>(-1))
        throw Error(ErrorKind::DanglingReference, "no layer with id " + std::to_string(id));
    return layers_[position_[id]];
}

int NetworkGraph::gemm_layer_id(int ordinal) const
{
    if (ordinal < 1 || ordinal > num_gemms())
        throw Error(ErrorKind::InvalidWindow, "Gemm ordinal " + std::to_string(ordinal) + " out of range");
    return gemm_ids_[ordinal - 1];
}

std::size_t NetworkGraph::width(int ordinal) const
{
    if (ordinal == 0)
        return input_dim_;
    return gemm(ordinal).weights.rows;
}

bool NetworkGraph::has_relu(int ordinal) const
{
    return relu_layer_id(ordinal) >= 0;
}

int NetworkGraph::relu_layer_id(int ordinal) const
{
    gemm_layer_id(ordinal);
    return relu_of_gemm_[ordinal - 1];
}

const std::vector<int> &NetworkGraph::gemm_sources(int ordinal) const
{
    gemm_layer_id(ordinal);
    return sources_[ordinal - 1];
}

bool NetworkGraph::is_sequential() const
{
    for (int i = 1; i <= num_gemms(); ++i) {
        const auto &src = sources_[i - 1];
        if (src.size() != 1 || src.front() != i - 1)
            return false;
    }
    return true;
}

NetworkGraph build_graph(std::vector<LayerSpec> specs, std::size_t input_dim)
{
    if (specs.empty())
        throw Error(ErrorKind::InvalidLayer, "network has no layers");
    if (input_dim == 0)
        throw Error(ErrorKind::DimensionMismatch, "input dimension must be positive");

    std::map<int, std::size_t> index_of;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].id < 0)
            throw Error(ErrorKind::InvalidLayer, "negative layer id " + std::to_string(specs[i].id));
        if (!index_of.emplace(specs[i].id, i).second)
            throw Error(ErrorKind::InvalidLayer, "duplicate layer id " + std::to_string(specs[i].id));
    }

    const auto input_count = std::count_if(specs.begin(), specs.end(),
                                           [](const LayerSpec &s) { return s.kind == LayerKind::Input; });
    if (input_count > 1)
        throw Error(ErrorKind::InvalidLayer, "more than one Input layer");
    if (input_count == 0) {
        if (index_of.count(0))
            throw Error(ErrorKind::InvalidLayer, "id 0 is reserved for the Input layer");
        LayerSpec input;
        input.id = 0;
        input.kind = LayerKind::Input;
        specs.insert(specs.begin(), input);
        index_of.clear();
        for (std::size_t i = 0; i < specs.size(); ++i)
            index_of.emplace(specs[i].id, i);
    }

    for (const auto &spec : specs) {
        if (spec.kind == LayerKind::Input) {
            if (spec.id != 0)
                throw Error(ErrorKind::InvalidLayer, "Input layer must have id 0");
            if (!spec.inputs.empty())
                throw Error(ErrorKind::InvalidLayer, "Input layer cannot have predecessors");
        }
        for (int in : spec.inputs)
            if (!index_of.count(in))
                throw Error(ErrorKind::DanglingReference,
                            layer_name(spec) + " references missing layer " + std::to_string(in));
    }

    // Kahn's algorithm; the ready set is keyed by the original list position
    // so the order is stable.
    const std::size_t n = specs.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> consumers(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<int> distinct(specs[i].inputs.begin(), specs[i].inputs.end());
        for (int in : distinct) {
            consumers[index_of[in]].push_back(i);
            ++indegree[i];
        }
    }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0)
            ready.insert(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (std::size_t c : consumers[i])
            if (--indegree[c] == 0)
                ready.insert(c);
    }
    if (order.size() != n)
        throw Error(ErrorKind::CycleDetected, "layer dependencies contain a cycle");

    NetworkGraph g;
    g.input_dim_ = input_dim;
    g.layers_.reserve(n);
    for (std::size_t i : order)
        g.layers_.push_back(std::move(specs[i]));
    const int max_id = g.layers_.empty() ? 0 : std::max_element(g.layers_.begin(), g.layers_.end(),
                                                                 [](const LayerSpec &a, const LayerSpec &b) {
                                                                     return a.id < b.id;
                                                                 })->id;
    g.position_.assign(static_cast<std::size_t>(max_id) + 1, static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < g.layers_.size(); ++i)
        g.position_[g.layers_[i].id] = i;

    std::map<int, std::size_t> dim;
    std::map<int, int> ordinal_of;     // Gemm layer id -> ordinal
    std::map<int, int> relu_source;    // ReLU layer id -> Gemm ordinal
    std::map<int, int> relu_count;     // Gemm layer id -> consuming ReLUs
    std::map<int, int> relu_uses;      // ReLU layer id -> consuming Gemms
    for (const auto &spec : g.layers_) {
        switch (spec.kind) {
        case LayerKind::Input:
            dim[spec.id] = input_dim;
            break;
        case LayerKind::ReLU: {
            if (spec.inputs.size() != 1)
                throw Error(ErrorKind::InvalidLayer, layer_name(spec) + " must have exactly one predecessor");
            const auto &pred = g.layer(spec.inputs.front());
            if (pred.kind != LayerKind::Gemm)
                throw Error(ErrorKind::InvalidLayer, layer_name(spec) + " must follow a Gemm layer");
            if (spec.weights.rows != 0 || spec.weights.cols != 0 || !spec.bias.empty())
                throw Error(ErrorKind::InvalidLayer, layer_name(spec) + " cannot carry parameters");
            if (++relu_count[pred.id] > 1)
                throw Error(ErrorKind::InvalidLayer, layer_name(pred) + " feeds more than one ReLU");
            dim[spec.id] = dim[pred.id];
            relu_source[spec.id] = ordinal_of[pred.id];
            relu_uses[spec.id] = 0;
            break;
        }
        case LayerKind::Gemm: {
            if (spec.inputs.empty())
                throw Error(ErrorKind::InvalidLayer, layer_name(spec) + " has no predecessors");
            std::size_t in_dim = 0;
            std::vector<int> sources;
            for (int in : spec.inputs) {
                const auto &pred = g.layer(in);
                if (pred.kind == LayerKind::Gemm)
                    throw Error(ErrorKind::InvalidLayer,
                                layer_name(spec) + " reads Gemm layer " + std::to_string(in) +
                                    " directly; insert the ReLU it feeds");
                in_dim += dim[pred.id];
                if (pred.kind == LayerKind::Input) {
                    sources.push_back(0);
                } else {
                    sources.push_back(relu_source[pred.id]);
                    ++relu_uses[pred.id];
                }
            }
            if (spec.weights.rows == 0)
                throw Error(ErrorKind::DimensionMismatch, layer_name(spec) + " has an empty weight matrix");
            if (spec.weights.values.size() != spec.weights.rows * spec.weights.cols)
                throw Error(ErrorKind::DimensionMismatch, layer_name(spec) + " weight storage is inconsistent");
            if (spec.weights.cols != in_dim) {
                std::ostringstream os;
                os << layer_name(spec) << " has " << spec.weights.cols << " weight columns but its inputs provide "
                   << in_dim;
                throw Error(ErrorKind::DimensionMismatch, os.str());
            }
            if (spec.bias.size() != spec.weights.rows) {
                std::ostringstream os;
                os << layer_name(spec) << " has " << spec.weights.rows << " weight rows but " << spec.bias.size()
                   << " bias entries";
                throw Error(ErrorKind::DimensionMismatch, os.str());
            }
            dim[spec.id] = spec.weights.rows;
            g.gemm_ids_.push_back(spec.id);
            ordinal_of[spec.id] = static_cast<int>(g.gemm_ids_.size());
            g.sources_.push_back(std::move(sources));
            break;
        }
        }
    }

    if (g.gemm_ids_.empty())
        throw Error(ErrorKind::InvalidLayer, "network has no Gemm layer");
    for (const auto &[relu, uses] : relu_uses)
        if (uses == 0)
            throw Error(ErrorKind::InvalidLayer, "ReLU layer " + std::to_string(relu) + " has no consumer");

    int outputs = 0;
    for (int id : g.gemm_ids_) {
        int relu = -1;
        for (const auto &[rid, src] : relu_source)
            if (g.gemm_ids_[src - 1] == id)
                relu = rid;
        g.relu_of_gemm_.push_back(relu);
        if (relu < 0)
            ++outputs;
    }
    if (outputs != 1)
        throw Error(ErrorKind::InvalidLayer, "network must end in exactly one Gemm layer without a ReLU");
    if (g.relu_of_gemm_.back() >= 0)
        throw Error(ErrorKind::InvalidLayer, "the output Gemm layer must be last in topological order");
    return g;
}

namespace {

// Ancestors-or-self of Gemm t (ordinals >= 1).
std::vector<bool> ancestors_of(const NetworkGraph &net, int t)
{
    std::vector<bool> seen(static_cast<std::size_t>(net.num_gemms()) + 1, false);
    std::deque<int> queue{t};
    seen[t] = true;
    while (!queue.empty()) {
        const int g = queue.front();
        queue.pop_front();
        for (int src : net.gemm_sources(g))
            if (src > 0 && !seen[src]) {
                seen[src] = true;
                queue.push_back(src);
            }
    }
    return seen;
}

WindowSubGraph assemble(const NetworkGraph &net, int t, const std::vector<bool> &included)
{
    WindowSubGraph win;
    win.t = t;
    std::set<int> entries;
    for (int g = 1; g <= t; ++g) {
        if (!included[g])
            continue;
        win.gemms.push_back(g);
        for (int src : net.gemm_sources(g))
            if (src == 0 || !included[src])
                entries.insert(src);
    }
    for (int g : win.gemms) {
        win.layers.push_back(net.gemm_layer_id(g));
        if (g != t)
            win.layers.push_back(net.relu_layer_id(g));
    }
    win.entry_vars.assign(entries.begin(), entries.end());
    win.s = win.entry_vars.empty() ? 0 : win.entry_vars.front();
    return win;
}

} // namespace

WindowSubGraph extract_window(const NetworkGraph &net, int s, int t)
{
    if (s < 0 || s >= t || t > net.num_gemms()) {
        std::ostringstream os;
        os << "window (" << s << ", " << t << ") is not within 0 <= s < t <= " << net.num_gemms();
        throw Error(ErrorKind::InvalidWindow, os.str());
    }
    auto included = ancestors_of(net, t);
    for (int g = 1; g <= s; ++g)
        included[g] = false;
    auto win = assemble(net, t, included);
    if (net.is_sequential())
        win.s = s;
    return win;
}

WindowSubGraph bfs_window(const NetworkGraph &net, int t, int horizon)
{
    if (horizon < 1)
        throw Error(ErrorKind::InvalidWindow, "horizon length must be at least 1");
    if (t < 1 || t > net.num_gemms())
        throw Error(ErrorKind::InvalidWindow, "target Gemm ordinal " + std::to_string(t) + " out of range");

    const auto reach = ancestors_of(net, t);
    // longest[g]: most Gemm layers on any path from g to t, counting both ends.
    std::vector<int> longest(reach.size(), 0);
    longest[t] = 1;
    for (int g = t; g >= 1; --g) {
        if (!reach[g] || longest[g] == 0)
            continue;
        for (int src : net.gemm_sources(g))
            if (src > 0)
                longest[src] = std::max(longest[src], longest[g] + 1);
    }
    std::vector<bool> included(reach.size(), false);
    for (int g = 1; g <= t; ++g)
        included[g] = reach[g] && longest[g] <= horizon;
    return assemble(net, t, included);
}

} // namespace rhv
