#include "rhv/interval.hpp"

#include "rhv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rhv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

const char *to_string(NeuronState state)
{
    switch (state) {
    case NeuronState::Inactive: return "Inactive";
    case NeuronState::Active: return "Active";
    case NeuronState::Unstabilized: return "Unstabilized";
    }
    return "?";
}

NeuronState classify(const Interval &iv)
{
    if (iv.hi <= 0.0)
        return NeuronState::Inactive;
    if (iv.lo >= 0.0)
        return NeuronState::Active;
    return NeuronState::Unstabilized;
}

Interval intersect(const Interval &a, const Interval &b)
{
    Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
    if (r.lo > r.hi) {
        if (r.lo - r.hi > kCrossingTolerance * (1.0 + std::abs(r.lo))) {
            std::ostringstream os;
            os << "empty intersection [" << a.lo << ", " << a.hi << "] & [" << b.lo << ", " << b.hi << "]";
            throw Error(ErrorKind::InfeasibleBounds, os.str());
        }
        // Rounding-level crossing: keep the segment between the two ends, which
        // lies inside both originals' hull.
        std::swap(r.lo, r.hi);
    }
    return r;
}

BoundStore::BoundStore(const NetworkGraph &net, IntervalVector input_box)
{
    if (input_box.size() != net.input_dim()) {
        std::ostringstream os;
        os << "input box has " << input_box.size() << " entries, network expects " << net.input_dim();
        throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    for (std::size_t k = 0; k < input_box.size(); ++k)
        if (!(input_box[k].lo <= input_box[k].hi))
            throw Error(ErrorKind::InfeasibleBounds, "input box is empty in coordinate " + std::to_string(k));

    const int L = net.num_gemms();
    pre_.resize(L + 1);
    post_.resize(L + 1);
    has_relu_.assign(L + 1, false);
    post_[0] = std::move(input_box);
    for (int i = 1; i <= L; ++i) {
        pre_[i].assign(net.width(i), Interval{-kInf, kInf});
        has_relu_[i] = net.has_relu(i);
        if (has_relu_[i])
            post_[i].assign(net.width(i), Interval{0.0, kInf});
    }
}

const IntervalVector &BoundStore::post(int ordinal) const
{
    if (ordinal < 0 || ordinal > num_gemms() || (ordinal > 0 && !has_relu_[ordinal]))
        throw Error(ErrorKind::InvalidWindow, "no post-activation bounds for layer " + std::to_string(ordinal));
    return post_[ordinal];
}

void BoundStore::refresh_post(int ordinal, std::size_t neuron)
{
    if (!has_relu_[ordinal])
        return;
    const auto &y = pre_[ordinal][neuron];
    post_[ordinal][neuron] = Interval{std::max(y.lo, 0.0), std::max(y.hi, 0.0)};
}

void BoundStore::tighten_pre(int ordinal, std::size_t neuron, Interval iv)
{
    auto &slot = pre_.at(ordinal).at(neuron);
    slot = intersect(slot, iv);
    refresh_post(ordinal, neuron);
}

void BoundStore::tighten_pre(int ordinal, const IntervalVector &ivs)
{
    if (ivs.size() != pre_.at(ordinal).size())
        throw Error(ErrorKind::DimensionMismatch, "bound vector width differs for layer " + std::to_string(ordinal));
    for (std::size_t k = 0; k < ivs.size(); ++k)
        tighten_pre(ordinal, k, ivs[k]);
}

void BoundStore::tighten_input(const IntervalVector &ivs)
{
    if (ivs.size() != post_[0].size())
        throw Error(ErrorKind::DimensionMismatch, "input bound width differs");
    for (std::size_t k = 0; k < ivs.size(); ++k)
        post_[0][k] = intersect(post_[0][k], ivs[k]);
}

bool BoundStore::contains(const BoundStore &other) const
{
    if (other.pre_.size() != pre_.size())
        return false;
    auto inside = [](const IntervalVector &outer, const IntervalVector &inner) {
        if (outer.size() != inner.size())
            return false;
        for (std::size_t k = 0; k < outer.size(); ++k)
            if (!outer[k].contains(inner[k]))
                return false;
        return true;
    };
    for (std::size_t i = 0; i < pre_.size(); ++i)
        if (!inside(pre_[i], other.pre_[i]) || !inside(post_[i], other.post_[i]))
            return false;
    return true;
}

IntervalVector gemm_interval(const Matrix &weights, std::span<const double> bias, const IntervalVector &input)
{
    if (weights.cols != input.size() || weights.rows != bias.size()) {
        std::ostringstream os;
        os << "Gemm " << weights.rows << "x" << weights.cols << " with " << bias.size() << " biases applied to "
           << input.size() << " inputs";
        throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    IntervalVector out(weights.rows);
    for (std::size_t r = 0; r < weights.rows; ++r) {
        double lo = bias[r];
        double hi = bias[r];
        const auto row = weights.row(r);
        for (std::size_t c = 0; c < weights.cols; ++c) {
            const double w = row[c];
            if (w > 0.0) {
                lo += w * input[c].lo;
                hi += w * input[c].hi;
            } else if (w < 0.0) {
                lo += w * input[c].hi;
                hi += w * input[c].lo;
            }
        }
        out[r] = Interval{lo, hi};
    }
    return out;
}

IntervalVector gemm_input_box(const NetworkGraph &net, const BoundStore &store, int ordinal)
{
    IntervalVector box;
    box.reserve(net.gemm(ordinal).weights.cols);
    for (int src : net.gemm_sources(ordinal)) {
        const auto &part = store.post(src);
        box.insert(box.end(), part.begin(), part.end());
    }
    return box;
}

BoundStore ibp_forward(const NetworkGraph &net, const IntervalVector &input_box, IbpOptions options)
{
    BoundStore store(net, input_box);
    for (int i = 1; i <= net.num_gemms(); ++i) {
        const auto &layer = net.gemm(i);
        auto out = gemm_interval(layer.weights, layer.bias, gemm_input_box(net, store, i));
        if (options.inflation > 0.0)
            for (auto &iv : out) {
                iv.lo -= options.inflation;
                iv.hi += options.inflation;
            }
        store.tighten_pre(i, out);
    }
    return store;
}

LayerValues forward_eval(const NetworkGraph &net, std::span<const double> x0)
{
    if (x0.size() != net.input_dim()) {
        std::ostringstream os;
        os << "input has " << x0.size() << " entries, network expects " << net.input_dim();
        throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    const int L = net.num_gemms();
    LayerValues v;
    v.pre.resize(L + 1);
    v.post.resize(L + 1);
    v.post[0].assign(x0.begin(), x0.end());
    std::vector<double> in;
    for (int i = 1; i <= L; ++i) {
        in.clear();
        for (int src : net.gemm_sources(i))
            in.insert(in.end(), v.post[src].begin(), v.post[src].end());
        const auto &layer = net.gemm(i);
        auto &y = v.pre[i];
        y.assign(layer.bias.begin(), layer.bias.end());
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            const auto row = layer.weights.row(r);
            for (std::size_t c = 0; c < row.size(); ++c)
                y[r] += row[c] * in[c];
        }
        if (net.has_relu(i)) {
            v.post[i].resize(y.size());
            std::transform(y.begin(), y.end(), v.post[i].begin(), [](double a) { return std::max(a, 0.0); });
        }
    }
    return v;
}

} // namespace rhv
