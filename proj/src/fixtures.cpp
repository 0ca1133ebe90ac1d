#include "rhv/fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace rhv {

NetworkGraph toy_network()
{
    std::vector<LayerSpec> specs(4);
    specs[0] = {0, LayerKind::Input, {}, {}, {}};
    specs[1] = {1, LayerKind::Gemm, Matrix::from_rows({{1.0, 1.0}, {1.0, -1.0}}), {0.0, 0.0}, {0}};
    specs[2] = {2, LayerKind::ReLU, {}, {}, {1}};
    specs[3] = {3, LayerKind::Gemm, Matrix::from_rows({{1.0, 1.0}}), {0.0}, {2}};
    return build_graph(std::move(specs), 2);
}

IntervalVector toy_box()
{
    return {{-1.0, 1.0}, {0.0, 1.0}};
}

std::vector<double> sample_box(std::mt19937_64 &rng, const IntervalVector &box)
{
    std::vector<double> x(box.size());
    for (std::size_t k = 0; k < box.size(); ++k) {
        std::uniform_real_distribution<double> d(box[k].lo, box[k].hi);
        x[k] = box[k].lo == box[k].hi ? box[k].lo : d(rng);
    }
    return x;
}

NetworkGraph random_network(std::mt19937_64 &rng, std::size_t inputs, const std::vector<std::size_t> &widths,
                            double scale, bool skip_connections)
{
    std::uniform_real_distribution<double> w(-scale, scale);
    std::uniform_real_distribution<double> b(-scale / 2.0, scale / 2.0);
    std::bernoulli_distribution coin(0.5);

    std::vector<LayerSpec> specs;
    specs.push_back({0, LayerKind::Input, {}, {}, {}});
    // (layer id, width) of every post-activation source built so far
    std::vector<std::pair<int, std::size_t>> sources{{0, inputs}};
    int next_id = 1;
    for (std::size_t g = 0; g < widths.size(); ++g) {
        std::vector<int> in_ids{sources.back().first};
        std::size_t in_width = sources.back().second;
        if (skip_connections && sources.size() > 1 && coin(rng)) {
            std::uniform_int_distribution<std::size_t> pick(0, sources.size() - 2);
            const auto extra = sources[pick(rng)];
            in_ids.insert(in_ids.begin(), extra.first);
            in_width += extra.second;
        }
        Matrix m(widths[g], in_width);
        for (auto &v : m.values)
            v = w(rng);
        std::vector<double> bias(widths[g]);
        for (auto &v : bias)
            v = b(rng);
        const int gemm_id = next_id++;
        specs.push_back({gemm_id, LayerKind::Gemm, std::move(m), std::move(bias), in_ids});
        if (g + 1 < widths.size()) {
            const int relu_id = next_id++;
            specs.push_back({relu_id, LayerKind::ReLU, {}, {}, {gemm_id}});
            sources.emplace_back(relu_id, widths[g]);
        }
    }
    return build_graph(std::move(specs), inputs);
}

NetworkGraph chain_network(std::uint64_t seed, int gemms, std::size_t inputs, std::size_t width, std::size_t outputs)
{
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> widths(static_cast<std::size_t>(gemms), width);
    widths.back() = outputs;
    return random_network(rng, inputs, widths, 1.0, false);
}

namespace {

std::size_t count_unstable(const BoundStore &store)
{
    std::size_t n = 0;
    for (int i = 1; i <= store.num_gemms(); ++i)
        if (store.has_relu(i))
            for (const auto &iv : store.pre(i))
                n += classify(iv) == NeuronState::Unstabilized;
    return n;
}

OutputAtom random_atom(std::mt19937_64 &rng, const NetworkGraph &net, const IntervalVector &box)
{
    const std::size_t m = net.width(net.num_gemms());
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    OutputAtom atom;
    atom.coeffs.assign(m, 0.0);
    // Either a single output or a difference of two (margin-style).
    std::uniform_int_distribution<std::size_t> idx(0, m - 1);
    const std::size_t a = idx(rng);
    if (m > 1 && std::bernoulli_distribution(0.5)(rng)) {
        std::size_t c = idx(rng);
        if (c == a)
            c = (a + 1) % m;
        atom.coeffs[a] = 1.0;
        atom.coeffs[c] = -1.0;
    } else {
        atom.coeffs[a] = std::round(coef(rng) * 100.0) / 100.0;
        if (atom.coeffs[a] == 0.0)
            atom.coeffs[a] = 1.0;
    }
    atom.relation = std::bernoulli_distribution(0.5)(rng) ? Relation::LessEq : Relation::GreaterEq;

    // Threshold near the sampled extreme so that roughly half the instances
    // are violated and half hold.
    double lo = kInfinity, hi = -kInfinity;
    for (int s = 0; s < 64; ++s) {
        const auto x = sample_box(rng, box);
        const auto y = forward_eval(net, x).output();
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            v += atom.coeffs[j] * y[j];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = std::max(hi - lo, 1e-3);
    std::uniform_real_distribution<double> shift(-0.4, 0.3);
    // a.y <= c is violated by small a.y; a.y >= c by large a.y.
    atom.rhs = atom.relation == Relation::LessEq ? lo + shift(rng) * span : hi - shift(rng) * span;
    atom.rhs = std::round(atom.rhs * 1e4) / 1e4;
    return atom;
}

} // namespace

PropertySpec random_property(std::mt19937_64 &rng, const NetworkGraph &net, const IntervalVector &box)
{
    PropertySpec prop;
    prop.input_box = box;
    prop.num_outputs = net.width(net.num_gemms());
    const int clauses = std::bernoulli_distribution(0.25)(rng) ? 2 : 1;
    for (int c = 0; c < clauses; ++c) {
        ViolationClause clause;
        const int atoms = std::bernoulli_distribution(0.2)(rng) ? 2 : 1;
        for (int a = 0; a < atoms; ++a)
            clause.atoms.push_back(random_atom(rng, net, box));
        prop.clauses.push_back(std::move(clause));
    }
    return prop;
}

Fixture random_fixture(std::uint64_t seed, const FixtureOptions &options)
{
    std::mt19937_64 rng(seed);
    Fixture fx;
    fx.seed = seed;
    std::uniform_int_distribution<int> depth(options.min_gemms, options.max_gemms);
    std::uniform_int_distribution<std::size_t> width(1, static_cast<std::size_t>(options.max_width));
    std::uniform_int_distribution<std::size_t> in_dim(1, static_cast<std::size_t>(options.max_inputs));
    std::uniform_int_distribution<std::size_t> out_dim(1, static_cast<std::size_t>(options.max_outputs));
    std::uniform_real_distribution<double> centre(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(0.05, 1.0);

    for (;;) {
        const int L = depth(rng);
        const std::size_t n0 = in_dim(rng);
        std::vector<std::size_t> widths;
        for (int i = 1; i < L; ++i)
            widths.push_back(width(rng));
        widths.push_back(out_dim(rng));
        NetworkGraph net = random_network(rng, n0, widths, options.weight_scale, options.skip_connections);
        IntervalVector box(n0);
        for (auto &iv : box) {
            const double c = std::round(centre(rng) * 100.0) / 100.0;
            const double r = std::round(radius(rng) * 100.0) / 100.0;
            iv = {c - r, c + r};
        }
        if (count_unstable(ibp_forward(net, box)) > static_cast<std::size_t>(options.max_unstable))
            continue;
        fx.net = std::move(net);
        fx.property = random_property(rng, fx.net, box);
        return fx;
    }
}

} // namespace rhv
