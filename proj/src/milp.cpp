#include "rhv/milp.hpp"

#include "rhv/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <sstream>

namespace rhv {

namespace {

std::string var_name(char prefix, int layer, std::size_t neuron)
{
    std::ostringstream os;
    os << prefix << layer << "_" << neuron;
    return os.str();
}

void require_finite(const Interval &iv, const std::string &name)
{
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw Error(ErrorKind::UnboundedVariable, "variable " + name + " has an infinite stored bound");
}

} // namespace

MilpProblem encode_window(const NetworkGraph &net, const WindowSubGraph &win, const BoundStore &bounds,
                          const LinearForm &objective)
{
    MilpProblem mip;
    mip.target = win.t;
    mip.y_vars.resize(static_cast<std::size_t>(net.num_gemms()) + 1);
    auto &lp = mip.lp;

    // post_ref[j][k]: variable carrying x^(j)_k, or -1 when it is the constant 0.
    std::vector<std::vector<int>> post_ref(mip.y_vars.size());
    for (int j : win.entry_vars) {
        const auto &box = bounds.post(j);
        for (std::size_t k = 0; k < box.size(); ++k) {
            const auto name = var_name('x', j, k);
            require_finite(box[k], name);
            const int v = lp.add_variable(name, box[k].lo, box[k].hi);
            post_ref[j].push_back(v);
            mip.entry_vars.push_back(v);
        }
    }

    for (int g : win.gemms) {
        const auto &layer = net.gemm(g);
        const auto &pre = bounds.pre(g);
        std::vector<int> column_vars;
        for (int src : net.gemm_sources(g))
            column_vars.insert(column_vars.end(), post_ref[src].begin(), post_ref[src].end());

        const bool relu_inside = g != win.t;
        for (std::size_t k = 0; k < layer.weights.rows; ++k) {
            const auto yname = var_name('y', g, k);
            require_finite(pre[k], yname);
            const int y = lp.add_variable(yname, pre[k].lo, pre[k].hi);
            mip.y_vars[g].push_back(y);

            EvalStep step;
            step.y_var = y;
            step.bias = layer.bias[k];
            const auto row = layer.weights.row(k);
            for (std::size_t c = 0; c < row.size(); ++c)
                if (row[c] != 0.0 && column_vars[c] >= 0)
                    step.terms.emplace_back(column_vars[c], row[c]);

            SparseRow eq{{y, 1.0}};
            for (const auto &[var, coef] : step.terms)
                eq.emplace_back(var, -coef);
            lp.add_constraint(std::move(eq), Relation::Equal, step.bias);

            if (relu_inside) {
                step.has_relu = true;
                switch (classify(pre[k])) {
                case NeuronState::Inactive:
                    step.phase = ReluPhase::Inactive;
                    post_ref[g].push_back(-1);
                    break;
                case NeuronState::Active:
                    step.phase = ReluPhase::Active;
                    step.x_var = y;
                    post_ref[g].push_back(y);
                    break;
                case NeuronState::Unstabilized: {
                    step.phase = ReluPhase::Unstable;
                    const auto &post = bounds.post(g)[k];
                    const int x = lp.add_variable(var_name('x', g, k), post.lo, post.hi);
                    const int z = lp.add_variable(var_name('z', g, k), 0.0, 1.0);
                    const double l = pre[k].lo;
                    const double u = pre[k].hi;
                    lp.add_constraint({{x, 1.0}, {y, -1.0}}, Relation::GreaterEq, 0.0);
                    lp.add_constraint({{x, 1.0}, {y, -1.0}, {z, -l}}, Relation::LessEq, -l);
                    lp.add_constraint({{x, 1.0}, {z, -u}}, Relation::LessEq, 0.0);
                    step.x_var = x;
                    step.z_var = z;
                    post_ref[g].push_back(x);
                    mip.binaries.push_back(z);
                    mip.relu_blocks.push_back({y, x, z, l, u, g, static_cast<int>(k)});
                    break;
                }
                }
            }
            mip.eval.push_back(std::move(step));
        }
    }

    for (const auto &[k, coef] : objective.terms) {
        if (k < 0 || static_cast<std::size_t>(k) >= mip.y_vars[win.t].size())
            throw Error(ErrorKind::DimensionMismatch, "objective references neuron " + std::to_string(k) +
                                                          " outside layer " + std::to_string(win.t));
        lp.objective.coeffs.emplace_back(mip.y_vars[win.t][k], coef);
    }
    lp.objective.constant = objective.constant;
    return mip;
}

void add_target_constraint(MilpProblem &mip, const LinearForm &form, Relation rel, double rhs)
{
    SparseRow row;
    for (const auto &[k, coef] : form.terms) {
        if (k < 0 || static_cast<std::size_t>(k) >= mip.y_vars[mip.target].size())
            throw Error(ErrorKind::DimensionMismatch, "constraint references neuron " + std::to_string(k) +
                                                          " outside the target layer");
        row.emplace_back(mip.y_vars[mip.target][k], coef);
    }
    mip.lp.add_constraint(std::move(row), rel, rhs - form.constant);
}

LinearProgram lp_relax(const MilpProblem &mip, Sense sense)
{
    LinearProgram lp = mip.lp;
    for (int z : mip.binaries) {
        lp.variables[z].lo = std::max(lp.variables[z].lo, 0.0);
        lp.variables[z].hi = std::min(lp.variables[z].hi, 1.0);
    }
    lp.objective.sense = sense;
    return lp;
}

std::optional<Incumbent> rounding_incumbent(const MilpProblem &mip, const std::vector<double> &relaxed)
{
    const auto &lp = mip.lp;
    if (relaxed.size() != lp.num_variables())
        return std::nullopt;
    std::vector<double> v(lp.num_variables(), 0.0);
    for (int e : mip.entry_vars)
        v[e] = std::clamp(relaxed[e], lp.variables[e].lo, lp.variables[e].hi);
    for (const auto &step : mip.eval) {
        double y = step.bias;
        for (const auto &[var, coef] : step.terms)
            y += coef * v[var];
        v[step.y_var] = y;
        if (step.has_relu && step.phase == ReluPhase::Unstable) {
            v[step.x_var] = std::max(y, 0.0);
            v[step.z_var] = y > 0.0 ? 1.0 : 0.0;
        }
    }
    double scale = 1.0;
    for (double a : v)
        scale = std::max(scale, std::abs(a));
    if (max_violation(lp, v) > 1e-7 * scale)
        return std::nullopt;
    Incumbent inc;
    inc.value = evaluate_objective(lp.objective, v);
    inc.point = std::move(v);
    return inc;
}

const char *to_string(BnbStatus status)
{
    switch (status) {
    case BnbStatus::Optimal: return "Optimal";
    case BnbStatus::Infeasible: return "Infeasible";
    case BnbStatus::CutoffPruned: return "CutoffPruned";
    case BnbStatus::EarlyStopped: return "EarlyStopped";
    case BnbStatus::TimeLimit: return "TimeLimit";
    }
    return "?";
}

namespace {

struct Node {
    std::size_t id = 0;
    std::size_t parent = 0;
    std::size_t depth = 0;
    double bound = -kInfinity;      // minimization form
    std::vector<signed char> fixed; // per binary: -1 free, 0 or 1
};

struct NodeOrder {
    bool operator()(const Node &a, const Node &b) const
    {
        if (a.bound != b.bound)
            return a.bound > b.bound;
        return a.id > b.id;
    }
};

// Everything below works on min(sign * objective).
class BranchAndBound {
public:
    BranchAndBound(const MilpProblem &mip, Sense sense, const BnbControls &controls)
        : mip_(mip)
        , controls_(controls)
        , sign_(sense == Sense::Minimize ? 1.0 : -1.0)
        , relaxed_(lp_relax(mip, Sense::Minimize))
    {
        for (auto &[var, coef] : relaxed_.objective.coeffs)
            coef *= sign_;
        relaxed_.objective.constant *= sign_;
        if (controls.cutoff)
            cutoff_ = sign_ * *controls.cutoff;
    }

    BnbResult run();

private:
    double global_dual() const
    {
        double d = std::min({incumbent_, cut_min_, gap_min_, unresolved_min_});
        if (!open_.empty())
            d = std::min(d, open_.top().bound);
        return d;
    }
    void offer(double value, const std::vector<double> &point)
    {
        if (value < incumbent_ && value < cutoff_) {
            incumbent_ = value;
            incumbent_point_.clear();
            for (int e : mip_.entry_vars)
                incumbent_point_.push_back(point[e]);
        }
    }
    void record(const Node &node, std::optional<double> bound, std::string action)
    {
        if (!controls_.trace)
            return;
        NodeTrace t;
        t.id = node.id;
        t.parent = node.parent;
        t.depth = node.depth;
        if (bound)
            t.bound = sign_ * *bound;
        t.action = std::move(action);
        result_.trace.push_back(std::move(t));
    }
    void branch(const Node &node, double bound, std::size_t which);
    BnbResult finish(BnbStatus status);

    const MilpProblem &mip_;
    const BnbControls &controls_;
    double sign_;
    LinearProgram relaxed_;
    double cutoff_ = kInfinity;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open_;
    double incumbent_ = kInfinity;
    std::vector<double> incumbent_point_;
    double cut_min_ = kInfinity;        // smallest bound pruned by the cutoff
    double gap_min_ = kInfinity;        // smallest bound pruned against the incumbent
    double unresolved_min_ = kInfinity; // nodes whose LP could not be solved
    bool cut_any_ = false;
    std::size_t next_id_ = 0;
    BnbResult result_;
    std::chrono::steady_clock::time_point start_;
};

void BranchAndBound::branch(const Node &node, double bound, std::size_t which)
{
    for (signed char side : {0, 1}) {
        Node child;
        child.id = next_id_++;
        child.parent = node.id;
        child.depth = node.depth + 1;
        child.bound = bound;
        child.fixed = node.fixed;
        child.fixed[which] = side;
        open_.push(std::move(child));
    }
}

BnbResult BranchAndBound::finish(BnbStatus status)
{
    result_.status = status;
    double dual = global_dual();
    if (status == BnbStatus::Optimal)
        dual = std::min(incumbent_, gap_min_);
    result_.dual_bound = sign_ * dual;
    if (std::isfinite(incumbent_)) {
        result_.incumbent_value = sign_ * incumbent_;
        result_.incumbent_point = incumbent_point_;
    }
    result_.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return std::move(result_);
}

BnbResult BranchAndBound::run()
{
    start_ = std::chrono::steady_clock::now();
    const std::size_t nb = mip_.binaries.size();

    Node root;
    root.id = next_id_++;
    root.fixed.assign(nb, -1);
    open_.push(root);

    while (!open_.empty()) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (elapsed >= controls_.time_limit_s || result_.nodes_explored >= controls_.node_limit)
            return finish(BnbStatus::TimeLimit);

        Node node = open_.top();
        open_.pop();
        if (node.bound >= incumbent_ - controls_.gap) {
            gap_min_ = std::min(gap_min_, node.bound);
            record(node, std::nullopt, "pruned-gap");
            continue;
        }
        if (node.bound >= cutoff_) {
            cut_min_ = std::min(cut_min_, node.bound);
            cut_any_ = true;
            record(node, std::nullopt, "pruned-cutoff");
            continue;
        }

        LinearProgram lp = relaxed_;
        for (std::size_t b = 0; b < nb; ++b)
            if (node.fixed[b] >= 0) {
                auto &v = lp.variables[mip_.binaries[b]];
                v.lo = v.hi = node.fixed[b];
            }
        const LpResult sol = solve_lp(lp, controls_.lp);
        ++result_.nodes_explored;

        if (sol.status == LpStatus::Infeasible) {
            record(node, std::nullopt, "infeasible");
        } else if (sol.status != LpStatus::Optimal) {
            // Keep the inherited bound and split on the first free binary.
            auto free_it = std::find(node.fixed.begin(), node.fixed.end(), static_cast<signed char>(-1));
            if (free_it == node.fixed.end()) {
                unresolved_min_ = std::min(unresolved_min_, node.bound);
                record(node, std::nullopt, "unresolved");
            } else {
                record(node, std::nullopt, "unresolved-branch");
                branch(node, node.bound, static_cast<std::size_t>(free_it - node.fixed.begin()));
            }
        } else {
            const double value = sol.objective_value;
            const double bound = std::max(value, node.bound);
            if (node.id == 0)
                result_.root_bound = sign_ * value;

            if (auto h = rounding_incumbent(mip_, sol.primal))
                offer(sign_ * h->value, h->point);

            // Most fractional binary; ties by widest block, then lowest index.
            std::size_t pick = nb;
            double pick_frac = controls_.integrality;
            double pick_width = -1.0;
            for (std::size_t b = 0; b < nb; ++b) {
                const double z = sol.primal[mip_.binaries[b]];
                const double frac = std::min(z, 1.0 - z);
                if (frac <= controls_.integrality)
                    continue;
                const double width = mip_.relu_blocks[b].hi - mip_.relu_blocks[b].lo;
                if (frac > pick_frac + 1e-12 || (std::abs(frac - pick_frac) <= 1e-12 && width > pick_width)) {
                    pick = b;
                    pick_frac = frac;
                    pick_width = width;
                }
            }

            if (pick == nb) {
                offer(value, sol.primal);
                record(node, value, "integral");
            } else if (bound >= incumbent_ - controls_.gap) {
                gap_min_ = std::min(gap_min_, bound);
                record(node, value, "pruned-gap");
            } else if (bound >= cutoff_) {
                cut_min_ = std::min(cut_min_, bound);
                cut_any_ = true;
                record(node, value, "pruned-cutoff");
            } else {
                record(node, value, "branch " + mip_.lp.variables[mip_.binaries[pick]].name);
                branch(node, bound, pick);
            }
        }

        if (controls_.early_stop == EarlyStop::ThresholdAtZero) {
            const double dual = global_dual();
            if (std::isfinite(dual) && dual >= 0.0)
                return finish(BnbStatus::EarlyStopped);
        }
    }

    if (std::isfinite(unresolved_min_))
        return finish(BnbStatus::TimeLimit);
    if (std::isfinite(incumbent_))
        return finish(BnbStatus::Optimal);
    if (cut_any_)
        return finish(BnbStatus::CutoffPruned);
    return finish(BnbStatus::Infeasible);
}

} // namespace

BnbResult branch_and_bound(const MilpProblem &mip, Sense sense, const BnbControls &controls)
{
    BranchAndBound search(mip, sense, controls);
    return search.run();
}

} // namespace rhv
