#include "rhv/obbt.hpp"

#include "rhv/error.hpp"
#include "rhv/work_queue.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

namespace rhv {

HorizonSequence horizon_sequence(const NetworkGraph &net, int horizon, bool include_output)
{
    if (horizon < 1)
        throw Error(ErrorKind::InvalidWindow, "horizon length must be at least 1");
    HorizonSequence seq;
    seq.horizon = horizon;
    const int L = net.num_gemms();
    for (int t = 2; t <= L; ++t) {
        const bool qualifies = net.has_relu(t) || (include_output && t == L);
        if (qualifies)
            seq.pairs.emplace_back(std::max(0, t - horizon), t);
    }
    return seq;
}

NeuronBound obbt_neuron(const NetworkGraph &net, const WindowSubGraph &win, const BoundStore &snapshot, int neuron,
                        Sense sense, const BnbControls &controls)
{
    LinearForm objective;
    objective.terms.emplace_back(neuron, 1.0);
    const MilpProblem mip = encode_window(net, win, snapshot, objective);
    const BnbResult res = branch_and_bound(mip, sense, controls);
    if (res.status == BnbStatus::Infeasible)
        throw Error(ErrorKind::InfeasibleBounds, "window (" + std::to_string(win.s) + ", " + std::to_string(win.t) +
                                                     ") admits no point inside the stored bounds");
    return {res.dual_bound, res.status, res.nodes_explored};
}

namespace {

struct Task {
    int neuron;
    Sense sense;
};

using Solver = std::function<NeuronBound(const WindowSubGraph &, const BoundStore &, const Task &, double)>;

TighteningResult run_schedule(const NetworkGraph &net, const IntervalVector &input_box, const ObbtConfig &config,
                              int horizon, const Solver &solve)
{
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    TighteningResult out{ibp_forward(net, input_box), {}};
    const auto seq = horizon_sequence(net, horizon, config.tighten_output);

    for (const auto &[s, t] : seq.pairs) {
        const double remaining = config.total_time_limit_s - elapsed();
        if (remaining <= 0.0) {
            out.summary.budget_exhausted = true;
            break;
        }
        const WindowSubGraph win = bfs_window(net, t, horizon);
        const BoundStore snapshot = out.bounds;
        const bool relu_target = net.has_relu(t);

        std::vector<Task> tasks;
        const auto &pre = snapshot.pre(t);
        for (std::size_t k = 0; k < pre.size(); ++k) {
            if (relu_target && is_stabilized(classify(pre[k]))) {
                ++out.summary.skipped;
                continue;
            }
            tasks.push_back({static_cast<int>(k), Sense::Maximize});
            tasks.push_back({static_cast<int>(k), Sense::Minimize});
        }

        const double limit = std::min(config.per_instance_time_limit_s, remaining);
        std::vector<NeuronBound> results(tasks.size());
        parallel_for(tasks.size(), config.workers,
                     [&](std::size_t i) { results[i] = solve(win, snapshot, tasks[i], limit); });

        // Single merge point, fixed order.
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto &r = results[i];
            Interval iv{-kInfinity, kInfinity};
            if (tasks[i].sense == Sense::Maximize)
                iv.hi = r.bound;
            else
                iv.lo = r.bound;
            out.bounds.tighten_pre(t, static_cast<std::size_t>(tasks[i].neuron), iv);
            ++out.summary.subproblems;
            switch (r.status) {
            case BnbStatus::EarlyStopped: ++out.summary.early_stopped; break;
            case BnbStatus::TimeLimit: ++out.summary.time_limited; break;
            default: ++out.summary.optimal; break;
            }
        }
        out.summary.windows.emplace_back(win.s, t);
    }
    out.summary.wall_time = elapsed();
    return out;
}

} // namespace

TighteningResult obbt_rh(const NetworkGraph &net, const IntervalVector &input_box, const ObbtConfig &config)
{
    if (config.horizon < 1)
        throw Error(ErrorKind::InvalidWindow, "horizon length must be at least 1");
    if (!(config.per_instance_time_limit_s > 0.0))
        throw Error(ErrorKind::InvalidModel, "per-instance time limit must be positive");
    const int L = net.num_gemms();
    return run_schedule(net, input_box, config, config.horizon,
                        [&](const WindowSubGraph &win, const BoundStore &snap, const Task &task, double limit) {
                            BnbControls controls;
                            controls.time_limit_s = limit;
                            controls.node_limit = config.node_limit;
                            // The output layer has no ReLU whose sign could be settled early.
                            controls.early_stop = config.early_stop && win.t != L ? EarlyStop::ThresholdAtZero
                                                                                   : EarlyStop::None;
                            return obbt_neuron(net, win, snap, task.neuron, task.sense, controls);
                        });
}

TighteningResult lp_tighten(const NetworkGraph &net, const IntervalVector &input_box, const ObbtConfig &config)
{
    return run_schedule(net, input_box, config, std::max(1, net.num_gemms()),
                        [&](const WindowSubGraph &win, const BoundStore &snap, const Task &task, double) {
                            LinearForm objective;
                            objective.terms.emplace_back(task.neuron, 1.0);
                            const MilpProblem mip = encode_window(net, win, snap, objective);
                            const LpResult res = solve_lp(lp_relax(mip, task.sense));
                            if (res.status == LpStatus::Infeasible)
                                throw Error(ErrorKind::InfeasibleBounds, "relaxed window admits no point");
                            NeuronBound nb;
                            nb.status = BnbStatus::Optimal;
                            if (res.status == LpStatus::Optimal)
                                nb.bound = res.objective_value;
                            else
                                nb.bound = task.sense == Sense::Maximize ? kInfinity : -kInfinity;
                            return nb;
                        });
}

} // namespace rhv
