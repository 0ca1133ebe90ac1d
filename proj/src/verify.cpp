#include "rhv/verify.hpp"

#include "rhv/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace rhv {

const char *to_string(Outcome outcome)
{
    switch (outcome) {
    case Outcome::Holds: return "holds";
    case Outcome::Violated: return "violated";
    case Outcome::Unknown: return "unknown";
    }
    return "?";
}

Verdict vacuous_verdict(std::string reason)
{
    Verdict v;
    v.outcome = Outcome::Holds;
    v.vacuous = true;
    v.note = std::move(reason);
    return v;
}

namespace {

// Store restricted to the property's input region.
BoundStore restrict_to_property(const NetworkGraph &net, const PropertySpec &prop, const BoundStore &bounds)
{
    if (prop.input_box.size() != net.input_dim())
        throw Error(ErrorKind::DimensionMismatch, "property declares " + std::to_string(prop.input_box.size()) +
                                                      " inputs, network has " + std::to_string(net.input_dim()));
    if (prop.num_outputs != net.width(net.num_gemms()))
        throw Error(ErrorKind::DimensionMismatch, "property declares " + std::to_string(prop.num_outputs) +
                                                      " outputs, network has " +
                                                      std::to_string(net.width(net.num_gemms())));
    if (bounds.num_gemms() != net.num_gemms())
        throw Error(ErrorKind::DimensionMismatch, "bound store does not match the network depth");
    if (prop.empty_input_box())
        throw Error(ErrorKind::InfeasibleBounds, "property input box is empty");
    BoundStore restricted = bounds;
    restricted.tighten_input(prop.input_box);
    return restricted;
}

MilpProblem final_model(const NetworkGraph &net, const BoundStore &store, const LinearForm &objective)
{
    return encode_window(net, extract_window(net, 0, net.num_gemms()), store, objective);
}

} // namespace

Verdict verify(const NetworkGraph &net, const PropertySpec &prop, const BoundStore &bounds,
               const VerifyControls &controls)
{
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    BoundStore store;
    try {
        store = restrict_to_property(net, prop, bounds);
    } catch (const Error &e) {
        if (e.kind() != ErrorKind::InfeasibleBounds)
            throw;
        auto v = vacuous_verdict(e.what());
        v.total_time = elapsed();
        return v;
    }

    Verdict verdict;
    bool all_refuted = true;
    for (std::size_t c = 0; c < prop.clauses.size(); ++c) {
        const auto &clause = prop.clauses[c];
        ClauseCertificate cert;
        cert.clause = c;
        cert.single_atom = clause.atoms.size() == 1;

        BnbControls bnb;
        bnb.time_limit_s = controls.time_limit_s;
        bnb.node_limit = controls.node_limit;
        MilpProblem mip;
        if (cert.single_atom) {
            mip = final_model(net, store, clause.atoms.front().objective_form());
            if (controls.cutoff_zero)
                bnb.cutoff = 0.0;
        } else {
            mip = final_model(net, store, LinearForm{});
            // Twice the certificate margin so re-evaluation has room for rounding.
            for (const auto &atom : clause.atoms)
                add_target_constraint(mip, atom.objective_form(), Relation::LessEq, -2.0 * kCertificateMargin);
        }
        const BnbResult res = branch_and_bound(mip, Sense::Minimize, bnb);
        cert.status = res.status;
        cert.dual_bound = res.dual_bound;
        cert.incumbent = res.incumbent_value;
        cert.nodes = res.nodes_explored;
        cert.time = res.wall_time;

        if (res.incumbent_point) {
            std::vector<double> x = *res.incumbent_point;
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = std::clamp(x[k], prop.input_box[k].lo, prop.input_box[k].hi);
            const auto values = forward_eval(net, x);
            if (clause.slack(values.output()) <= -kCertificateMargin) {
                verdict.certificate.push_back(cert);
                verdict.outcome = Outcome::Violated;
                verdict.counterexample = std::move(x);
                verdict.total_time = elapsed();
                return verdict;
            }
        }
        if (cert.single_atom)
            cert.refuted = res.status == BnbStatus::Infeasible || res.dual_bound >= -kCertificateMargin;
        else
            cert.refuted = res.status == BnbStatus::Infeasible;
        all_refuted = all_refuted && cert.refuted;
        verdict.certificate.push_back(cert);
    }
    verdict.outcome = all_refuted ? Outcome::Holds : Outcome::Unknown;
    verdict.total_time = elapsed();
    return verdict;
}

std::vector<std::optional<double>> lp_bound_of_final_mip(const NetworkGraph &net, const PropertySpec &prop,
                                                         const BoundStore &bounds)
{
    std::vector<std::optional<double>> out;
    BoundStore store;
    try {
        store = restrict_to_property(net, prop, bounds);
    } catch (const Error &e) {
        if (e.kind() != ErrorKind::InfeasibleBounds)
            throw;
        return std::vector<std::optional<double>>(prop.clauses.size());
    }
    for (const auto &clause : prop.clauses) {
        if (clause.atoms.size() != 1) {
            out.emplace_back();
            continue;
        }
        const auto mip = final_model(net, store, clause.atoms.front().objective_form());
        const auto res = solve_lp(lp_relax(mip, Sense::Minimize));
        if (res.status == LpStatus::Optimal)
            out.emplace_back(res.objective_value);
        else
            out.emplace_back();
    }
    return out;
}

MetricsReport compute_metrics(const BoundStore &bounds, const Timings &timings, std::string method)
{
    MetricsReport m;
    m.method = std::move(method);
    m.times = timings;
    double sum_all = 0.0, sum_unstable = 0.0;
    std::size_t count_all = 0;
    for (int i = 1; i <= bounds.num_gemms(); ++i) {
        LayerMetrics lm;
        lm.layer = i;
        lm.relu = bounds.has_relu(i);
        const auto &pre = bounds.pre(i);
        lm.width = pre.size();
        double layer_sum = 0.0, layer_unstable = 0.0;
        for (const auto &iv : pre) {
            const auto state = classify(iv);
            layer_sum += iv.width();
            switch (state) {
            case NeuronState::Inactive: ++lm.inactive; break;
            case NeuronState::Active: ++lm.active; break;
            case NeuronState::Unstabilized:
                ++lm.unstabilized;
                layer_unstable += iv.width();
                break;
            }
        }
        lm.stabilized = lm.inactive + lm.active;
        lm.range_all = pre.empty() ? 0.0 : layer_sum / static_cast<double>(pre.size());
        if (lm.unstabilized > 0)
            lm.range_unstabilized = layer_unstable / static_cast<double>(lm.unstabilized);
        if (lm.relu) {
            m.inactive += lm.inactive;
            m.active += lm.active;
            m.stabilized += lm.stabilized;
            m.unstabilized += lm.unstabilized;
            sum_all += layer_sum;
            sum_unstable += layer_unstable;
            count_all += lm.width;
        }
        m.layers.push_back(lm);
    }
    m.range_all = count_all ? sum_all / static_cast<double>(count_all) : 0.0;
    if (m.unstabilized > 0)
        m.range_unstabilized = sum_unstable / static_cast<double>(m.unstabilized);
    return m;
}

namespace {

using nlohmann::ordered_json;

ordered_json optional_number(const std::optional<double> &v)
{
    if (v && std::isfinite(*v))
        return *v;
    return nullptr;
}

ordered_json finite_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

ordered_json metrics_json(const MetricsReport &m)
{
    ordered_json out;
    out["method"] = m.method;
    ordered_json layers = ordered_json::array();
    for (const auto &lm : m.layers) {
        ordered_json l;
        l["layer"] = lm.layer;
        l["relu"] = lm.relu;
        l["width"] = lm.width;
        l["inactive"] = lm.inactive;
        l["active"] = lm.active;
        l["stabilized"] = lm.stabilized;
        l["unstabilized"] = lm.unstabilized;
        l["range_all"] = lm.range_all;
        l["range_unstabilized"] = optional_number(lm.range_unstabilized);
        layers.push_back(std::move(l));
    }
    out["layers"] = std::move(layers);
    out["totals"] = {{"inactive", m.inactive},
                     {"active", m.active},
                     {"stabilized", m.stabilized},
                     {"unstabilized", m.unstabilized}};
    out["range_all"] = m.range_all;
    out["range_unstabilized"] = optional_number(m.range_unstabilized);
    ordered_json lp = ordered_json::array();
    for (const auto &b : m.lp_bounds)
        lp.push_back(optional_number(b));
    out["lp_bounds"] = std::move(lp);
    out["times"] = {{"tightening", m.times.tightening},
                    {"verification", m.times.verification},
                    {"total", m.times.tightening + m.times.verification}};
    return out;
}

} // namespace

std::string emit_metrics_json(const MetricsReport &metrics)
{
    return metrics_json(metrics).dump(2) + "\n";
}

std::string emit_report_json(const Verdict &verdict, const MetricsReport &metrics, const BoundStore &bounds,
                             const ReportConfig &config)
{
    ordered_json doc;
    doc["format_version"] = 1;
    doc["verdict"] = to_string(verdict.outcome);
    doc["vacuous"] = verdict.vacuous;
    if (!verdict.note.empty())
        doc["note"] = verdict.note;
    doc["counterexample"] = verdict.counterexample ? ordered_json(*verdict.counterexample) : ordered_json(nullptr);
    ordered_json clauses = ordered_json::array();
    for (const auto &c : verdict.certificate) {
        ordered_json j;
        j["clause"] = c.clause;
        j["single_atom"] = c.single_atom;
        j["status"] = to_string(c.status);
        j["refuted"] = c.refuted;
        j["dual_bound"] = finite_or_null(c.dual_bound);
        j["incumbent"] = optional_number(c.incumbent);
        j["nodes"] = c.nodes;
        j["time"] = c.time;
        clauses.push_back(std::move(j));
    }
    doc["clauses"] = std::move(clauses);
    doc["metrics"] = metrics_json(metrics);
    ordered_json pre = ordered_json::object();
    if (bounds.num_gemms() > 0)
        for (int i = 1; i <= bounds.num_gemms(); ++i) {
            ordered_json arr = ordered_json::array();
            for (const auto &iv : bounds.pre(i))
                arr.push_back({iv.lo, iv.hi});
            pre[std::to_string(i)] = std::move(arr);
        }
    doc["bounds"] = {{"pre", std::move(pre)}};
    ordered_json cfg = ordered_json::object();
    for (const auto &[k, v] : config)
        cfg[k] = v;
    doc["config"] = std::move(cfg);
    return doc.dump(2) + "\n";
}

} // namespace rhv
