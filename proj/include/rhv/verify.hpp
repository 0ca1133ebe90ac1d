#pragma once

#include "rhv/interval.hpp"
#include "rhv/milp.hpp"
#include "rhv/model_graph.hpp"
#include "rhv/parsers.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rhv {

enum class Outcome { Holds, Violated, Unknown };

const char *to_string(Outcome outcome);

struct ClauseCertificate {
    std::size_t clause = 0;
    bool single_atom = true;
    BnbStatus status = BnbStatus::Infeasible;
    double dual_bound = 0.0;  // lower bound on min f (single-atom clauses)
    std::optional<double> incumbent;
    std::size_t nodes = 0;
    double time = 0.0;
    bool refuted = false;
};

struct Verdict {
    Outcome outcome = Outcome::Unknown;
    std::optional<std::vector<double>> counterexample;
    std::vector<ClauseCertificate> certificate;
    double total_time = 0.0;
    bool vacuous = false;  // the input region admits no point
    std::string note;
};

struct VerifyControls {
    bool cutoff_zero = true;
    double time_limit_s = kInfinity;  // per clause
    std::size_t node_limit = static_cast<std::size_t>(-1);
};

// Solves the full-network model with the stored boxes for every clause.
// Single-atom clauses minimize f (pruning at 0 when cutoff_zero); multi-atom
// clauses search for a point meeting every atom with margin. A clause is
// refuted when its dual bound reaches -kCertificateMargin or it is
// infeasible. Stops at the first certified counterexample.
Verdict verify(const NetworkGraph &net, const PropertySpec &prop, const BoundStore &bounds,
               const VerifyControls &controls = {});

Verdict vacuous_verdict(std::string reason);

// LP relaxation value of min f for each single-atom clause (nullopt for
// multi-atom clauses).
std::vector<std::optional<double>> lp_bound_of_final_mip(const NetworkGraph &net, const PropertySpec &prop,
                                                         const BoundStore &bounds);

struct LayerMetrics {
    int layer = 0;
    bool relu = false;
    std::size_t width = 0;
    std::size_t inactive = 0;
    std::size_t active = 0;
    std::size_t stabilized = 0;
    std::size_t unstabilized = 0;
    double range_all = 0.0;
    std::optional<double> range_unstabilized;
};

struct Timings {
    double tightening = 0.0;
    double verification = 0.0;
};

struct MetricsReport {
    std::string method;
    std::vector<LayerMetrics> layers;
    // Totals and ranges over ReLU-feeding neurons only.
    std::size_t inactive = 0;
    std::size_t active = 0;
    std::size_t stabilized = 0;
    std::size_t unstabilized = 0;
    double range_all = 0.0;
    std::optional<double> range_unstabilized;
    std::vector<std::optional<double>> lp_bounds;
    Timings times;
};

MetricsReport compute_metrics(const BoundStore &bounds, const Timings &timings, std::string method = {});

using ReportConfig = std::vector<std::pair<std::string, std::string>>;

std::string emit_metrics_json(const MetricsReport &metrics);
std::string emit_report_json(const Verdict &verdict, const MetricsReport &metrics, const BoundStore &bounds,
                             const ReportConfig &config);

} // namespace rhv
