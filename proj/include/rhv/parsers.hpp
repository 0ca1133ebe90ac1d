#pragma once

#include "rhv/interval.hpp"
#include "rhv/lp.hpp"
#include "rhv/milp.hpp"
#include "rhv/model_graph.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rhv {

inline constexpr int kNetworkFormatVersion = 1;
inline constexpr int kBoundsFormatVersion = 1;

// Margin a counterexample must clear: f(y) <= -kCertificateMargin.
inline constexpr double kCertificateMargin = 1e-6;

// coeffs . y  (<= or >=)  rhs, over the network outputs.
struct OutputAtom {
    std::vector<double> coeffs;
    Relation relation = Relation::LessEq;
    double rhs = 0.0;

    // f(y): negative exactly when the atom holds strictly. For a.y <= c this
    // is a.y - c, for a.y >= c it is c - a.y.
    double objective(std::span<const double> y) const;
    LinearForm objective_form() const;
};

// A conjunction of atoms describing one way the property can fail.
struct ViolationClause {
    std::vector<OutputAtom> atoms;

    // Largest atom objective; <= 0 iff every atom holds.
    double slack(std::span<const double> y) const;
};

struct PropertySpec {
    IntervalVector input_box;
    std::size_t num_outputs = 0;
    std::vector<ViolationClause> clauses;  // disjunction, file order

    // min over clauses of slack; the property fails at y iff this is <= 0.
    double violation_slack(std::span<const double> y) const;
    bool empty_input_box() const;
};

NetworkGraph parse_network_json(std::string_view text);
std::string emit_network_json(const NetworkGraph &net);

PropertySpec parse_vnnlib(std::string_view text);
// Box bounds, then the violation clauses as one (or ...) assertion.
std::string emit_vnnlib(const PropertySpec &prop);

struct BoundsMetadata {
    std::string method;
    std::optional<int> horizon;
    std::vector<std::pair<int, int>> windows;
};

// {"format_version", "method", "horizon", "windows", "pre": {"1": [[l,u],...]},
//  "post": {"0": input box, "i": ...}}
std::string emit_bounds_json(const BoundStore &store, const BoundsMetadata &meta = {});

// Reads pre-activation bounds for every Gemm layer of `net`. The input box is
// taken from post["0"] when present, otherwise from `input_box`. Other post
// entries are recomputed from the pre-activation bounds.
BoundStore parse_bounds_json(std::string_view text, const NetworkGraph &net,
                             const std::optional<IntervalVector> &input_box = std::nullopt);

std::string read_file(const std::string &path);
void write_file(const std::string &path, std::string_view contents);

} // namespace rhv
