#include <doctest.h>

#include "oracles.hpp"
#include "rhv/error.hpp"
#include "rhv/fixtures.hpp"
#include "rhv/obbt.hpp"
#include "rhv/parsers.hpp"

using namespace rhv;

namespace {

std::string data(const std::string &name)
{
    return read_file(std::string(RHV_TEST_DATA) + "/" + name);
}

Error error_of(const std::function<void()> &fn)
{
    try {
        fn();
    } catch (const Error &e) {
        return e;
    }
    FAIL("expected an rhv::Error");
    return Error(ErrorKind::Io, "unreachable");
}

} // namespace

TEST_CASE("toy network file")
{
    const auto net = parse_network_json(data("toy.json"));
    CHECK(net == toy_network());
}

TEST_CASE("network JSON round trip is a fixpoint")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto fx = random_fixture(seed, {.skip_connections = seed % 3 == 0});
        const auto once = emit_network_json(fx.net);
        const auto net = parse_network_json(once);
        CHECK(net == fx.net);
        CHECK(emit_network_json(net) == once);
    }
}

TEST_CASE("network JSON errors")
{
    auto syntax = error_of([] { parse_network_json("{\"format_version\": 1, \"input_dim\": 2,"); });
    CHECK(syntax.kind() == ErrorKind::SyntaxError);
    CHECK(syntax.byte_offset().has_value());

    CHECK(error_of([] { parse_network_json(R"({"format_version": 1, "input_dim": 2})"); }).kind() ==
          ErrorKind::SchemaError);
    CHECK(error_of([] { parse_network_json(R"({"format_version": 2, "input_dim": 2, "layers": []})"); }).kind() ==
          ErrorKind::SchemaError);
    CHECK(error_of([] { parse_network_json(R"({"format_version": 1, "input_dim": 2, "layers": []})"); }).kind() ==
          ErrorKind::SchemaError);
    CHECK(error_of([] {
              parse_network_json(R"({"format_version": 1, "input_dim": 2, "layers": [
                {"id": 1, "kind": "Gemm", "inputs": [0], "weights": [[1, 1]], "bias": [0], "extra": 1}]})");
          }).kind() == ErrorKind::SchemaError);
    CHECK(error_of([] {
              parse_network_json(R"({"format_version": 1, "input_dim": 2, "layers": [
                {"id": 1, "kind": "Conv", "inputs": [0]}]})");
          }).kind() == ErrorKind::SchemaError);
    CHECK(error_of([] {
              parse_network_json(R"({"format_version": 1, "input_dim": 2, "layers": [
                {"id": 1, "kind": "Gemm", "inputs": [0], "weights": [[1, 1], [1]], "bias": [0, 0]}]})");
          }).kind() == ErrorKind::DimensionMismatch);
    CHECK(error_of([] {
              parse_network_json(R"({"format_version": 1, "input_dim": 3, "layers": [
                {"id": 1, "kind": "Gemm", "inputs": [0], "weights": [[1, 1]], "bias": [0]}]})");
          }).kind() == ErrorKind::DimensionMismatch);
}

TEST_CASE("toy properties")
{
    const auto safe = parse_vnnlib(data("toy_safe.vnnlib"));
    CHECK(safe.input_box == toy_box());
    CHECK(safe.num_outputs == 1);
    REQUIRE(safe.clauses.size() == 1);
    REQUIRE(safe.clauses[0].atoms.size() == 1);
    const auto &atom = safe.clauses[0].atoms[0];
    CHECK(atom.relation == Relation::GreaterEq);
    CHECK(atom.rhs == 2.5);
    // violated (f < 0) only above 2.5
    const std::vector<double> y3{3.0}, y2{2.0};
    CHECK(atom.objective(y3) == doctest::Approx(-0.5));
    CHECK(atom.objective(y2) == doctest::Approx(0.5));

    const auto tight = parse_vnnlib(data("toy_tight.vnnlib"));
    CHECK(tight.input_box == toy_box());
    CHECK(tight.clauses.size() == 2);
}

TEST_CASE("vnnlib conjunction of disjunctions becomes clauses")
{
    const char *text = R"(
        (declare-const X_0 Real)
        (declare-const Y_0 Real)
        (declare-const Y_1 Real)
        (assert (<= X_0 1)) (assert (>= X_0 0))
        (assert (or (<= Y_0 0) (<= Y_1 0)))
        (assert (or (and (>= Y_0 1) (<= (- Y_0 Y_1) 2)) (>= (+ Y_0 (* 2 Y_1)) 3)))
    )";
    const auto prop = parse_vnnlib(text);
    CHECK(prop.clauses.size() == 4);
    CHECK(prop.clauses[0].atoms.size() == 3);
    CHECK(prop.clauses[1].atoms.size() == 2);
    const auto &last = prop.clauses[3].atoms.back();
    CHECK(last.coeffs == std::vector<double>{1.0, 2.0});
    CHECK(last.rhs == 3.0);
}

TEST_CASE("vnnlib errors")
{
    CHECK(error_of([] { parse_vnnlib(data("nonlinear.vnnlib")); }).kind() == ErrorKind::NonlinearTerm);
    CHECK(error_of([] {
              parse_vnnlib("(declare-const X_0 Real)(declare-const Y_0 Real)(assert (<= X_0 1))(assert (<= Y_0 1))");
          }).kind() == ErrorKind::UnboundedInputBox);
    CHECK(error_of([] {
              parse_vnnlib("(declare-const X_0 Real)(declare-const Y_0 Real)"
                           "(assert (<= X_0 1))(assert (>= X_0 0))(assert (<= (+ X_0 Y_0) 1))");
          }).kind() == ErrorKind::MixedVariableAtom);
    CHECK(error_of([] {
              parse_vnnlib("(declare-const X_0 Real)(declare-const Y_0 Real)(assert (<= X_0 1))(assert (>= X_0 0))");
          }).kind() == ErrorKind::SchemaError);
    CHECK(error_of([] {
              parse_vnnlib("(declare-const X_0 Real)(declare-const Y_0 Real)"
                           "(assert (<= X_0 1))(assert (>= X_0 0))(assert (<= (exp Y_0) 1))");
          }).kind() == ErrorKind::NonlinearTerm);
    CHECK(error_of([] {
              parse_vnnlib("(declare-const X_0 Real)(declare-const X_2 Real)(declare-const Y_0 Real)"
                           "(assert (<= Y_0 1))");
          }).kind() == ErrorKind::SchemaError);
    const auto unbalanced = error_of([] { parse_vnnlib("(declare-const X_0 Real)\n(assert (<= X_0 1)"); });
    CHECK(unbalanced.kind() == ErrorKind::SyntaxError);
    CHECK(unbalanced.byte_offset().has_value());
}

TEST_CASE("empty input box parses and is reported")
{
    const auto prop = parse_vnnlib(data("empty_box.vnnlib"));
    CHECK(prop.empty_input_box());
}

TEST_CASE("parsed properties agree with direct evaluation of the text")
{
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto fx = random_fixture(seed);
        const auto text = emit_vnnlib(fx.property);
        const auto prop = parse_vnnlib(text);
        REQUIRE(prop.clauses.size() == fx.property.clauses.size());
        // Widen the box a little so points outside it are exercised as well.
        IntervalVector wide = prop.input_box;
        for (auto &iv : wide)
            iv = {iv.lo - 0.2, iv.hi + 0.2};
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int s = 0; s < 300; ++s) {
            const auto x = sample_box(rng, wide);
            auto y = forward_eval(fx.net, sample_box(rng, fx.property.input_box)).output();
            for (auto &v : y)
                v += 0.3 * noise(rng);
            bool inside = true;
            for (std::size_t k = 0; k < x.size(); ++k)
                inside = inside && prop.input_box[k].contains(x[k]);
            const bool ours = inside && prop.violation_slack(y) <= 0.0;
            CHECK(ours == oracle::vnnlib_satisfied(text, x, y));
        }
    }
}

TEST_CASE("bounds JSON round trip")
{
    const auto fx = random_fixture(11);
    ObbtConfig cfg;
    const auto res = obbt_rh(fx.net, fx.property.input_box, cfg);
    const auto text = emit_bounds_json(res.bounds, {"obbt-rh", 2, res.summary.windows});
    const auto back = parse_bounds_json(text, fx.net);
    CHECK(back == res.bounds);
    CHECK(emit_bounds_json(back, {"obbt-rh", 2, res.summary.windows}) == text);
}

TEST_CASE("bounds JSON errors")
{
    const auto net = toy_network();
    CHECK(error_of([&] { parse_bounds_json(R"({"pre": {"1": [[-1, 2], [-2, 1]]}})", net, toy_box()); })
              .kind() == ErrorKind::SchemaError);
    CHECK(error_of([&] {
              parse_bounds_json(R"({"pre": {"1": [[-1, 2], [-2, 1]], "2": [[0, 3]], "7": []}})", net,
                                toy_box());
          }).kind() == ErrorKind::SchemaError);
    CHECK(error_of([&] {
              parse_bounds_json(R"({"pre": {"1": [[-1, 2]], "2": [[0, 3]]}})", net, toy_box());
          }).kind() == ErrorKind::DimensionMismatch);
    CHECK(error_of([&] {
              parse_bounds_json(R"({"pre": {"1": [[2, -1], [-2, 1]], "2": [[0, 3]]}})", net, toy_box());
          }).kind() == ErrorKind::InfeasibleBounds);
    CHECK(error_of([&] { parse_bounds_json(R"({"pre": {"1": [[-1, 2], [-2, 1]], "2": [[0, 3]]}})", net); })
              .kind() == ErrorKind::SchemaError);
    const auto ok = parse_bounds_json(R"({"pre": {"1": [[-1, 2], [-2, 1]], "2": [[0, 2]]}})", net, toy_box());
    CHECK(ok.pre(2)[0] == Interval{0.0, 2.0});
    CHECK(ok.post(1)[0] == Interval{0.0, 2.0});
}
