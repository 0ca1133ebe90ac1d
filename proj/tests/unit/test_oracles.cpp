#include <doctest.h>

#include "oracles.hpp"
#include "rhv/fixtures.hpp"

using namespace rhv;

// The oracles are checked against hand-worked answers before anything else
// leans on them.

TEST_CASE("vertex enumeration on a triangle")
{
    // x, y in [0, 2], x + y <= 2: max x + 2y = 4 at (0, 2), min = 0.
    oracle::DenseLp lp;
    lp.lo = {0.0, 0.0};
    lp.hi = {2.0, 2.0};
    lp.rows.push_back({{1.0, 1.0}, Relation::LessEq, 2.0});
    lp.c = {1.0, 2.0};
    const auto r = oracle::vertex_enumerate(lp);
    REQUIRE(r.feasible);
    CHECK(r.max == doctest::Approx(4.0));
    CHECK(r.min == doctest::Approx(0.0));
    CHECK(r.argmax == std::vector<double>{0.0, 2.0});

    lp.rows.push_back({{1.0, 1.0}, Relation::GreaterEq, 3.0});
    CHECK_FALSE(oracle::vertex_enumerate(lp).feasible);
}

TEST_CASE("vertex enumeration with an equality")
{
    // x + y = 1 inside [-1, 1]^2: x - y ranges over [-1, 1].
    oracle::DenseLp lp;
    lp.lo = {-1.0, -1.0};
    lp.hi = {1.0, 1.0};
    lp.rows.push_back({{1.0, 1.0}, Relation::Equal, 1.0});
    lp.c = {1.0, -1.0};
    lp.c0 = 0.5;
    const auto r = oracle::vertex_enumerate(lp);
    REQUIRE(r.feasible);
    CHECK(r.max == doctest::Approx(1.5));
    CHECK(r.min == doctest::Approx(-0.5));
}

TEST_CASE("pattern enumeration on the toy network")
{
    const auto net = toy_network();
    const auto store = ibp_forward(net, toy_box());
    const auto out = oracle::enumerate_patterns(net, store, 2, {1.0}, 0.0);
    REQUIRE(out.feasible);
    CHECK(out.max == doctest::Approx(2.0));
    CHECK(out.min == doctest::Approx(0.0));
    CHECK(out.patterns == 4);
    // Layer 1 has no ReLUs in front of it: a single affine piece.
    const auto first = oracle::enumerate_patterns(net, store, 1, {1.0, 0.0}, 0.0);
    CHECK(first.patterns == 1);
    CHECK(first.max == doctest::Approx(2.0));
    CHECK(first.min == doctest::Approx(-1.0));
}

TEST_CASE("independent forward pass matches the hand computation")
{
    const auto pre = oracle::forward(toy_network(), {0.5, 1.0});
    REQUIRE(pre.size() == 3);
    CHECK(pre[1] == std::vector<double>{1.5, -0.5});
    CHECK(pre[2] == std::vector<double>{1.5});
}

TEST_CASE("pattern enumeration dominates sampling")
{
    std::mt19937_64 rng(8);
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const auto fx = random_fixture(seed, {.skip_connections = seed % 2 == 0});
        const auto store = ibp_forward(fx.net, fx.property.input_box);
        const int L = fx.net.num_gemms();
        const auto ref = oracle::enumerate_patterns(fx.net, store, L, std::vector<double>(fx.net.width(L), 1.0), 0.0);
        REQUIRE(ref.feasible);
        double lo = kInfinity, hi = -kInfinity;
        for (int s = 0; s < 3000; ++s) {
            const auto y = oracle::forward(fx.net, sample_box(rng, fx.property.input_box))[L];
            double v = 0.0;
            for (double e : y)
                v += e;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(ref.min <= lo + 1e-9);
        CHECK(ref.max >= hi - 1e-9);
        // The optimizers are real inputs.
        const auto at = oracle::forward(fx.net, ref.argmax)[L];
        double v = 0.0;
        for (double e : at)
            v += e;
        CHECK(v == doctest::Approx(ref.max).epsilon(1e-7));
    }
}

TEST_CASE("vnnlib evaluator")
{
    const std::string text = R"(
        (declare-const X_0 Real)
        (declare-const Y_0 Real)
        (declare-const Y_1 Real)
        (assert (>= X_0 -1)) (assert (<= X_0 1.5))
        (assert (or (and (>= Y_0 1) (<= (- Y_0 Y_1) 2)) (>= (+ Y_0 (* 2 Y_1)) 3)))
    )";
    CHECK(oracle::vnnlib_satisfied(text, {0.0}, {1.0, 0.0}));
    CHECK_FALSE(oracle::vnnlib_satisfied(text, {2.0}, {1.0, 0.0}));
    CHECK(oracle::vnnlib_satisfied(text, {0.0}, {4.0, 1.0}));
    CHECK(oracle::vnnlib_satisfied(text, {0.0}, {0.0, 1.5}));
    CHECK_FALSE(oracle::vnnlib_satisfied(text, {0.0}, {0.0, 1.0}));
}

TEST_CASE("grid covers the corners")
{
    int count = 0;
    bool corner = false;
    oracle::grid_points({{0.0, 1.0}, {-1.0, 1.0}}, 3, [&](const std::vector<double> &x) {
        ++count;
        corner = corner || (x[0] == 1.0 && x[1] == -1.0);
    });
    CHECK(count == 9);
    CHECK(corner);
}
