#include <doctest.h>

#include "rhv/fixtures.hpp"
#include "rhv/parsers.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

using namespace rhv;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

fs::path scratch()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("rhv_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string tmp(const std::string &name)
{
    return (scratch() / name).string();
}

std::string data(const std::string &name)
{
    return std::string(RHV_TEST_DATA) + "/" + name;
}

Run run(const std::string &args, const std::string &env = {})
{
    const auto out = tmp("stdout.txt"), err = tmp("stderr.txt");
    const std::string cmd = env + (env.empty() ? "" : " ") + RHV_BINARY + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

std::string toy(const std::string &prop)
{
    return "--model " + data("toy.json") + " --property " + data(prop);
}

} // namespace

TEST_CASE("exit codes follow the verdict")
{
    const auto safe = run("verify " + toy("toy_safe.vnnlib"));
    CHECK(safe.code == 0);
    CHECK(safe.out == "holds\n");

    const auto bad = run("verify " + toy("toy_unsafe.vnnlib"));
    CHECK(bad.code == 1);
    CHECK(bad.out.rfind("violated counterexample:", 0) == 0);

    CHECK(run("verify " + toy("toy_tight.vnnlib") + " --tighten-output").code == 0);
    CHECK(run("verify " + toy("toy_tight.vnnlib") + " --method ibp").code == 0);
    CHECK(run("verify " + toy("toy_tight.vnnlib") + " --method lp --no-cutoff-zero").code == 0);

    const auto empty = run("verify " + toy("empty_box.vnnlib"));
    CHECK(empty.code == 0);
}

TEST_CASE("errors exit with 3 and name the file")
{
    const auto missing = run("verify --model /nonexistent/net.json --property " + data("toy_safe.vnnlib"));
    CHECK(missing.code == 3);
    CHECK(missing.err.find("/nonexistent/net.json") != std::string::npos);

    const auto nonlinear = run("verify " + toy("nonlinear.vnnlib"));
    CHECK(nonlinear.code == 3);
    CHECK(nonlinear.err.find("NonlinearTerm") != std::string::npos);
    CHECK(nonlinear.err.find("nonlinear.vnnlib") != std::string::npos);

    CHECK(run("verify " + toy("toy_safe.vnnlib") + " --method ibp --horizon 3").code == 3);
    CHECK(run("verify " + toy("toy_safe.vnnlib") + " --method simplex").code == 3);
    CHECK(run("verify " + toy("toy_safe.vnnlib") + " --horizon 0").code == 3);
    CHECK(run("frobnicate").code == 3);
    CHECK(run("--help").code == 0);
}

TEST_CASE("tighten on a five-Gemm chain")
{
    const auto model = tmp("chain.json"), prop = tmp("chain.vnnlib");
    REQUIRE(run("fixture --seed 4 --chain 5 --inputs 3 --width 4 --outputs 2 --model-out " + model +
                " --property-out " + prop)
                .code == 0);
    const auto r = run("tighten --model " + model + " --property " + prop + " --horizon 2");
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["windows"] == nlohmann::json::parse("[[0,2],[1,3],[2,4]]"));
    CHECK(doc["horizon"] == 2);

    const auto with_out = run("tighten --model " + model + " --property " + prop + " --tighten-output");
    CHECK(nlohmann::json::parse(with_out.out)["windows"].size() == 4);

    // --method ibp reproduces a plain interval pass
    const auto net = parse_network_json(read_file(model));
    const auto box = parse_vnnlib(read_file(prop)).input_box;
    const auto ibp = run("tighten --model " + model + " --property " + prop + " --method ibp");
    REQUIRE(ibp.code == 0);
    CHECK(parse_bounds_json(ibp.out, net, box) == ibp_forward(net, box));

    // worker count never changes the output
    const auto one = run("tighten --model " + model + " --property " + prop + " --workers 1 --tighten-output");
    const auto four = run("tighten --model " + model + " --property " + prop + " --workers 4 --tighten-output");
    CHECK(one.out == four.out);
    CHECK(one.out == with_out.out);
}

TEST_CASE("exported bounds can be reused")
{
    const auto bounds = tmp("toy_bounds.json"), report = tmp("report.json");
    REQUIRE(run("verify " + toy("toy_safe.vnnlib") + " --tighten-output --bounds-out " + bounds).code == 0);
    const auto again = run("verify " + toy("toy_unsafe.vnnlib") + " --bounds-in " + bounds +
                           " --report " + report);
    CHECK(again.code == 1);
    const auto doc = nlohmann::json::parse(read_file(report));
    CHECK(doc["verdict"] == "violated");
    CHECK(doc["bounds"]["pre"]["2"][0][1].get<double>() == doctest::Approx(2.0));

    CHECK(run("verify " + toy("toy_safe.vnnlib") + " --bounds-in " + bounds + " --method ibp").code == 3);

    const auto metrics = run("report --model " + data("toy.json") + " --bounds-in " + bounds);
    REQUIRE(metrics.code == 0);
    const auto m = nlohmann::json::parse(metrics.out);
    CHECK(m["layers"][1]["range_all"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("environment supplies time limits")
{
    const auto ok = run("verify " + toy("toy_safe.vnnlib"), "RHV_TIME_LIMIT=5 RHV_TOTAL_TIME_LIMIT=10");
    CHECK(ok.code == 0);
    const auto bad = run("verify " + toy("toy_safe.vnnlib"), "RHV_TIME_LIMIT=-1");
    CHECK(bad.code == 3);
    CHECK(bad.err.find("RHV_TIME_LIMIT") != std::string::npos);
}
