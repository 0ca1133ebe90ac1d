// rhv: bound tightening and MILP verification of ReLU networks.
//
//   rhv verify  --model net.json --property prop.vnnlib [--method obbt-rh] ...
//   rhv tighten --model net.json --property prop.vnnlib --out bounds.json
//   rhv report  --model net.json --bounds-in bounds.json [--property prop.vnnlib]
//   rhv fixture --seed 7 --model-out net.json --property-out prop.vnnlib
//
// Exit codes: 0 holds, 1 violated, 2 unknown, 3 usage or input error.

#include "rhv/error.hpp"
#include "rhv/fixtures.hpp"
#include "rhv/obbt.hpp"
#include "rhv/parsers.hpp"
#include "rhv/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitHolds = 0;
constexpr int kExitViolated = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitError = 3;

struct RunConfig {
    std::string model_path;
    std::string property_path;
    std::string method = "obbt-rh";
    int horizon = 2;
    double time_limit = 30.0;
    double total_time_limit = rhv::kInfinity;
    double mip_time_limit = rhv::kInfinity;
    unsigned workers = 1;
    bool cutoff_zero = true;
    bool tighten_output = false;
    bool no_early_stop = false;
    std::string bounds_in;
    std::string bounds_out;
    std::string report_path;
    bool verbose = false;
};

bool g_verbose = false;

void log(const std::string &msg)
{
    if (g_verbose)
        std::cerr << "rhv: " << msg << "\n";
}

double elapsed_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

std::optional<double> env_seconds(const char *name)
{
    const char *raw = std::getenv(name);
    if (!raw || !*raw)
        return std::nullopt;
    char *end = nullptr;
    const double v = std::strtod(raw, &end);
    if (*end != '\0' || !(v > 0.0))
        throw rhv::Error(rhv::ErrorKind::InvalidModel, std::string(name) + " must be a positive number of seconds");
    return v;
}

void apply_env(RunConfig &cfg, const CLI::App &cmd)
{
    if (cmd.count("--time-limit") == 0)
        if (auto v = env_seconds("RHV_TIME_LIMIT"))
            cfg.time_limit = *v;
    if (cmd.count("--total-time-limit") == 0)
        if (auto v = env_seconds("RHV_TOTAL_TIME_LIMIT"))
            cfg.total_time_limit = *v;
}

void check_method_flags(const RunConfig &cfg, const CLI::App &cmd)
{
    if (cfg.method != "obbt-rh") {
        for (const char *flag : {"--horizon", "--no-early-stop"})
            if (cmd.count(flag))
                throw rhv::Error(rhv::ErrorKind::InvalidModel,
                                 std::string(flag) + " only applies to --method obbt-rh");
    }
    if (cfg.method == "ibp")
        for (const char *flag : {"--tighten-output", "--time-limit", "--total-time-limit", "--workers"})
            if (cmd.count(flag))
                throw rhv::Error(rhv::ErrorKind::InvalidModel, std::string(flag) + " does not apply to --method ibp");
}

rhv::ObbtConfig obbt_config(const RunConfig &cfg)
{
    rhv::ObbtConfig oc;
    oc.horizon = cfg.horizon;
    oc.per_instance_time_limit_s = cfg.time_limit;
    oc.total_time_limit_s = cfg.total_time_limit;
    oc.workers = cfg.workers;
    oc.early_stop = !cfg.no_early_stop;
    oc.tighten_output = cfg.tighten_output;
    return oc;
}

struct Tightened {
    rhv::BoundStore bounds;
    rhv::BoundsMetadata meta;
    double seconds = 0.0;
};

Tightened run_tightening(const RunConfig &cfg, const rhv::NetworkGraph &net, const rhv::IntervalVector &box)
{
    const auto start = std::chrono::steady_clock::now();
    Tightened out;
    out.meta.method = cfg.method;
    if (cfg.method == "ibp") {
        out.bounds = rhv::ibp_forward(net, box);
    } else {
        const auto oc = obbt_config(cfg);
        const auto res = cfg.method == "lp" ? rhv::lp_tighten(net, box, oc) : rhv::obbt_rh(net, box, oc);
        out.bounds = res.bounds;
        out.meta.windows = res.summary.windows;
        if (cfg.method == "obbt-rh")
            out.meta.horizon = cfg.horizon;
        log("tightening: " + std::to_string(res.summary.windows.size()) + " windows, " +
            std::to_string(res.summary.subproblems) + " subproblems, " + std::to_string(res.summary.skipped) +
            " skipped, " + std::to_string(res.summary.early_stopped) + " early-stopped, " +
            std::to_string(res.summary.time_limited) + " time-limited" +
            (res.summary.budget_exhausted ? ", total budget exhausted" : ""));
    }
    out.seconds = elapsed_since(start);
    log("tightening took " + fmt(out.seconds) + " s");
    return out;
}

void add_common(CLI::App *cmd, RunConfig &cfg)
{
    cmd->add_option("--model", cfg.model_path, "network JSON")->required();
    cmd->add_option("--method", cfg.method, "bound tightening method")
        ->check(CLI::IsMember({"ibp", "lp", "obbt-rh"}));
    cmd->add_option("--horizon", cfg.horizon, "Gemm layers per window (obbt-rh)")->check(CLI::PositiveNumber);
    cmd->add_option("--time-limit", cfg.time_limit, "seconds per tightening subproblem [env RHV_TIME_LIMIT]")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--total-time-limit", cfg.total_time_limit,
                    "seconds for the whole tightening stage [env RHV_TOTAL_TIME_LIMIT]")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--workers", cfg.workers, "parallel subproblem solvers")->check(CLI::Range(1u, 1024u));
    cmd->add_flag("--tighten-output", cfg.tighten_output, "also tighten the output layer");
    cmd->add_flag("--no-early-stop", cfg.no_early_stop, "solve every subproblem to completion");
    cmd->add_flag("--verbose,-v", cfg.verbose, "log progress to stderr");
}

rhv::PropertySpec load_property(const std::string &path)
{
    const auto text = rhv::read_file(path);
    try {
        return rhv::parse_vnnlib(text);
    } catch (const rhv::Error &e) {
        throw rhv::Error(e.kind(), path + ": " + e.message(), e.byte_offset());
    }
}

rhv::NetworkGraph load_model(const std::string &path)
{
    const auto text = rhv::read_file(path);
    try {
        return rhv::parse_network_json(text);
    } catch (const rhv::Error &e) {
        throw rhv::Error(e.kind(), path + ": " + e.message(), e.byte_offset());
    }
}

rhv::ReportConfig report_config(const RunConfig &cfg, bool imported)
{
    rhv::ReportConfig out{{"model", cfg.model_path},
                          {"property", cfg.property_path},
                          {"method", imported ? "imported" : cfg.method}};
    if (imported)
        out.emplace_back("bounds_in", cfg.bounds_in);
    if (cfg.method == "obbt-rh" && !imported)
        out.emplace_back("horizon", std::to_string(cfg.horizon));
    out.emplace_back("cutoff_zero", cfg.cutoff_zero ? "true" : "false");
    out.emplace_back("tighten_output", cfg.tighten_output ? "true" : "false");
    return out;
}

int cmd_verify(RunConfig &cfg, const CLI::App &cmd)
{
    apply_env(cfg, cmd);
    check_method_flags(cfg, cmd);
    const bool imported = !cfg.bounds_in.empty();
    if (imported && cmd.count("--method"))
        throw rhv::Error(rhv::ErrorKind::InvalidModel, "--method conflicts with --bounds-in");
    const auto net = load_model(cfg.model_path);
    const auto prop = load_property(cfg.property_path);
    const std::string bounds_text = imported ? rhv::read_file(cfg.bounds_in) : std::string();

    rhv::Verdict verdict;
    rhv::BoundStore bounds;
    rhv::Timings times;
    if (prop.empty_input_box()) {
        verdict = rhv::vacuous_verdict("property input box is empty");
    } else {
        try {
            if (imported) {
                bounds = rhv::parse_bounds_json(bounds_text, net, prop.input_box);
                for (std::size_t k = 0; k < prop.input_box.size() && k < bounds.input().size(); ++k)
                    if (!bounds.input()[k].contains(prop.input_box[k]))
                        throw rhv::Error(rhv::ErrorKind::InvalidModel,
                                         cfg.bounds_in + ": input box does not cover the property's X_" +
                                             std::to_string(k));
            } else {
                auto t = run_tightening(cfg, net, prop.input_box);
                bounds = std::move(t.bounds);
                times.tightening = t.seconds;
                if (!cfg.bounds_out.empty())
                    rhv::write_file(cfg.bounds_out, rhv::emit_bounds_json(bounds, t.meta));
            }
            rhv::VerifyControls vc;
            vc.cutoff_zero = cfg.cutoff_zero;
            vc.time_limit_s = cfg.mip_time_limit;
            verdict = rhv::verify(net, prop, bounds, vc);
            times.verification = verdict.total_time;
        } catch (const rhv::Error &e) {
            if (e.kind() != rhv::ErrorKind::InfeasibleBounds)
                throw;
            verdict = rhv::vacuous_verdict(e.what());
        }
    }

    rhv::MetricsReport metrics;
    if (bounds.num_gemms() == net.num_gemms()) {
        metrics = rhv::compute_metrics(bounds, times, imported ? "imported" : cfg.method);
        metrics.lp_bounds = rhv::lp_bound_of_final_mip(net, prop, bounds);
    }
    for (const auto &c : verdict.certificate)
        log("clause " + std::to_string(c.clause) + ": " + rhv::to_string(c.status) + ", dual bound " +
            fmt(c.dual_bound) + ", " + std::to_string(c.nodes) + " nodes");
    if (!cfg.report_path.empty())
        rhv::write_file(cfg.report_path, rhv::emit_report_json(verdict, metrics, bounds, report_config(cfg, imported)));

    std::cout << rhv::to_string(verdict.outcome);
    if (verdict.counterexample) {
        std::cout << " counterexample:";
        for (double v : *verdict.counterexample)
            std::cout << " " << fmt(v);
    }
    std::cout << "\n";
    switch (verdict.outcome) {
    case rhv::Outcome::Holds: return kExitHolds;
    case rhv::Outcome::Violated: return kExitViolated;
    case rhv::Outcome::Unknown: return kExitUnknown;
    }
    return kExitError;
}

int cmd_tighten(RunConfig &cfg, const CLI::App &cmd)
{
    apply_env(cfg, cmd);
    check_method_flags(cfg, cmd);
    const auto net = load_model(cfg.model_path);
    const auto prop = load_property(cfg.property_path);
    if (prop.empty_input_box())
        throw rhv::Error(rhv::ErrorKind::InfeasibleBounds, cfg.property_path + ": input box is empty");
    const auto t = run_tightening(cfg, net, prop.input_box);
    const auto json = rhv::emit_bounds_json(t.bounds, t.meta);
    if (cfg.bounds_out.empty())
        std::cout << json;
    else
        rhv::write_file(cfg.bounds_out, json);
    return 0;
}

int cmd_report(const RunConfig &cfg)
{
    const auto net = load_model(cfg.model_path);
    std::optional<rhv::PropertySpec> prop;
    if (!cfg.property_path.empty())
        prop = load_property(cfg.property_path);
    const auto bounds = rhv::parse_bounds_json(rhv::read_file(cfg.bounds_in), net,
                                               prop ? std::optional(prop->input_box) : std::nullopt);
    auto metrics = rhv::compute_metrics(bounds, {}, "imported");
    if (prop)
        metrics.lp_bounds = rhv::lp_bound_of_final_mip(net, *prop, bounds);
    const auto json = rhv::emit_metrics_json(metrics);
    if (cfg.bounds_out.empty())
        std::cout << json;
    else
        rhv::write_file(cfg.bounds_out, json);
    return 0;
}

struct FixtureArgs {
    std::uint64_t seed = 0;
    std::string model_out;
    std::string property_out;
    int chain = 0;
    std::size_t inputs = 3;
    std::size_t width = 4;
    std::size_t outputs = 2;
    rhv::FixtureOptions options;
};

int cmd_fixture(const FixtureArgs &args)
{
    rhv::NetworkGraph net;
    rhv::PropertySpec prop;
    if (args.chain > 0) {
        net = rhv::chain_network(args.seed, args.chain, args.inputs, args.width, args.outputs);
        std::mt19937_64 rng(args.seed ^ 0x9e3779b97f4a7c15ULL);
        prop = rhv::random_property(rng, net, rhv::IntervalVector(args.inputs, rhv::Interval{-1.0, 1.0}));
    } else {
        auto fx = rhv::random_fixture(args.seed, args.options);
        net = std::move(fx.net);
        prop = std::move(fx.property);
    }
    rhv::write_file(args.model_out, rhv::emit_network_json(net));
    rhv::write_file(args.property_out, rhv::emit_vnnlib(prop));
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Bound tightening and MILP verification for ReLU networks"};
    app.require_subcommand(1);

    RunConfig cfg;
    FixtureArgs fx;

    auto *verify = app.add_subcommand("verify", "tighten bounds, then decide the property");
    add_common(verify, cfg);
    verify->add_option("--property", cfg.property_path, "VNN-LIB property")->required();
    verify->add_option("--mip-time-limit", cfg.mip_time_limit, "seconds per verification clause")
        ->check(CLI::PositiveNumber);
    verify->add_flag("!--no-cutoff-zero", cfg.cutoff_zero, "disable pruning at objective 0");
    verify->add_flag("--cutoff-zero", cfg.cutoff_zero, "prune nodes that cannot go below 0 (default)");
    verify->add_option("--bounds-in", cfg.bounds_in, "use exported bounds instead of tightening");
    verify->add_option("--bounds-out", cfg.bounds_out, "write the tightened bounds");
    verify->add_option("--report", cfg.report_path, "write the report JSON");

    auto *tighten = app.add_subcommand("tighten", "only run bound tightening");
    add_common(tighten, cfg);
    tighten->add_option("--property", cfg.property_path, "VNN-LIB property (input box)")->required();
    tighten->add_option("--out,--bounds-out", cfg.bounds_out, "bounds JSON (default stdout)");

    auto *report = app.add_subcommand("report", "metrics for an exported bound store");
    report->add_option("--model", cfg.model_path, "network JSON")->required();
    report->add_option("--bounds-in", cfg.bounds_in, "bounds JSON")->required();
    report->add_option("--property", cfg.property_path, "property for LP bounds");
    report->add_option("--out", cfg.bounds_out, "metrics JSON (default stdout)");
    report->add_flag("--verbose,-v", cfg.verbose, "log progress to stderr");

    auto *fixture = app.add_subcommand("fixture", "write a seeded random network and property");
    fixture->add_option("--seed", fx.seed, "random seed")->required();
    fixture->add_option("--model-out", fx.model_out, "network JSON path")->required();
    fixture->add_option("--property-out", fx.property_out, "VNN-LIB path")->required();
    fixture->add_option("--chain", fx.chain, "fixed chain of this many Gemm layers")->check(CLI::Range(1, 64));
    fixture->add_option("--inputs", fx.inputs, "chain input width")->check(CLI::Range(1, 1024));
    fixture->add_option("--width", fx.width, "chain hidden width")->check(CLI::Range(1, 1024));
    fixture->add_option("--outputs", fx.outputs, "chain output width")->check(CLI::Range(1, 1024));
    fixture->add_option("--max-gemms", fx.options.max_gemms, "random depth upper limit")->check(CLI::Range(1, 8));
    fixture->add_option("--max-width", fx.options.max_width, "random width upper limit")->check(CLI::Range(1, 64));
    fixture->add_option("--max-unstable", fx.options.max_unstable, "unstable ReLU limit")->check(CLI::Range(0, 64));
    fixture->add_flag("--skip-connections", fx.options.skip_connections, "allow Gemms to read earlier ReLUs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitError;
    }
    g_verbose = cfg.verbose;
    if (fx.options.min_gemms > fx.options.max_gemms)
        fx.options.min_gemms = fx.options.max_gemms;

    try {
        if (*verify)
            return cmd_verify(cfg, *verify);
        if (*tighten)
            return cmd_tighten(cfg, *tighten);
        if (*report)
            return cmd_report(cfg);
        return cmd_fixture(fx);
    } catch (const rhv::Error &e) {
        std::cerr << "rhv: error: " << e.what();
        if (e.byte_offset())
            std::cerr << " (byte " << *e.byte_offset() << ")";
        std::cerr << "\n";
    } catch (const std::exception &e) {
        std::cerr << "rhv: error: " << e.what() << "\n";
    }
    return kExitError;
}
