// Command-line front end: run scenarios, list built-ins, print admission plans.
#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "accelshape/simulator.hpp"
#include "accelshape/suite.hpp"

using namespace accelshape;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

std::vector<Scenario> resolve(const std::string& what) {
    if (fs::exists(what)) return {load_scenario(what)};
    if (auto b = find_builtin(what)) return b->cells;
    throw ConfigError("scenario", "'" + what + "' is neither a file nor a built-in scenario");
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw ConfigError("--seeds", "expected a..b");
    auto num = [&](std::string_view part) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || p != part.data() + part.size())
            throw ConfigError("--seeds", "bad number '" + std::string(part) + "'");
        return v;
    };
    const std::string_view all(text);
    const auto a = num(all.substr(0, dots));
    const auto b = num(all.substr(dots + 2));
    if (b < a) throw ConfigError("--seeds", "empty range");
    return {a, b};
}

void report(const RunResult& r) {
    std::cout << r.scenario << "  events=" << r.summary.events
              << (r.summary.conserved ? "" : "  CONSERVATION VIOLATED: " + r.summary.violation)
              << "\n";
    for (const auto& t : r.tenants) {
        std::cout << "  " << std::left << std::setw(10) << t.tenant_id << std::right << std::fixed
                  << std::setprecision(3) << std::setw(9) << t.gbps << " Gbps " << std::setw(14)
                  << std::setprecision(0) << t.iops << " IOPS  p50 " << std::setprecision(1)
                  << t.p50_ns << " ns  p99 " << t.p99_ns << " ns  policed " << t.policed_ops
                  << "\n";
    }
}

int run_cells(const std::vector<Scenario>& cells, const fs::path& out) {
    int rc = 0;
    for (const auto& s : cells) {
        const auto r = run(s);
        emit_csv(r, out);
        report(r);
        if (!r.summary.conserved) rc = 1;
    }
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-tenant accelerator I/O contention simulator"};
    app.require_subcommand(1);

    std::string scenario, out, shaping, seeds;
    std::uint64_t seed = 0;
    std::int64_t duration = 0;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario file or built-in and write CSVs");
    run_cmd->add_option("--scenario", scenario, "Scenario file or built-in name")->required();
    run_cmd->add_option("--out", out, "Output directory")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the scenario seed");
    auto* dur_opt = run_cmd->add_option("--duration-ns", duration, "Override simulated duration")
                        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--shaping", shaping, "Force shaping on or off")
        ->check(CLI::IsMember({"on", "off"}));
    run_cmd->add_option("--seeds", seeds, "Run every seed in a..b, one subdirectory each");

    app.add_subcommand("list", "List built-in scenarios");

    std::string plan_scenario;
    auto* plan_cmd = app.add_subcommand("plan", "Print the shaper admission report");
    plan_cmd->add_option("--scenario", plan_scenario, "Scenario file or built-in name")->required();

    std::string all_out;
    auto* all_cmd = app.add_subcommand("run-all", "Run every built-in scenario");
    all_cmd->add_option("--out", all_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("list")) {
            for (const auto& b : scenario_suite())
                std::cout << std::left << std::setw(18) << b.name << std::setw(4)
                          << b.cells.size() << b.description << "\n";
            return 0;
        }
        if (app.got_subcommand("plan")) {
            for (const auto& s : resolve(plan_scenario)) {
                std::cout << "# " << s.name << "\n";
                if (s.slas.empty()) {
                    std::cout << "(no SLAs)\n";
                    continue;
                }
                const auto plan = plan_for(s);
                print_admission_report(std::cout, plan);
                if (!plan.all_feasible()) return kExitInfeasible;
            }
            return 0;
        }
        if (app.got_subcommand("run-all")) {
            int rc = 0;
            for (const auto& b : scenario_suite()) rc = std::max(rc, run_cells(b.cells, all_out));
            return rc;
        }

        auto cells = resolve(scenario);
        for (auto& s : cells) {
            if (*dur_opt) s.duration_ns = duration;
            if (*seed_opt) s.seed = seed;
            if (shaping == "on") {
                s.shaping_enabled = true;
                s.protocol_mode = ProtocolMode::Pull;
            } else if (shaping == "off") {
                s.shaping_enabled = false;
            }
            s.validate();
        }
        if (seeds.empty()) return run_cells(cells, out);
        const auto [first, last] = parse_seed_range(seeds);
        int rc = 0;
        for (auto sd = first; sd <= last; ++sd) {
            for (auto& s : cells) s.seed = sd;
            rc = std::max(rc, run_cells(cells, fs::path(out) / ("seed-" + std::to_string(sd))));
        }
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasibleSla& e) {
        std::cerr << "infeasible SLA: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
