#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "accelshape/simulator.hpp"
#include "accelshape/suite.hpp"

using namespace accelshape;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "name": "mini",
        "duration_ns": 200000,
        "flows": [
            {"tenant_id": "a", "direction": "AtH", "size": {"fixed": 4096}, "qp_count": 2},
            {"tenant_id": "b", "direction": "AtH", "size": {"fixed": 4096}}
        ]
    })");
}

std::string error_path(const json& j) {
    try {
        scenario_from_json(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "";
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("scenario JSON parses with defaults") {
    const auto s = scenario_from_json(minimal());
    CHECK(s.name == "mini");
    CHECK(s.flows.size() == 2);
    CHECK(s.flows[0].qp_count == 2);
    CHECK(s.pcie.link_rate == doctest::Approx(63));
    CHECK(s.protocol_mode == ProtocolMode::Push);
    CHECK(s.series_windows == 100);
}

TEST_CASE("scenario JSON round trips") {
    for (const auto& b : scenario_suite()) {
        for (const auto& s : b.cells) {
            const auto j = to_json(s);
            CHECK(to_json(scenario_from_json(j)) == j);
        }
    }
}

TEST_CASE("config errors name the field") {
    auto j = minimal();
    j["flows"][1]["colour"] = 1;
    CHECK(error_path(j) == "flows[1].colour");

    j = minimal();
    j["duration_ns"] = 0;
    CHECK(error_path(j) == "duration_ns");

    j = minimal();
    j["flows"][1]["tenant_id"] = "a";
    CHECK(error_path(j) == "flows[1].tenant_id");

    j = minimal();
    j["flows"][0]["accelerator"] = "nope";
    j["flows"][0]["direction"] = "HtA";
    CHECK(error_path(j) == "flows[0].accelerator");

    j = minimal();
    j["pcie"] = {{"max_payload_size", 100}};
    CHECK(error_path(j) == "pcie.max_payload_size");

    j = minimal();
    j["shaping_enabled"] = true;
    CHECK(error_path(j) == "shaping_enabled");

    j = minimal();
    j["slas"] = json::array({{{"tenant_id", "zz"}, {"min_rate", 1}}});
    CHECK(error_path(j) == "slas[0].tenant_id");
}

TEST_CASE("ratio and its infinity sentinel") {
    RunResult r;
    r.scenario = "x";
    r.tenants = {TenantMetrics{"a", 52}, TenantMetrics{"b", 26}, TenantMetrics{"c", 0},
                 TenantMetrics{"d", 26}};
    CHECK(ratio(r, "a", "b", MetricKind::Gbps) == doctest::Approx(2.0));
    CHECK(ratio(r, "b", "d", MetricKind::Gbps) == doctest::Approx(1.0));
    CHECK(format_ratio(ratio(r, "a", "c", MetricKind::Gbps)) == "inf");
}

TEST_CASE("percentile uses nearest rank") {
    CHECK(percentile({5, 1, 4, 2, 3}, 0.5) == 3);
    CHECK(percentile({5, 1, 4, 2, 3}, 0.99) == 5);
    CHECK(percentile({}, 0.5) == 0);
}

TEST_CASE("CSV layout") {
    const auto r = run(scenario_from_json(minimal()));
    const auto csv = csv_text(r);
    CHECK(csv.rfind("scenario,tenant,gbps,iops,p50_ns,p99_ns,policed_ops\n", 0) == 0);
    CHECK(count_lines(csv) == 3);
    const auto series = series_csv_text(r);
    CHECK(series.rfind("window_start_ns,tenant,gbps,iops\n", 0) == 0);
    CHECK(count_lines(series) == 1 + 100 * 2);
}

TEST_CASE("same seed gives identical files") {
    auto s = scenario_from_json(minimal());
    s.flows[1].size_dist = UniformChoice{{256, 1024, 4096}};
    const auto dir = std::filesystem::temp_directory_path() / "accelshape_det";
    std::filesystem::remove_all(dir);
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    emit_csv(run(s), dir / "1");
    emit_csv(run(s), dir / "2");
    CHECK(slurp(dir / "1" / "mini.csv") == slurp(dir / "2" / "mini.csv"));
    CHECK(slurp(dir / "1" / "mini.series.csv") == slurp(dir / "2" / "mini.series.csv"));
    CHECK_FALSE(slurp(dir / "1" / "mini.csv").empty());

    s.seed = 99;
    emit_csv(run(s), dir / "3");
    CHECK(slurp(dir / "1" / "mini.csv") != slurp(dir / "3" / "mini.csv"));
}

TEST_CASE("adding a flow does not perturb another tenant's draws") {
    auto s = scenario_from_json(minimal());
    s.flows[1].size_dist = UniformChoice{{256, 1024, 4096}};
    s.fabric_bypass = true;
    auto sizes = [](const Scenario& sc) {
        std::vector<std::uint64_t> out;
        Observers o;
        o.completion = [&](const CompletionInfo& c) {
            if (c.tenant == 1 && out.size() < 200) out.push_back(c.user_bytes);
        };
        run(sc, &o);
        return out;
    };
    const auto before = sizes(s);
    auto more = s;
    more.flows.push_back(more.flows[0]);
    more.flows.back().tenant_id = "z";
    CHECK(sizes(more) == before);
}

TEST_CASE("symmetric tenants split evenly") {
    auto s = scenario_from_json(minimal());
    s.flows[0].qp_count = 1;
    s.duration_ns = 1'000'000;
    const auto r = run(s);
    CHECK(ratio(r, "a", "b", MetricKind::Gbps) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("infeasible SLA aborts the run") {
    auto j = minimal();
    j["protocol_mode"] = "pull";
    j["shaping_enabled"] = true;
    j["slas"] = json::array({{{"tenant_id", "a"}, {"min_rate", 100}}});
    CHECK_THROWS_AS(run(scenario_from_json(j)), InfeasibleSla);
}

TEST_CASE("every built-in resolves and validates") {
    const auto suite = scenario_suite();
    CHECK(suite.size() == 10);
    for (const auto& b : suite) {
        CHECK_FALSE(b.cells.empty());
        CHECK(find_builtin(b.name));
        for (const auto& s : b.cells) CHECK_NOTHROW(s.validate());
    }
    const auto q = find_builtin("obs8_quadrants");
    REQUIRE(q);
    CHECK(q->cells.size() == 4);
    CHECK_FALSE(find_builtin("nope"));
}
