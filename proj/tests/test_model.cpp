#include <doctest.h>

#include <json.hpp>

#include "accelshape/model.hpp"

using namespace accelshape;

namespace {

AcceleratorProfile two_point(Gbps lo, Gbps hi, EgressRule egress = Proportional{1.0}) {
    return {"p", {{1024, lo}, {4096, hi}}, egress, 0};
}

// Independent log2-linear interpolation between two points.
double oracle_interp(double s0, double t0, double s1, double t1, double s) {
    const double f = (std::log2(s) - std::log2(s0)) / (std::log2(s1) - std::log2(s0));
    return t0 + f * (t1 - t0);
}

}  // namespace

TEST_CASE("interpolation on a constant curve is constant") {
    CHECK(interpolate_throughput(two_point(10, 10), MessageSize(2048)) == doctest::Approx(10));
}

TEST_CASE("interpolation is linear in log2 of the size") {
    CHECK(interpolate_throughput(two_point(8, 16), MessageSize(2048)) ==
          doctest::Approx(oracle_interp(1024, 8, 4096, 16, 2048)));
    CHECK(interpolate_throughput(two_point(8, 16), MessageSize(3000)) ==
          doctest::Approx(oracle_interp(1024, 8, 4096, 16, 3000)));
}

TEST_CASE("interpolation clamps outside the curve") {
    CHECK(interpolate_throughput(two_point(8, 16), MessageSize(64)) == doctest::Approx(8));
    CHECK(interpolate_throughput(two_point(8, 16), MessageSize(1 << 20)) == doctest::Approx(16));
}

TEST_CASE("egress sizes") {
    CHECK(egress_size(Proportional{1.0}, MessageSize(4096)).bytes() == 4096);
    CHECK(egress_size(FixedOutput{64}, MessageSize(1048576)).bytes() == 64);
    CHECK(egress_size(Proportional{0.5}, MessageSize(4096)).bytes() == 2048);
    CHECK(egress_size(Proportional{0.5}, MessageSize(3)).bytes() == 2);  // 1.5 rounds up
    CHECK(egress_size(Proportional{0.001}, MessageSize(10)).bytes() == 1);
}

TEST_CASE("message size bounds") {
    CHECK_THROWS_AS(MessageSize(0), std::invalid_argument);
    CHECK_THROWS_AS(MessageSize((1u << 22) + 1), std::invalid_argument);
    CHECK(MessageSize(1u << 22).bits() == (1u << 22) * 8ull);
}

TEST_CASE("requirement for an egress SLA divides by R") {
    Sla sla{"t", RateMetric::Gbps, 5};
    const auto p = two_point(100, 100, Proportional{0.5});
    const auto req = requirement_for(&p, sla, MessageSize(4096));
    CHECK(req.feasible);
    CHECK(req.rate == doctest::Approx(5 / 0.5));
}

TEST_CASE("requirement for an IOPS SLA is ops times bits") {
    Sla sla{"t", RateMetric::Iops, 1e6};
    const auto p = two_point(100, 100);
    CHECK(requirement_for(&p, sla, MessageSize(1024)).rate == doctest::Approx(1e6 * 1024 * 8 / 1e9));
}

TEST_CASE("requirement above accelerator capacity is infeasible") {
    Sla sla{"t", RateMetric::Gbps, 5};
    const auto p = two_point(9, 9, Proportional{0.5});
    const auto req = requirement_for(&p, sla, MessageSize(2048));
    CHECK_FALSE(req.feasible);
    CHECK(req.binding == BindingConstraint::Accelerator);
    CHECK_THROWS_AS(invert_sla(p, sla, MessageSize(2048)), InfeasibleSla);
}

TEST_CASE("ingress-measured SLA needs no inversion") {
    Sla sla{"t", RateMetric::Gbps, 5, kUnbounded, MeasuredAt::Ingress};
    const auto p = two_point(100, 100, Proportional{0.25});
    CHECK(requirement_for(&p, sla, MessageSize(4096)).rate == doctest::Approx(5));
}

TEST_CASE("profile JSON round trip and strictness") {
    const auto p = two_point(8, 16, FixedOutput{64});
    CHECK(to_json(profile_from_json(to_json(p))) == to_json(p));

    auto j = to_json(p);
    j["colour"] = "red";
    try {
        profile_from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("profile.colour") != std::string::npos);
    }
    auto unsorted = to_json(p);
    unsorted["curve"] = {{4096, 1}, {1024, 2}};
    CHECK_THROWS_AS(profile_from_json(unsorted), ConfigError);
}

TEST_CASE("pcie config validation") {
    CHECK_NOTHROW(default_pcie().validate());
    auto c = default_pcie();
    c.max_payload_size = 300;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = default_pcie();
    c.link_rate = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("sla validation") {
    CHECK_THROWS_AS((Sla{"t", RateMetric::Gbps, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((Sla{"t", RateMetric::Gbps, 5, 4}.validate()), ConfigError);
}
