#include <doctest.h>

#include <map>

#include "accelshape/fabric.hpp"

using namespace accelshape;

namespace {

PcieConfig cfg64() {
    auto c = default_pcie();
    c.link_rate = 64;
    return c;
}

}  // namespace

TEST_CASE("write segmentation") {
    const auto c = default_pcie();
    auto t = segment(MessageSize(4096), DmaKind::Write, c);
    CHECK(t.size() == 16);
    for (const auto& x : t) CHECK(x.payload_bytes == 256);
    CHECK(t.back().last_of_message);
    CHECK_FALSE(t.front().last_of_message);

    t = segment(MessageSize(300), DmaKind::Write, c);
    REQUIRE(t.size() == 2);
    CHECK(t[0].payload_bytes == 256);
    CHECK(t[1].payload_bytes == 44);
}

TEST_CASE("read segmentation and completion chunking") {
    const auto c = default_pcie();
    const auto t = segment(MessageSize(4096), DmaKind::Read, c);
    CHECK(t.size() == 8);
    for (const auto& r : t) {
        CHECK(r.kind == TlpKind::MemReadReq);
        CHECK(r.payload_bytes == 0);
        const auto chunks = completion_chunks(r.request_bytes, c);
        CHECK(chunks == std::vector<std::uint32_t>{256, 256});
    }
}

TEST_CASE("serialization times") {
    LinkChannel ch(Direction::AccelToHost, 64, 32, 16384);
    Tlp w;
    w.payload_bytes = 256;
    w.header_bytes = 24;
    CHECK(ch.schedule_tlp(w, 0) == from_ns(280 * 8 / 64));  // 35 ns

    LinkChannel idle(Direction::AccelToHost, 64, 32, 16384);
    Tlp rq;
    rq.kind = TlpKind::MemReadReq;
    rq.header_bytes = 24;
    CHECK(idle.schedule_tlp(rq, 0) == from_ns(24 * 8 / 64));  // 3 ns
}

TEST_CASE("a busy channel starts the next TLP when it frees up") {
    LinkChannel ch(Direction::AccelToHost, 64, 32, 16384);
    Tlp w;
    w.payload_bytes = 776;  // 800 B on the wire: 100 ns
    w.header_bytes = 24;
    const SimTime first = ch.schedule_tlp(w, 0);
    CHECK(first == from_ns(100));
    CHECK(ch.schedule_tlp(w, from_ns(10)) == from_ns(200));
}

TEST_CASE("credits are debited and must cover the TLP") {
    LinkChannel ch(Direction::AccelToHost, 64, 1, 300);
    Tlp w;
    w.payload_bytes = 256;
    w.header_bytes = 24;
    CHECK(ch.has_credits(w));
    ch.schedule_tlp(w, 0);
    CHECK(ch.header_credits() == 0);
    CHECK(ch.data_credits() == 44);
    CHECK_THROWS_AS(ch.schedule_tlp(w, 0), InsufficientCredits);
    ch.return_credits(w);
    CHECK(ch.header_credits() == 1);
    CHECK(ch.data_credits() == 300);
}

TEST_CASE("effective peak") {
    const auto c = default_pcie();
    CHECK(effective_peak(c, MessageSize(4096), DmaKind::Write) == doctest::Approx(63.0 * 256 / 280));
    auto bare = c;
    bare.tlp_header_bytes = 0;
    // A zero header is not a valid PcieConfig, but the formula still applies.
    CHECK(effective_peak(bare, MessageSize(4096), DmaKind::Write) == doctest::Approx(63.0));
    // Reads: two 256 B completions per 512 B request.
    CHECK(effective_peak(c, MessageSize(4096), DmaKind::Read) == doctest::Approx(63.0 * 512 / 560));
}

TEST_CASE("round robin arbitration") {
    std::vector<QpState> qps(3);
    for (int i = 0; i < 3; ++i) {
        qps[i].qp_id = i;
        qps[i].tenant = i < 2 ? 0 : 1;
        qps[i].pending.resize(1);
    }
    std::map<int, int> grants;
    std::size_t cursor = 0;
    for (int k = 0; k < 300; ++k) {
        auto g = arbitrate(qps, cursor);
        REQUIRE(g);
        ++grants[qps[g->selected].tenant];
        cursor = g->cursor;
    }
    CHECK(grants[0] == 200);
    CHECK(grants[1] == 100);

    qps[1].pending.clear();
    qps[2].pending.clear();
    for (int k = 0; k < 5; ++k) {
        auto g = arbitrate(qps, cursor);
        REQUIRE(g);
        CHECK(g->selected == 0);
        cursor = g->cursor;
    }
    qps[0].pending.clear();
    CHECK_FALSE(arbitrate(qps, cursor));
}

TEST_CASE("eligibility veto skips a QP") {
    std::vector<QpState> qps(2);
    qps[0].pending.resize(1);
    qps[1].pending.resize(1);
    qps[1].qp_id = 1;
    auto g = arbitrate(qps, 0, [](const QpState& q) { return q.qp_id == 1; });
    REQUIRE(g);
    CHECK(g->selected == 1);
}

TEST_CASE("a lone write takes serialization plus nothing else") {
    EventQueue ev;
    Fabric f(ev, cfg64(), Arbitration::PerTlpRR);
    const int qp = f.add_qp(0);
    SimTime done = -1;
    f.post_write(qp, 256, false, [&](SimTime at) { done = at; });
    ev.run_until(from_ns(10'000));
    CHECK(done == from_ns(35));
    CHECK(f.totals().delivered_bytes == 256);
    CHECK(f.totals().in_flight() == 0);
}

TEST_CASE("a lone read pays request, host latency and completions") {
    EventQueue ev;
    auto c = cfg64();
    Fabric f(ev, c, Arbitration::PerTlpRR);
    const int qp = f.add_qp(0);
    SimTime done = -1;
    f.post_read(qp, 512, false, [&](SimTime at) { done = at; });
    ev.run_until(from_ns(10'000));
    // 3 ns request, 500 ns host, two 280 B completions back to back (70 ns).
    CHECK(done == from_ns(3 + 500 + 70));
}

TEST_CASE("per-QP TLP order is preserved") {
    EventQueue ev;
    Fabric f(ev, default_pcie(), Arbitration::PerTlpRR);
    const int a = f.add_qp(0);
    const int b = f.add_qp(1);
    std::map<int, std::vector<std::uint64_t>> seen;
    f.set_trace([&](const Tlp& t, SimTime) { seen[t.qp].push_back(t.parent_msg); });
    for (int i = 0; i < 20; ++i) {
        f.post_write(a, 1000, false, [](SimTime) {});
        f.post_write(b, 300, false, [](SimTime) {});
    }
    ev.run_until(from_ns(1'000'000));
    for (auto& [qp, msgs] : seen) CHECK(std::is_sorted(msgs.begin(), msgs.end()));
    CHECK(f.totals().in_flight() == 0);
}

TEST_CASE("sub-cacheline writes hold credits through the read-modify-write") {
    EventQueue ev;
    auto c = default_pcie();
    c.credit_headers = 4;
    Fabric f(ev, c, Arbitration::PerTlpRR);
    const int qp = f.add_qp(0);
    std::vector<SimTime> done;
    for (int i = 0; i < 8; ++i) f.post_write(qp, 16, false, [&](SimTime at) { done.push_back(at); });
    ev.run_until(from_ns(100'000));
    REQUIRE(done.size() == 8);
    // The last four wait for the first four merges (3 x 90 ns each) to free credits.
    CHECK(done.back() >= from_ns(4 * 270));
    CHECK(done[3] < from_ns(270));
}
