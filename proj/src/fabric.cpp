#include "accelshape/fabric.hpp"

#include <algorithm>
#include <cmath>

namespace accelshape {

std::vector<Tlp> segment(MessageSize msg, DmaKind kind, const PcieConfig& cfg) {
    const std::uint64_t unit = kind == DmaKind::Write ? cfg.max_payload_size : cfg.max_read_req_size;
    std::vector<Tlp> out;
    out.reserve(static_cast<std::size_t>((msg.bytes() + unit - 1) / unit));
    for (std::uint64_t off = 0; off < msg.bytes(); off += unit) {
        const auto len = static_cast<std::uint32_t>(std::min(unit, msg.bytes() - off));
        Tlp t;
        if (kind == DmaKind::Write) {
            t.kind = TlpKind::MemWrite;
            t.payload_bytes = len;
            t.header_bytes = cfg.tlp_header_bytes;
        } else {
            t.kind = TlpKind::MemReadReq;
            t.request_bytes = len;
            t.header_bytes = cfg.read_request_bytes;
        }
        t.last_of_message = false;
        out.push_back(t);
    }
    out.back().last_of_message = true;
    return out;
}

std::vector<std::uint32_t> completion_chunks(std::uint32_t request_bytes, const PcieConfig& cfg) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t off = 0; off < request_bytes; off += cfg.max_payload_size)
        out.push_back(std::min(cfg.max_payload_size, request_bytes - off));
    return out;
}

Gbps effective_peak(const PcieConfig& cfg, MessageSize msg, DmaKind kind) {
    const double payload = static_cast<double>(msg.bytes());
    if (kind == DmaKind::Write) {
        const auto tlps = segment(msg, kind, cfg).size();
        return cfg.link_rate * payload /
               (payload + static_cast<double>(tlps) * cfg.tlp_header_bytes);
    }
    double wire = 0;
    double round_trips_ns = 0;
    for (const auto& req : segment(msg, kind, cfg)) {
        const auto chunks = completion_chunks(req.request_bytes, cfg);
        const double down = req.request_bytes +
                            static_cast<double>(chunks.size()) * cfg.completion_header_bytes;
        wire += down;
        round_trips_ns += req.header_bytes * 8.0 / cfg.link_rate +
                          static_cast<double>(cfg.read_latency_ns) + down * 8.0 / cfg.link_rate;
    }
    const Gbps link_bound = cfg.link_rate * payload / wire;
    const Gbps tag_bound = cfg.max_read_tags * payload * 8.0 / round_trips_ns;
    return std::min(link_bound, tag_bound);
}

std::optional<ArbitrationGrant> arbitrate(std::span<const QpState> qps, std::size_t cursor,
                                          const std::function<bool(const QpState&)>& eligible) {
    const std::size_t n = qps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = (cursor + i) % n;
        const auto& q = qps[idx];
        if (!q.active()) continue;
        if (eligible && !eligible(q)) continue;
        return ArbitrationGrant{idx, (idx + 1) % n};
    }
    return std::nullopt;
}

LinkChannel::LinkChannel(Direction dir, Gbps rate, std::uint32_t header_credits,
                         std::uint64_t data_credits)
    : dir_(dir),
      rate_kbps_(std::llround(rate * 1e6)),
      headers_(header_credits),
      data_(data_credits) {}

bool LinkChannel::has_credits(const Tlp& tlp) const {
    return headers_ >= 1 && data_ >= tlp.payload_bytes;
}

SimTime LinkChannel::serialization(std::uint64_t bytes) const {
    const std::int64_t num = static_cast<std::int64_t>(bytes) * 8 * 1'000'000'000;
    return (num + rate_kbps_ - 1) / rate_kbps_;
}

SimTime LinkChannel::schedule_tlp(const Tlp& tlp, SimTime now) {
    if (!has_credits(tlp)) throw InsufficientCredits();
    headers_ -= 1;
    data_ -= tlp.payload_bytes;
    busy_until_ = std::max(now, busy_until_) + serialization(tlp.wire_bytes());
    return busy_until_;
}

void LinkChannel::return_credits(const Tlp& tlp) {
    headers_ += 1;
    data_ += tlp.payload_bytes;
}

Fabric::Fabric(EventQueue& events, PcieConfig cfg, Arbitration arbitration)
    : ev_(events),
      cfg_(cfg),
      arb_(arbitration),
      up_(Direction::AccelToHost, cfg.link_rate, cfg.credit_headers, cfg.credit_data_bytes),
      down_(Direction::HostToAccel, cfg.link_rate, cfg.credit_headers, cfg.credit_data_bytes) {}

int Fabric::add_qp(int tenant) {
    const int id = static_cast<int>(qps_.size());
    qps_.push_back(QpState{id, tenant, {}});
    counters_for(tenant);
    return id;
}

FabricCounters& Fabric::counters_for(int tenant) {
    if (tenant >= static_cast<int>(counters_.size()))
        counters_.resize(static_cast<std::size_t>(tenant) + 1);
    return counters_[static_cast<std::size_t>(tenant)];
}

const FabricCounters& Fabric::counters(int tenant) const {
    return counters_.at(static_cast<std::size_t>(tenant));
}

FabricCounters Fabric::totals() const {
    FabricCounters t;
    for (const auto& c : counters_) {
        t.submitted_bytes += c.submitted_bytes;
        t.delivered_bytes += c.delivered_bytes;
        t.up_tlps += c.up_tlps;
        t.down_tlps += c.down_tlps;
        t.metadata_bytes += c.metadata_bytes;
    }
    return t;
}

void Fabric::post_write(int qp, std::uint64_t bytes, bool metadata, Done done) {
    auto tlps = segment(MessageSize(bytes, ~std::uint64_t{0}), DmaKind::Write, cfg_);
    for (auto& t : tlps) t.metadata = metadata;
    post(qp, std::move(tlps), std::move(done), bytes);
}

void Fabric::post_read(int qp, std::uint64_t bytes, bool metadata, Done done) {
    auto tlps = segment(MessageSize(bytes, ~std::uint64_t{0}), DmaKind::Read, cfg_);
    for (auto& t : tlps) t.metadata = metadata;
    down_backlog_ += bytes;
    post(qp, std::move(tlps), std::move(done), bytes);
}

void Fabric::post(int qp, std::vector<Tlp> tlps, Done done, std::uint64_t bytes) {
    auto& q = qps_.at(static_cast<std::size_t>(qp));
    const std::uint64_t id = next_msg_++;
    auto& c = counters_for(q.tenant);
    c.submitted_bytes += bytes;
    if (tlps.front().metadata) c.metadata_bytes += bytes;
    messages_.emplace(id, Message{static_cast<std::uint32_t>(tlps.size()), std::move(done)});
    // Ring traffic comes from its own engine and does not queue behind the
    // QP's payload; it stays FIFO with earlier ring traffic. A message that
    // holds the per-message lock is not split.
    auto at = q.pending.end();
    if (tlps.front().metadata) {
        at = q.pending.begin();
        if (locked_qp_ == static_cast<std::size_t>(qp))
            while (at != q.pending.end() && !(at++)->last_of_message) {}
        while (at != q.pending.end() && at->metadata) ++at;
    }
    for (auto& t : tlps) {
        t.tenant = q.tenant;
        t.qp = qp;
        t.parent_msg = id;
        t.created = ev_.now();
        up_backlog_ += t.wire_bytes();
        at = std::next(q.pending.insert(at, t));
    }
    kick_up();
}

bool Fabric::eligible_up(const QpState& q) const {
    const auto& head = q.pending.front();
    if (!up_.has_credits(head)) return false;
    if (head.kind == TlpKind::MemReadReq && tags_in_use_ >= cfg_.max_read_tags) return false;
    return true;
}

void Fabric::kick_up() {
    if (up_wake_pending_) return;
    const SimTime now = ev_.now();
    if (up_.busy_until() > now) {
        up_wake_pending_ = true;
        ev_.schedule(up_.busy_until(), [this] {
            up_wake_pending_ = false;
            kick_up();
        });
        return;
    }
    std::optional<ArbitrationGrant> grant;
    if (locked_qp_) {
        const auto& q = qps_[*locked_qp_];
        if (!q.active() || !eligible_up(q)) return;
        grant = ArbitrationGrant{*locked_qp_, (*locked_qp_ + 1) % qps_.size()};
    } else {
        grant = arbitrate(qps_, cursor_, [this](const QpState& q) { return eligible_up(q); });
    }
    if (!grant) return;

    auto& q = qps_[grant->selected];
    Tlp tlp = q.pending.front();
    q.pending.pop_front();
    cursor_ = grant->cursor;
    locked_qp_.reset();
    if (arb_ == Arbitration::PerMessageRR && !tlp.last_of_message) locked_qp_ = grant->selected;
    if (tlp.kind == TlpKind::MemReadReq) ++tags_in_use_;
    up_backlog_ -= tlp.wire_bytes();
    ++counters_for(tlp.tenant).up_tlps;

    const SimTime arrival = up_.schedule_tlp(tlp, now);
    ev_.schedule(arrival, [this, tlp] { on_up_arrival(tlp); });
    up_wake_pending_ = true;
    ev_.schedule(arrival, [this] {
        up_wake_pending_ = false;
        kick_up();
    });
    if (progress_) progress_();
}

void Fabric::on_up_arrival(Tlp tlp) {
    const SimTime now = ev_.now();
    if (trace_) trace_(tlp, now);
    SimTime release = now + from_ns(cfg_.drain_latency_ns);
    if (tlp.kind == TlpKind::MemWrite) {
        // Sub-cacheline payload writes need a read-modify-write in the root
        // complex; the posted credit is held until that merge finishes.
        if (!tlp.metadata && tlp.payload_bytes < cfg_.cacheline_bytes) {
            const double fill = static_cast<double>(cfg_.cacheline_bytes - tlp.payload_bytes) /
                                static_cast<double>(tlp.payload_bytes);
            const auto cost = static_cast<SimTime>(
                std::llround(fill * static_cast<double>(from_ns(cfg_.partial_write_rmw_ns))));
            rmw_busy_until_ = std::max(rmw_busy_until_, now) + cost;
            release = std::max(release, rmw_busy_until_);
        }
        counters_for(tlp.tenant).delivered_bytes += tlp.payload_bytes;
        ev_.schedule(release, [this, tlp] {
            up_.return_credits(tlp);
            kick_up();
        });
        finish_piece(tlp.parent_msg, now);
        return;
    }
    // Read request reached the host: answer after the memory latency.
    ev_.schedule(release, [this, tlp] {
        up_.return_credits(tlp);
        kick_up();
    });
    const std::uint64_t rid = next_read_++;
    const auto chunks = completion_chunks(tlp.request_bytes, cfg_);
    reads_.emplace(rid, ReadReq{tlp, static_cast<std::uint32_t>(chunks.size())});
    ev_.schedule(now + from_ns(cfg_.read_latency_ns), [this, tlp, rid, chunks] {
        for (auto len : chunks) {
            Tlp c;
            c.kind = TlpKind::Completion;
            c.payload_bytes = len;
            c.header_bytes = cfg_.completion_header_bytes;
            c.tenant = tlp.tenant;
            c.qp = tlp.qp;
            c.parent_msg = rid;
            c.created = ev_.now();
            c.metadata = tlp.metadata;
            host_queue_.push_back(c);
        }
        kick_down();
    });
}

void Fabric::kick_down() {
    if (down_wake_pending_) return;
    const SimTime now = ev_.now();
    if (down_.busy_until() > now) {
        down_wake_pending_ = true;
        ev_.schedule(down_.busy_until(), [this] {
            down_wake_pending_ = false;
            kick_down();
        });
        return;
    }
    if (host_queue_.empty() || !down_.has_credits(host_queue_.front())) return;
    Tlp c = host_queue_.front();
    host_queue_.pop_front();
    ++counters_for(c.tenant).down_tlps;
    const SimTime arrival = down_.schedule_tlp(c, now);
    ev_.schedule(arrival, [this, c] { on_completion_arrival(c); });
    down_wake_pending_ = true;
    ev_.schedule(arrival, [this] {
        down_wake_pending_ = false;
        kick_down();
    });
}

void Fabric::on_completion_arrival(Tlp c) {
    const SimTime now = ev_.now();
    ev_.schedule(now + from_ns(cfg_.drain_latency_ns), [this, c] {
        down_.return_credits(c);
        kick_down();
    });
    counters_for(c.tenant).delivered_bytes += c.payload_bytes;
    down_backlog_ -= c.payload_bytes;
    auto it = reads_.find(c.parent_msg);
    if (--it->second.outstanding > 0) return;
    const std::uint64_t msg = it->second.req.parent_msg;
    reads_.erase(it);
    --tags_in_use_;
    finish_piece(msg, now);
    kick_up();
    if (progress_) progress_();
}

void Fabric::finish_piece(std::uint64_t msg, SimTime at) {
    auto it = messages_.find(msg);
    if (--it->second.outstanding > 0) return;
    Done done = std::move(it->second.done);
    messages_.erase(it);
    if (done) done(at);
}

}  // namespace accelshape
