// Transaction-level model of the host network between the device and the
// root complex: TLP segmentation, a credit-gated full-duplex link, and
// round-robin arbitration across hardware QPs.
//
// Channel naming follows the device's point of view: `up` carries what the
// device sends (memory writes, read requests), `down` carries what the host
// returns (read completions).
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "accelshape/event_queue.hpp"
#include "accelshape/model.hpp"

namespace accelshape {

enum class TlpKind { MemWrite, MemReadReq, Completion };
enum class DmaKind { Write, Read };
enum class Arbitration { PerTlpRR, PerMessageRR };

struct Tlp {
    TlpKind kind = TlpKind::MemWrite;
    std::uint32_t payload_bytes = 0;
    std::uint32_t header_bytes = 0;
    /// Bytes asked for by a MemReadReq; zero otherwise.
    std::uint32_t request_bytes = 0;
    int tenant = 0;
    int qp = 0;
    std::uint64_t parent_msg = 0;
    SimTime created = 0;
    bool last_of_message = true;
    /// Ring-protocol bookkeeping (descriptors, completion records) rather
    /// than tenant payload.
    bool metadata = false;

    std::uint32_t wire_bytes() const { return payload_bytes + header_bytes; }
};

/// Splits one DMA into TLPs. Writes become MemWrite TLPs of at most
/// max_payload_size; reads become MemReadReq TLPs of at most
/// max_read_req_size (their data comes back via completion_chunks).
std::vector<Tlp> segment(MessageSize msg, DmaKind kind, const PcieConfig& cfg);

/// Completion payload sizes answering one read request.
std::vector<std::uint32_t> completion_chunks(std::uint32_t request_bytes, const PcieConfig& cfg);

/// Analytic goodput ceiling for back-to-back messages of one size.
Gbps effective_peak(const PcieConfig& cfg, MessageSize msg, DmaKind kind);

struct QpState {
    int qp_id = 0;
    int tenant = 0;
    std::deque<Tlp> pending;

    bool active() const { return !pending.empty(); }
};

struct ArbitrationGrant {
    std::size_t selected;
    std::size_t cursor;
};

/// Strict round robin in qp order starting at `cursor`. `eligible` may veto
/// a QP whose head cannot go right now (credits, tags). Returns nullopt when
/// no QP can be served.
std::optional<ArbitrationGrant> arbitrate(
    std::span<const QpState> qps, std::size_t cursor,
    const std::function<bool(const QpState&)>& eligible = nullptr);

class InsufficientCredits : public std::runtime_error {
public:
    InsufficientCredits() : std::runtime_error("insufficient link credits") {}
};

class LinkChannel {
public:
    LinkChannel(Direction dir, Gbps rate, std::uint32_t header_credits,
                std::uint64_t data_credits);

    Direction direction() const { return dir_; }
    SimTime busy_until() const { return busy_until_; }
    std::uint32_t header_credits() const { return headers_; }
    std::uint64_t data_credits() const { return data_; }

    bool has_credits(const Tlp& tlp) const;
    SimTime serialization(std::uint64_t bytes) const;

    /// Occupies the channel for the TLP; returns when its last bit lands.
    /// Debits credits, which stay out until return_credits.
    SimTime schedule_tlp(const Tlp& tlp, SimTime now);
    void return_credits(const Tlp& tlp);

private:
    Direction dir_;
    std::int64_t rate_kbps_;
    SimTime busy_until_ = 0;
    std::uint32_t headers_;
    std::uint64_t data_;
};

struct FabricCounters {
    std::uint64_t submitted_bytes = 0;
    std::uint64_t delivered_bytes = 0;
    std::uint64_t up_tlps = 0;
    std::uint64_t down_tlps = 0;
    std::uint64_t metadata_bytes = 0;

    std::uint64_t in_flight() const { return submitted_bytes - delivered_bytes; }
};

/// The event-driven fabric. Messages are posted per QP; a callback fires
/// when the whole message has landed (writes) or returned (reads).
class Fabric {
public:
    using Done = std::function<void(SimTime)>;

    Fabric(EventQueue& events, PcieConfig cfg, Arbitration arbitration);
    Fabric(const Fabric&) = delete;
    Fabric& operator=(const Fabric&) = delete;

    int add_qp(int tenant);
    std::size_t qp_count() const { return qps_.size(); }

    void post_write(int qp, std::uint64_t bytes, bool metadata, Done done);
    void post_read(int qp, std::uint64_t bytes, bool metadata, Done done);

    /// Invoked whenever queued work leaves the device (a TLP was granted or
    /// a read returned); the shaper uses it to re-evaluate excess grants.
    void set_progress_hook(std::function<void()> hook) { progress_ = std::move(hook); }

    const PcieConfig& config() const { return cfg_; }
    const LinkChannel& up() const { return up_; }
    const LinkChannel& down() const { return down_; }
    const FabricCounters& counters(int tenant) const;
    FabricCounters totals() const;

    /// Wire bytes waiting in QP FIFOs.
    std::uint64_t up_backlog_bytes() const { return up_backlog_; }
    /// Read bytes requested and not yet returned.
    std::uint64_t down_backlog_bytes() const { return down_backlog_; }
    std::uint32_t tags_in_use() const { return tags_in_use_; }
    const QpState& qp(int id) const { return qps_.at(static_cast<std::size_t>(id)); }
    /// Arrival order of up-channel TLPs per QP, for ordering checks.
    void set_trace(std::function<void(const Tlp&, SimTime)> trace) { trace_ = std::move(trace); }

private:
    struct Message {
        std::uint32_t outstanding;
        Done done;
    };
    struct ReadReq {
        Tlp req;
        std::uint32_t outstanding;
    };

    void post(int qp, std::vector<Tlp> tlps, Done done, std::uint64_t bytes);
    void kick_up();
    void kick_down();
    bool eligible_up(const QpState& q) const;
    void on_up_arrival(Tlp tlp);
    void on_completion_arrival(Tlp tlp);
    void finish_piece(std::uint64_t msg, SimTime at);
    FabricCounters& counters_for(int tenant);

    EventQueue& ev_;
    PcieConfig cfg_;
    Arbitration arb_;
    LinkChannel up_;
    LinkChannel down_;
    std::vector<QpState> qps_;
    std::size_t cursor_ = 0;
    std::optional<std::size_t> locked_qp_;
    bool up_wake_pending_ = false;
    bool down_wake_pending_ = false;
    std::deque<Tlp> host_queue_;
    std::uint32_t tags_in_use_ = 0;
    SimTime rmw_busy_until_ = 0;
    std::uint64_t next_msg_ = 1;
    std::unordered_map<std::uint64_t, Message> messages_;
    std::unordered_map<std::uint64_t, ReadReq> reads_;
    std::uint64_t next_read_ = 1;
    std::vector<FabricCounters> counters_;
    std::uint64_t up_backlog_ = 0;
    std::uint64_t down_backlog_ = 0;
    std::function<void()> progress_;
    std::function<void(const Tlp&, SimTime)> trace_;
};

}  // namespace accelshape
