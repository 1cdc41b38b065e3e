#include "accelshape/device.hpp"

#include <algorithm>
#include <stdexcept>

namespace accelshape {

void RingConfig::validate(const std::string& path) const {
    if (sq_depth < 1) throw ConfigError(path + ".sq_depth", "must be >= 1");
    if (cq_depth < 1) throw ConfigError(path + ".cq_depth", "must be >= 1");
    if (fetch_batch < 1) throw ConfigError(path + ".fetch_batch", "must be >= 1");
    if (descriptor_bytes < 1) throw ConfigError(path + ".descriptor_bytes", "must be >= 1");
    if (completion_bytes < 1) throw ConfigError(path + ".completion_bytes", "must be >= 1");
    if (doorbell_ns < 0) throw ConfigError(path + ".doorbell_ns", "must be >= 0");
    if (host_poll_ns < 0) throw ConfigError(path + ".host_poll_ns", "must be >= 0");
    if (descriptor_process_ns < 0)
        throw ConfigError(path + ".descriptor_process_ns", "must be >= 0");
}

Device::Device(EventQueue& events, Fabric* fabric, RingConfig ring, ProtocolMode mode,
               BufferRelease release, std::uint64_t engine_buffer)
    : ev_(events),
      fabric_(fabric),
      cfg_(ring),
      mode_(mode),
      release_(release),
      engine_buffer_(engine_buffer) {
    cfg_.validate();
    if (fabric_) fabric_->set_progress_hook([this] { progress(); });
}

int Device::add_engine(const AcceleratorProfile& profile) {
    engines_.push_back(std::make_unique<EngineSlot>(AccelEngine(profile, engine_buffer_, release_)));
    return static_cast<int>(engines_.size()) - 1;
}

int Device::add_qp(int tenant) {
    const int id = fabric_ ? fabric_->add_qp(tenant) : static_cast<int>(rings_.size());
    if (id != static_cast<int>(rings_.size())) throw std::logic_error("qp id mismatch");
    rings_.emplace_back(cfg_.sq_depth, cfg_.cq_depth);
    cq_stalled_.emplace_back();
    cq_posted_.emplace_back();
    qp_tenant_.push_back(tenant);
    const auto t = static_cast<std::size_t>(tenant);
    if (tenant_qps_.size() <= t) {
        tenant_qps_.resize(t + 1);
        tenant_cursor_.resize(t + 1, 0);
        policies_.resize(t + 1);
        batchers_.resize(t + 1);
        batch_members_.resize(t + 1);
        policed_.resize(t + 1, 0);
    }
    tenant_qps_[t].push_back(id);
    return id;
}

void Device::set_policy(int tenant, TenantPolicy p) {
    const auto t = static_cast<std::size_t>(tenant);
    policies_.at(t) = p;
    if (const auto* b = std::get_if<BatchTo>(&p.resize))
        batchers_[t] = std::make_unique<Batcher>(*b);
    else
        batchers_[t].reset();
}

const TenantPolicy& Device::policy(int tenant) const {
    return policies_.at(static_cast<std::size_t>(tenant));
}

std::uint64_t Device::policed(int tenant) const {
    return policed_.at(static_cast<std::size_t>(tenant));
}

SubmitResult Device::submit(int qp, Descriptor d) {
    auto& ring = rings_.at(static_cast<std::size_t>(qp));
    d.qp = qp;
    d.tenant = qp_tenant_[static_cast<std::size_t>(qp)];
    d.submitted = ev_.now();
    if (ring.submit(d) == SubmitResult::SqFull) return SubmitResult::SqFull;
    ev_.schedule(ev_.now() + from_ns(cfg_.doorbell_ns), [this, qp] { ring_doorbell(qp); });
    return SubmitResult::Accepted;
}

void Device::ring_doorbell(int qp) {
    if (mode_ == ProtocolMode::Pull && controller_) {
        // The shaper owns fetch timing; the doorbell is only a hint.
        controller_->on_doorbell(qp_tenant_[static_cast<std::size_t>(qp)]);
        return;
    }
    auto& ring = rings_[static_cast<std::size_t>(qp)];
    while (ring.sq_occupancy() > 0) fetch_descriptors(qp, cfg_.fetch_batch);
}

const Descriptor* Device::peek(int tenant) const {
    const auto& qps = tenant_qps_.at(static_cast<std::size_t>(tenant));
    const auto cursor = tenant_cursor_[static_cast<std::size_t>(tenant)];
    for (std::size_t i = 0; i < qps.size(); ++i) {
        const auto* head = rings_[static_cast<std::size_t>(qps[(cursor + i) % qps.size()])].head();
        if (head) return head;
    }
    return nullptr;
}

std::size_t Device::pull(int tenant, std::size_t count) {
    const auto t = static_cast<std::size_t>(tenant);
    const auto& qps = tenant_qps_.at(t);
    for (std::size_t i = 0; i < qps.size(); ++i) {
        const std::size_t idx = (tenant_cursor_[t] + i) % qps.size();
        const int qp = qps[idx];
        const auto n = std::min(count, rings_[static_cast<std::size_t>(qp)].sq_occupancy());
        if (n == 0) continue;
        tenant_cursor_[t] = (idx + 1) % qps.size();
        fetch_descriptors(qp, n);
        return n;
    }
    return 0;
}

void Device::fetch_descriptors(int qp, std::size_t batch) {
    auto descs = rings_[static_cast<std::size_t>(qp)].fetch(batch);
    if (descs.empty()) return;
    fetched_ += descs.size();
    if (fetch_hook_) fetch_hook_(qp, descs.size(), ev_.now());
    auto deliver = [this, descs](SimTime at) {
        for (const auto& d : descs) process(d, at);
    };
    if (cfg_.on_fabric && fabric_) {
        fabric_->post_read(qp, descs.size() * cfg_.descriptor_bytes, true, deliver);
    } else {
        deliver(ev_.now());
    }
}

void Device::process(const Descriptor& d, SimTime fetched) {
    const std::uint64_t id = next_req_++;
    Request& r = requests_[id];
    r.d = d;
    r.t.submitted = d.submitted;
    r.t.fetched = fetched;

    const SimTime start = std::max(ev_.now(), processor_free_);
    processor_free_ = start + from_ns(cfg_.descriptor_process_ns);
    ev_.schedule(processor_free_, [this, id] {
        Request& r = requests_.at(id);
        const auto t = static_cast<std::size_t>(r.d.tenant);
        const TenantPolicy& pol = policies_[t];
        std::uint64_t bytes = r.d.msg_bytes;

        auto one_wire = [&](std::uint64_t wire_bytes) {
            Wire w;
            w.members = {id};
            w.member_bytes = {r.d.msg_bytes};
            w.bytes = wire_bytes;
            w.qp = r.d.qp;
            w.tenant = r.d.tenant;
            w.opcode = r.d.opcode;
            w.accel = r.d.accel;
            return w;
        };

        if (pol.small_msg_floor > 0 && bytes < pol.small_msg_floor) {
            const auto verdict = police_small(bytes, pol.small_msg_floor, pol.resize);
            if (verdict.verdict == PoliceVerdict::Deny) {
                ++policed_[t];
                r.denied = true;
                complete(id);
                return;
            }
        }
        if (batchers_[t] && bytes < std::get<BatchTo>(pol.resize).bytes) {
            batch_members_[t].push_back(id);
            if (auto b = batchers_[t]->add(bytes, ev_.now())) {
                flush_batch(r.d.tenant);
            } else if (batch_members_[t].size() == 1) {
                const int tenant = r.d.tenant;
                ev_.schedule(*batchers_[t]->deadline(), [this, tenant] {
                    const auto tt = static_cast<std::size_t>(tenant);
                    if (batchers_[tt] && batchers_[tt]->flush(ev_.now())) flush_batch(tenant);
                });
            }
            return;
        }
        const auto n = normalize(bytes, pol.resize);
        r.pieces = static_cast<int>(n.pieces.size());
        r.padding = n.padding;
        for (auto piece : n.pieces) launch(one_wire(piece));
    });
}

void Device::flush_batch(int tenant) {
    const auto t = static_cast<std::size_t>(tenant);
    auto members = std::move(batch_members_[t]);
    batch_members_[t].clear();
    if (members.empty()) return;
    Wire w;
    for (auto id : members) {
        Request& r = requests_.at(id);
        r.pieces = 1;
        w.members.push_back(id);
        w.member_bytes.push_back(r.d.msg_bytes);
        w.bytes += r.d.msg_bytes;
    }
    const Request& first = requests_.at(members.front());
    w.qp = first.d.qp;
    w.tenant = tenant;
    w.opcode = first.d.opcode;
    w.accel = first.d.accel;
    launch(std::move(w));
}

void Device::dma(int qp, bool write, std::uint64_t bytes, bool metadata, Fabric::Done done) {
    if (!fabric_) {
        const SimTime now = ev_.now();
        ev_.schedule(now, [done = std::move(done), now] { done(now); });
        return;
    }
    if (write)
        fabric_->post_write(qp, bytes, metadata, std::move(done));
    else
        fabric_->post_read(qp, bytes, metadata, std::move(done));
}

void Device::launch(Wire w) {
    const std::uint64_t id = next_wire_++;
    const auto opcode = w.opcode;
    const auto qp = w.qp;
    const auto bytes = w.bytes;
    if (opcode == Opcode::AccelInvoke)
        engines_.at(static_cast<std::size_t>(w.accel))->committed += bytes;
    wires_.emplace(id, std::move(w));

    switch (opcode) {
        case Opcode::DmaWrite:
            dma(qp, true, bytes, false, [this, id](SimTime at) {
                auto& w = wires_.at(id);
                for (auto m : w.members) requests_.at(m).t.write_done = at;
                finish_wire(id, w.bytes, at);
            });
            break;
        case Opcode::DmaRead:
            dma(qp, false, bytes, false, [this, id](SimTime at) {
                auto& w = wires_.at(id);
                for (auto m : w.members) requests_.at(m).t.read_done = at;
                finish_wire(id, w.bytes, at);
            });
            break;
        case Opcode::AccelInvoke:
            dma(qp, false, bytes, false, [this, id](SimTime at) {
                for (auto m : wires_.at(id).members) requests_.at(m).t.read_done = at;
                engine_enqueue(id);
            });
            break;
    }
}

std::uint64_t Device::engine_backlog(int engine) const {
    const auto& slot = *engines_.at(static_cast<std::size_t>(engine));
    return slot.committed;
}

void Device::engine_enqueue(std::uint64_t wire) {
    const auto& w = wires_.at(wire);
    auto& slot = *engines_.at(static_cast<std::size_t>(w.accel));
    if (!slot.waiting.empty() ||
        !slot.engine.try_enqueue(w.tenant, w.bytes, ev_.now(), wire)) {
        slot.waiting.push_back(wire);  // BufferFull: retried as the buffer drains
        return;
    }
    engine_serve(w.accel);
}

void Device::engine_serve(int idx) {
    auto& slot = *engines_.at(static_cast<std::size_t>(idx));
    if (slot.serving || slot.engine.empty()) return;
    slot.serving = true;
    const auto r = slot.engine.service_next(ev_.now());
    slot.committed -= r.job.msg_bytes;
    auto admit_waiting = [this, idx] {
        auto& s = *engines_.at(static_cast<std::size_t>(idx));
        while (!s.waiting.empty()) {
            const auto& w = wires_.at(s.waiting.front());
            if (!s.engine.try_enqueue(w.tenant, w.bytes, ev_.now(), s.waiting.front())) break;
            s.waiting.pop_front();
        }
    };
    admit_waiting();
    ev_.schedule(r.completion, [this, idx, r, admit_waiting] {
        auto& s = *engines_.at(static_cast<std::size_t>(idx));
        s.engine.complete(r);
        s.serving = false;
        admit_waiting();
        const std::uint64_t wire = r.job.tag;
        for (auto m : wires_.at(wire).members) requests_.at(m).t.compute_done = r.completion;
        const auto& w = wires_.at(wire);
        dma(w.qp, true, r.egress_bytes, false, [this, wire, egress = r.egress_bytes](SimTime at) {
            for (auto m : wires_.at(wire).members) requests_.at(m).t.write_done = at;
            finish_wire(wire, egress, at);
        });
        engine_serve(idx);
    });
    progress();
}

void Device::finish_wire(std::uint64_t wire, std::uint64_t egress, SimTime at) {
    (void)at;
    Wire w = std::move(wires_.at(wire));
    wires_.erase(wire);
    // Split the output over batch members by their share of the input.
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < w.members.size(); ++i) {
        auto& r = requests_.at(w.members[i]);
        std::uint64_t share = egress;
        if (w.members.size() > 1) {
            share = i + 1 == w.members.size() ? egress - assigned
                                               : egress * w.member_bytes[i] / w.bytes;
        }
        assigned += share;
        r.egress += share;
        if (--r.pieces == 0) complete(w.members[i]);
    }
}

void Device::complete(std::uint64_t req) {
    const int qp = requests_.at(req).d.qp;
    if (cfg_.on_fabric && fabric_) {
        fabric_->post_write(qp, cfg_.completion_bytes, true,
                            [this, req](SimTime at) { land(req, at); });
    } else {
        const SimTime now = ev_.now();
        ev_.schedule(now, [this, req, now] { land(req, now); });
    }
}

void Device::land(std::uint64_t req, SimTime at) {
    auto& r = requests_.at(req);
    r.t.completed = at;
    const int qp = r.d.qp;
    auto& stalled = cq_stalled_[static_cast<std::size_t>(qp)];
    CompletionRecord rec{r.d.seq, r.d.tenant, qp, r.d.submitted, at, r.denied};
    if (!stalled.empty() ||
        rings_[static_cast<std::size_t>(qp)].post_completion(rec) == PostResult::CqFull) {
        stalled.push_back(req);  // device stalls on a full CQ; nothing is dropped
        return;
    }
    cq_posted_[static_cast<std::size_t>(qp)].push_back(req);
    ev_.schedule(at + from_ns(cfg_.host_poll_ns), [this, qp] { host_drain(qp); });
}

void Device::host_drain(int qp) {
    auto& ring = rings_[static_cast<std::size_t>(qp)];
    auto rec = ring.drain_completion();
    if (!rec) return;
    auto& posted = cq_posted_[static_cast<std::size_t>(qp)];
    const std::uint64_t req_id = posted.front();
    posted.pop_front();
    Request r = std::move(requests_.at(req_id));
    requests_.erase(req_id);
    ++retired_;

    auto& stalled = cq_stalled_[static_cast<std::size_t>(qp)];
    if (!stalled.empty()) {
        const auto next = stalled.front();
        auto& nr = requests_.at(next);
        CompletionRecord nrec{nr.d.seq, nr.d.tenant, qp, nr.d.submitted, ev_.now(), nr.denied};
        if (ring.post_completion(nrec) == PostResult::Posted) {
            stalled.pop_front();
            posted.push_back(next);
            nr.t.completed = ev_.now();
            ev_.schedule(ev_.now() + from_ns(cfg_.host_poll_ns), [this, qp] { host_drain(qp); });
        }
    }

    if (completion_hook_) {
        CompletionInfo info;
        info.tenant = r.d.tenant;
        info.qp = qp;
        info.seq = r.d.seq;
        info.opcode = r.d.opcode;
        info.user_bytes = r.d.msg_bytes;
        info.egress_bytes = r.denied ? 0 : r.egress;
        info.padding = r.padding;
        info.denied = r.denied;
        info.t = r.t;
        completion_hook_(info);
    }
}

void Device::progress() {
    if (controller_) controller_->on_progress();
}

}  // namespace accelshape
