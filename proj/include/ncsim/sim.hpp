#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncsim/catalog.hpp"
#include "ncsim/packet.hpp"
#include "ncsim/qm.hpp"
#include "ncsim/transport.hpp"

namespace ncsim {

/// Bernoulli link losses with MAC retransmissions and a fixed per-attempt
/// overhead.
struct ChannelModel {
    double loss = 0.15;                 // per attempt, on top of each link's own ξ
    std::optional<double> overhear_loss; // defaults to `loss`
    unsigned max_retries = 7;
    double bitrate_bps = 1e6;   // capacity-1 links
    double overhead_frac = 0.25; // per attempt, in units of the reference slot
    double slot_bytes = 500;     // reference slot: one data packet at 1 Mbps

    [[nodiscard]] double slot_time() const { return slot_bytes * 8.0 / 1e6; }
    [[nodiscard]] double overhead() const { return overhead_frac * slot_time(); }
    [[nodiscard]] double airtime(std::uint32_t bytes, double capacity) const
    {
        return bytes * 8.0 / (bitrate_bps * capacity) + overhead();
    }
};

enum class KnowledgeMode { oracle, delayed };

struct SimConfig {
    QmConfig qm;
    TransportKind transport = TransportKind::tcp;
    TcpConfig tcp;
    OptimalConfig optimal;
    ChannelModel channel;
    double duration = 60.0;
    std::uint64_t seed = 1;
    std::size_t decode_buffer = 64;
    KnowledgeMode knowledge = KnowledgeMode::oracle;
    double knowledge_period = 0.1; // seconds between buffer reports (delayed mode)
    double start_window = 5.0;     // flows without a start time begin in [0, start_window)
    double sample_interval = 1.0;  // queue occupancy samples
    bool trace = false;
    // Destination ordering agent hold time per relay buffer slot; applies only
    // to coding disciplines, 0 disables.
    double reorder_hold = 0.005;
};

/// Life of one class of native packets (data or ACK) of a flow.
struct Accounting {
    std::uint64_t injected = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_queue = 0;
    std::uint64_t dropped_channel = 0;
    std::uint64_t dropped_coding = 0;
    std::uint64_t queued = 0;    // at end of run
    std::uint64_t in_flight = 0; // at end of run

    [[nodiscard]] bool balanced() const
    {
        return injected ==
               delivered + dropped_queue + dropped_channel + dropped_coding + queued + in_flight;
    }
};

struct FlowMetrics {
    double start_time = 0.0;
    std::uint64_t delivered_bytes = 0;
    double throughput_bps = 0.0;
    std::uint64_t retransmissions = 0;
    std::uint64_t timeouts = 0;
    // Optimal sources: controller rate (packets per slot) averaged over the
    // second half of the run.
    double mean_rate = 0.0;
    std::uint64_t rate_samples = 0;
    Accounting data, ack;
};

struct NodeMetrics {
    std::uint64_t grants = 0;
    std::uint64_t attempts = 0;
    double airtime = 0.0;
    std::uint64_t data_tx = 0;
    std::uint64_t coded_tx = 0;
    std::uint64_t natives_tx = 0;
    std::uint64_t relay_opportunities = 0;
    std::uint64_t no_partner = 0;
    std::uint64_t relay_coded = 0;
    std::uint64_t drops = 0; // natives dropped from this node's queue
};

struct QueueSample {
    double time = 0.0;
    NodeId node;
    std::size_t packets = 0;
    std::size_t natives = 0;
};

struct Metrics {
    double duration = 0.0;
    std::vector<FlowMetrics> flows;
    std::vector<NodeMetrics> nodes;
    std::vector<QueueSample> queue_series;
    std::uint64_t events = 0;
    std::uint64_t event_digest = 0;
    std::uint64_t mac_transmissions = 0;
    std::uint64_t residual_failures = 0; // transmissions with a target unreached after all retries
    std::uint64_t eligibility_violations = 0;
    std::uint64_t non_dominant_drops = 0;
    std::uint64_t causality_violations = 0;
    std::vector<std::string> trace;

    [[nodiscard]] double aggregate_throughput() const
    {
        double t = 0.0;
        for (const auto& f : flows)
            t += f.throughput_bps;
        return t;
    }
    [[nodiscard]] std::uint64_t drops_queue() const
    {
        std::uint64_t n = 0;
        for (const auto& f : flows)
            n += f.data.dropped_queue + f.ack.dropped_queue;
        return n;
    }
    [[nodiscard]] std::uint64_t drops_channel() const
    {
        std::uint64_t n = 0;
        for (const auto& f : flows)
            n += f.data.dropped_channel + f.ack.dropped_channel;
        return n;
    }
    [[nodiscard]] std::uint64_t drops_coding() const
    {
        std::uint64_t n = 0;
        for (const auto& f : flows)
            n += f.data.dropped_coding + f.ack.dropped_coding;
        return n;
    }
    /// Share of relay data transmissions that carried a coded packet.
    [[nodiscard]] double coded_fraction() const
    {
        std::uint64_t r = 0, c = 0;
        for (const auto& n : nodes) {
            r += n.relay_opportunities;
            c += n.relay_coded;
        }
        return r ? static_cast<double>(c) / static_cast<double>(r) : 0.0;
    }
    /// Share of relay transmit opportunities with nothing to code with.
    [[nodiscard]] double no_partner_fraction() const
    {
        std::uint64_t r = 0, c = 0;
        for (const auto& n : nodes) {
            r += n.relay_opportunities;
            c += n.no_partner;
        }
        return r ? static_cast<double>(c) / static_cast<double>(r) : 0.0;
    }
    [[nodiscard]] bool conserved() const
    {
        return std::all_of(flows.begin(), flows.end(),
                           [](const FlowMetrics& f) { return f.data.balanced() && f.ack.balanced(); });
    }
};

inline nlohmann::json to_json(const Accounting& a)
{
    return {{"injected", a.injected},           {"delivered", a.delivered},
            {"dropped_queue", a.dropped_queue}, {"dropped_channel", a.dropped_channel},
            {"dropped_coding", a.dropped_coding}, {"queued", a.queued},
            {"in_flight", a.in_flight}};
}

inline nlohmann::json to_json(const Metrics& m)
{
    nlohmann::json j;
    j["duration"] = m.duration;
    j["aggregate_throughput_bps"] = m.aggregate_throughput();
    j["drops"] = {{"queue", m.drops_queue()},
                  {"channel", m.drops_channel()},
                  {"coding", m.drops_coding()}};
    j["coded_fraction"] = m.coded_fraction();
    j["no_partner_fraction"] = m.no_partner_fraction();
    j["events"] = m.events;
    j["event_digest"] = m.event_digest;
    j["mac_transmissions"] = m.mac_transmissions;
    j["residual_failures"] = m.residual_failures;
    j["eligibility_violations"] = m.eligibility_violations;
    j["non_dominant_drops"] = m.non_dominant_drops;
    j["causality_violations"] = m.causality_violations;
    for (std::size_t s = 0; s < m.flows.size(); ++s) {
        const auto& f = m.flows[s];
        j["flows"].push_back({{"flow", s},
                              {"start_time", f.start_time},
                              {"throughput_bps", f.throughput_bps},
                              {"delivered_bytes", f.delivered_bytes},
                              {"retransmissions", f.retransmissions},
                              {"timeouts", f.timeouts},
                              {"mean_rate", f.mean_rate},
                              {"data", to_json(f.data)},
                              {"ack", to_json(f.ack)}});
    }
    for (std::size_t v = 0; v < m.nodes.size(); ++v) {
        const auto& n = m.nodes[v];
        j["nodes"].push_back({{"node", v},
                              {"grants", n.grants},
                              {"attempts", n.attempts},
                              {"airtime", n.airtime},
                              {"data_tx", n.data_tx},
                              {"coded_tx", n.coded_tx},
                              {"natives_tx", n.natives_tx},
                              {"relay_opportunities", n.relay_opportunities},
                              {"relay_coded", n.relay_coded},
                              {"no_partner", n.no_partner},
                              {"drops", n.drops}});
    }
    for (const auto& q : m.queue_series)
        j["queue_series"].push_back({q.time, q.node.value, q.packets, q.natives});
    if (!m.trace.empty())
        j["trace"] = m.trace;
    return j;
}

/// Number of attempts a transmission takes and which receivers got it.
struct AttemptOutcome {
    unsigned attempts = 0;
    std::vector<bool> target_ok;
    std::vector<bool> overheard;
};

/// Draws every attempt up front: each attempt reaches each pending target
/// with its own probability and offers overhearing again; retries continue
/// until every target has the packet or the retry limit is hit.
inline AttemptOutcome draw_attempts(const std::vector<double>& target_p,
                                    const std::vector<double>& overhear_p, unsigned max_retries,
                                    std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AttemptOutcome out;
    out.target_ok.assign(target_p.size(), false);
    out.overheard.assign(overhear_p.size(), false);
    for (unsigned a = 0; a <= max_retries; ++a) {
        ++out.attempts;
        for (std::size_t i = 0; i < target_p.size(); ++i)
            if (!out.target_ok[i] && u(rng) < target_p[i])
                out.target_ok[i] = true;
        for (std::size_t i = 0; i < overhear_p.size(); ++i)
            if (!out.overheard[i] && u(rng) < overhear_p[i])
                out.overheard[i] = true;
        if (std::all_of(out.target_ok.begin(), out.target_ok.end(), [](bool b) { return b; }))
            break;
    }
    return out;
}

/// Single-threaded discrete-event run of one scenario.
class Simulator {
public:
    Simulator(const Scenario& sc, SimConfig cfg)
        : cfg_(cfg),
          net_(build_network(sc, depth_for(cfg.qm.discipline, sc.depth))),
          routes_(net_.flows), rng_(cfg.seed)
    {
        ctx_ = QmContext{&net_, &routes_};
        const std::size_t n = net_.graph.node_count();
        for (std::size_t v = 0; v < n; ++v) {
            qm_.emplace_back(NodeId{v}, cfg_.qm, ctx_);
            buf_.emplace_back(cfg_.decode_buffer);
        }
        busy_.assign(n, false);
        snapshot_.resize(n);
        metrics_.duration = cfg_.duration;
        metrics_.flows.resize(net_.flows.size());
        metrics_.nodes.resize(n);
        for (std::size_t s = 0; s < net_.flows.size(); ++s) {
            tcp_.emplace_back(cfg_.tcp);
            rcv_.emplace_back();
            opt_.emplace_back(cfg_.optimal, cfg_.tcp);
        }
        timer_gen_.assign(net_.flows.size(), 0);
        reorder_.resize(net_.flows.size());
        reorder_gen_.assign(net_.flows.size(), 0);
        expected_at_hold_.assign(net_.flows.size(), 0);
        hold_ = cfg_.qm.discipline == Discipline::nonc
                    ? 0.0
                    : cfg_.reorder_hold * static_cast<double>(cfg_.qm.buffer);
        knows_ = [this](NodeId w, std::uint64_t id) {
            if (cfg_.knowledge == KnowledgeMode::oracle)
                return buf_[w.index()].contains(id);
            return snapshot_[w.index()].count(id) != 0;
        };
    }

    [[nodiscard]] const Network& network() const { return net_; }

    Metrics run()
    {
        std::uniform_real_distribution<double> start(0.0, cfg_.start_window);
        for (std::size_t s = 0; s < net_.flows.size(); ++s) {
            const double t0 = net_.flows[s].start_time >= 0.0 ? net_.flows[s].start_time
                                                              : start(rng_);
            metrics_.flows[s].start_time = t0;
            push(t0, Ev::flow_start, s);
        }
        if (!net_.flows.empty()) {
            if (cfg_.sample_interval > 0.0)
                push(0.0, Ev::sample, 0);
            if (cfg_.knowledge == KnowledgeMode::delayed)
                push(0.0, Ev::knowledge, 0);
            if (cfg_.qm.discipline == Discipline::ncaqm && cfg_.qm.recode_interval > 0.0)
                push(cfg_.qm.recode_interval, Ev::recode, 0);
        }
        while (!events_.empty() && events_.top().t <= cfg_.duration) {
            Event e = events_.top();
            events_.pop();
            if (e.t < now_)
                throw std::logic_error("event queue out of order");
            if (e.t < e.scheduled_at)
                ++metrics_.causality_violations;
            now_ = e.t;
            log_event(e);
            dispatch(e);
            grant();
        }
        finish();
        return metrics_;
    }

private:
    enum class Ev : std::uint8_t { flow_start, tx_end, rto, pace, sample, knowledge, recode, reorder };

    struct Event {
        double t;
        std::uint64_t seq;
        Ev type;
        std::uint64_t a;
        std::uint64_t b;
        double scheduled_at;
        bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
    };

    struct Active {
        NodeId node;
        CodedPacket pkt;
        HyperarcId hyperarc;
        std::vector<NodeId> endpoints;
        std::vector<NodeId> targets;
        std::vector<NodeId> listeners;
        AttemptOutcome outcome;
        bool live = false;
    };

    void push(double t, Ev type, std::uint64_t a, std::uint64_t b = 0)
    {
        events_.push(Event{t, seq_++, type, a, b, now_});
    }

    void log_event(const Event& e)
    {
        ++metrics_.events;
        auto mix = [&](std::uint64_t x) {
            for (int i = 0; i < 8; ++i) {
                digest_ ^= (x >> (8 * i)) & 0xff;
                digest_ *= 0x100000001b3ULL;
            }
        };
        mix(std::bit_cast<std::uint64_t>(e.t));
        mix(static_cast<std::uint64_t>(e.type));
        mix(e.a);
        mix(e.b);
        metrics_.event_digest = digest_;
        if (cfg_.trace) {
            char line[96];
            std::snprintf(line, sizeof line, "%.9f %d %llu %llu", e.t, static_cast<int>(e.type),
                          static_cast<unsigned long long>(e.a),
                          static_cast<unsigned long long>(e.b));
            metrics_.trace.emplace_back(line);
        }
    }

    void dispatch(const Event& e)
    {
        switch (e.type) {
        case Ev::flow_start: start_flow(FlowId{static_cast<std::size_t>(e.a)}); break;
        case Ev::tx_end: end_transmission(static_cast<std::size_t>(e.a)); break;
        case Ev::rto: on_rto(FlowId{static_cast<std::size_t>(e.a)}, e.b); break;
        case Ev::pace: pace(FlowId{static_cast<std::size_t>(e.a)}); break;
        case Ev::sample:
            for (std::size_t v = 0; v < qm_.size(); ++v) {
                std::size_t natives = 0;
                for (const auto& p : qm_[v].queue().packets())
                    natives += p.natives.size();
                metrics_.queue_series.push_back({now_, NodeId{v}, qm_[v].queue().size(), natives});
            }
            if (cfg_.transport == TransportKind::optimal && now_ >= cfg_.duration / 2.0)
                for (std::size_t s = 0; s < opt_.size(); ++s) {
                    auto& fm = metrics_.flows[s];
                    fm.mean_rate += opt_[s].rate();
                    ++fm.rate_samples;
                }
            push(now_ + cfg_.sample_interval, Ev::sample, 0);
            break;
        case Ev::knowledge:
            for (std::size_t v = 0; v < buf_.size(); ++v)
                snapshot_[v] = {buf_[v].ids().begin(), buf_[v].ids().end()};
            push(now_ + cfg_.knowledge_period, Ev::knowledge, 0);
            break;
        case Ev::recode:
            for (auto& q : qm_)
                q.recode(knows_);
            push(now_ + cfg_.qm.recode_interval, Ev::recode, 0);
            break;
        case Ev::reorder:
            if (e.b == reorder_gen_[e.a])
                hand_over(FlowId{static_cast<std::size_t>(e.a)}, reorder_[e.a].on_timeout());
            break;
        }
    }

    // ---- transport ----

    void start_flow(FlowId s)
    {
        if (cfg_.transport == TransportKind::tcp) {
            apply(s, tcp_[s.index()].start(now_));
        } else {
            pace(s);
        }
    }

    void apply(FlowId s, const SendActions& a)
    {
        for (auto seq : a.seqs)
            inject(s, PacketKind::data, seq, cfg_.tcp.mss, 0.0);
        if (a.stop_timer)
            ++timer_gen_[s.index()];
        if (a.restart_timer) {
            ++timer_gen_[s.index()];
            push(now_ + tcp_[s.index()].rto(), Ev::rto, s.index(), timer_gen_[s.index()]);
        }
    }

    void on_rto(FlowId s, std::uint64_t gen)
    {
        if (gen != timer_gen_[s.index()])
            return;
        if (cfg_.transport == TransportKind::tcp) {
            apply(s, tcp_[s.index()].on_timeout(now_));
        } else {
            auto& src = opt_[s.index()];
            src.on_timeout();
            if (src.outstanding())
                push(now_ + src.rto(), Ev::rto, s.index(), ++timer_gen_[s.index()]);
        }
    }

    void pace(FlowId s)
    {
        auto& src = opt_[s.index()];
        const bool had = src.outstanding();
        if (auto seq = src.next(now_))
            inject(s, PacketKind::data, *seq, cfg_.tcp.mss, 0.0);
        if (!had && src.outstanding())
            push(now_ + src.rto(), Ev::rto, s.index(), ++timer_gen_[s.index()]);
        const double gap = (cfg_.channel.slot_time() + cfg_.channel.overhead()) / src.rate();
        push(now_ + gap, Ev::pace, s.index());
    }

    void deliver(const NativePacket& p)
    {
        const FlowId s = p.flow;
        auto& fm = metrics_.flows[s.index()];
        if (p.kind == PacketKind::data) {
            ++fm.data.delivered;
            if (hold_ <= 0.0) {
                hand_over(s, {{p.seq, p.price}});
                return;
            }
            auto& rb = reorder_[s.index()];
            const bool was_holding = rb.holding();
            hand_over(s, rb.on_arrival(p.seq, p.price));
            if (rb.holding() && (!was_holding || rb.expected() != expected_at_hold_[s.index()])) {
                expected_at_hold_[s.index()] = rb.expected();
                push(now_ + hold_, Ev::reorder, s.index(), ++reorder_gen_[s.index()]);
            } else if (!rb.holding()) {
                ++reorder_gen_[s.index()];
            }
            return;
        }
        ++fm.ack.delivered;
        if (cfg_.transport == TransportKind::tcp) {
            apply(s, tcp_[s.index()].on_ack(p.seq, now_));
        } else if (opt_[s.index()].on_ack(p.seq, p.price, now_)) {
            push(now_ + opt_[s.index()].rto(), Ev::rto, s.index(), ++timer_gen_[s.index()]);
        }
    }

    void hand_over(FlowId s, const std::vector<ReorderBuffer::Item>& items)
    {
        for (const auto& it : items) {
            const auto ack = rcv_[s.index()].on_data(it.seq, cfg_.tcp.mss);
            inject(s, PacketKind::ack, ack, cfg_.tcp.ack_size, it.price);
        }
    }

    // ---- packets ----

    Accounting& acct(const NativePacket& p)
    {
        auto& f = metrics_.flows[p.flow.index()];
        return p.kind == PacketKind::data ? f.data : f.ack;
    }

    void inject(FlowId s, PacketKind kind, std::uint32_t seq, std::uint32_t size, double price)
    {
        NativePacket p;
        p.id = next_id_++;
        p.flow = s;
        p.kind = kind;
        p.seq = seq;
        p.size = size;
        p.created_at = now_;
        p.price = price;
        ++acct(p).injected;
        const NodeId at = routes_.path(s, kind).front();
        remember(at, p);
        enqueue(at, make_uncoded(p, at, routes_.after(p, at)));
    }

    void enqueue(NodeId v, CodedPacket p)
    {
        count_drops(v, qm_[v.index()].enqueue(std::move(p), knows_, rng_));
    }

    void count_drops(NodeId v, const std::vector<CodedPacket>& dropped)
    {
        for (const auto& d : dropped)
            for (const auto& e : d.natives) {
                ++acct(e.pkt).dropped_queue;
                ++metrics_.nodes[v.index()].drops;
            }
    }

    // ---- medium ----

    void grant()
    {
        for (;;) {
            std::vector<QueueManager::Plan> plans;
            std::vector<std::vector<NodeId>> ends;
            for (std::size_t v = 0; v < qm_.size(); ++v) {
                if (busy_[v] || qm_[v].queue().empty())
                    continue;
                std::vector<CodedPacket> dropped;
                auto pl = qm_[v].plan(knows_, rng_, &dropped);
                count_drops(NodeId{v}, dropped);
                if (!pl)
                    continue;
                auto ep = net_.graph.hyperarc(pl->hyperarc).endpoints();
                bool blocked = false;
                for (const auto& a : active_)
                    if (a.live && net_.graph.hyperarcs_conflict(a.endpoints, ep)) {
                        blocked = true;
                        break;
                    }
                if (!blocked) {
                    plans.push_back(std::move(*pl));
                    ends.push_back(std::move(ep));
                }
            }
            if (plans.empty())
                return;
            const std::size_t pick =
                std::uniform_int_distribution<std::size_t>(0, plans.size() - 1)(rng_);
            start_transmission(plans[pick], std::move(ends[pick]));
        }
    }

    void start_transmission(const QueueManager::Plan& pl, std::vector<NodeId> endpoints)
    {
        const NodeId v = pl.pkt.origin;
        auto& qm = qm_[v.index()];
        if (!eligible(pl.pkt, v, ctx_, knows_))
            ++metrics_.eligibility_violations;
        CodedPacket pkt = qm.commit(pl);
        if (cfg_.transport == TransportKind::optimal) {
            const auto phi = qm.phi().phi;
            for (auto& e : pkt.natives)
                if (e.pkt.kind == PacketKind::data)
                    e.pkt.price += cfg_.optimal.price_scale * phi[e.pkt.flow.index()];
        }

        Active a;
        a.node = v;
        a.hyperarc = pl.hyperarc;
        a.endpoints = std::move(endpoints);
        a.targets = net_.graph.hyperarc(pl.hyperarc).targets;
        std::vector<double> tp, op;
        double cap = std::numeric_limits<double>::infinity();
        for (NodeId t : a.targets) {
            const Link& l = net_.graph.link(*net_.graph.find_link(v, t));
            cap = std::min(cap, l.capacity);
            tp.push_back(l.success_prob * (1.0 - cfg_.channel.loss));
        }
        const double ol = cfg_.channel.overhear_loss.value_or(cfg_.channel.loss);
        for (std::size_t w = 0; w < qm_.size(); ++w) {
            const NodeId u{w};
            if (u == v || busy_[w] ||
                std::find(a.targets.begin(), a.targets.end(), u) != a.targets.end() ||
                !net_.graph.in_range()(v, u))
                continue;
            a.listeners.push_back(u);
            auto l = net_.graph.find_link(v, u);
            op.push_back((l ? net_.graph.link(*l).success_prob : 1.0) * (1.0 - ol));
        }
        a.outcome = draw_attempts(tp, op, cfg_.channel.max_retries, rng_);
        a.pkt = std::move(pkt);
        a.live = true;

        const double per = cfg_.channel.airtime(a.pkt.size(), cap);
        const double dur = per * a.outcome.attempts;
        auto& nm = metrics_.nodes[v.index()];
        ++nm.grants;
        nm.attempts += a.outcome.attempts;
        nm.airtime += dur;
        ++metrics_.mac_transmissions;
        if (!a.pkt.is_ack()) {
            ++nm.data_tx;
            nm.natives_tx += a.pkt.natives.size();
            if (a.pkt.coded())
                ++nm.coded_tx;
            if (pl.relay) {
                ++nm.relay_opportunities;
                if (a.pkt.coded())
                    ++nm.relay_coded;
                if (!pl.partner)
                    ++nm.no_partner;
            }
        }
        busy_[v.index()] = true;
        std::size_t slot = 0;
        while (slot < active_.size() && active_[slot].live)
            ++slot;
        if (slot == active_.size())
            active_.emplace_back();
        active_[slot] = std::move(a);
        push(now_ + dur, Ev::tx_end, slot);
    }

    void end_transmission(std::size_t slot)
    {
        Active a = std::move(active_[slot]);
        active_[slot].live = false;
        busy_[a.node.index()] = false;
        qm_[a.node.index()].record_transmission(a.pkt);
        if (!std::all_of(a.outcome.target_ok.begin(), a.outcome.target_ok.end(),
                         [](bool b) { return b; }))
            ++metrics_.residual_failures;

        std::vector<std::pair<NodeId, bool>> outcomes;
        for (std::size_t i = 0; i < a.targets.size(); ++i)
            outcomes.emplace_back(a.targets[i], a.outcome.target_ok[i]);
        for (std::size_t i = 0; i < a.listeners.size(); ++i)
            if (a.outcome.overheard[i])
                overhear(a.listeners[i], a.pkt);
        for (auto [t, ok] : outcomes) {
            if (!ok) {
                for (const auto& e : a.pkt.natives)
                    if (e.next_hop == t)
                        ++acct(e.pkt).dropped_channel;
                continue;
            }
            receive(t, a.pkt);
        }
    }

    // ACKs are never coded, so they are kept out of decoding buffers.
    void remember(NodeId v, const NativePacket& p)
    {
        if (p.kind == PacketKind::data)
            buf_[v.index()].insert(p.id);
    }

    void overhear(NodeId o, const CodedPacket& p)
    {
        const auto& b = buf_[o.index()];
        std::size_t unknown = 0, idx = 0;
        for (std::size_t i = 0; i < p.natives.size(); ++i)
            if (!b.contains(p.natives[i].pkt.id)) {
                ++unknown;
                idx = i;
            }
        if (unknown == 1)
            remember(o, p.natives[idx].pkt);
    }

    void receive(NodeId t, const CodedPacket& p)
    {
        if (p.stage == CodeStage::butterfly_first) {
            CodedPacket fwd = p;
            fwd.origin = t;
            fwd.stage = CodeStage::butterfly_second;
            for (auto& e : fwd.natives)
                e.next_hop = routes_.after(e.pkt, t);
            enqueue(t, std::move(fwd));
            return;
        }
        auto& b = buf_[t.index()];
        std::vector<const NativePacket*> mine;
        for (std::size_t i = 0; i < p.natives.size(); ++i) {
            if (p.natives[i].next_hop != t)
                continue;
            if (detail::knows_others(p.natives, i, t, [&](NodeId, std::uint64_t id) {
                    return b.contains(id);
                }))
                mine.push_back(&p.natives[i].pkt);
            else
                ++acct(p.natives[i].pkt).dropped_coding;
        }
        overhear(t, p);
        for (const NativePacket* n : mine) {
            remember(t, *n);
            if (routes_.is_destination(*n, t))
                deliver(*n);
            else
                enqueue(t, make_uncoded(*n, t, routes_.after(*n, t)));
        }
    }

    void finish()
    {
        for (const auto& q : qm_) {
            for (const auto& p : q.queue().packets())
                for (const auto& e : p.natives)
                    ++acct(e.pkt).queued;
            for (const auto& d : q.drop_log())
                if (!d.dominant)
                    ++metrics_.non_dominant_drops;
        }
        for (const auto& a : active_)
            if (a.live)
                for (const auto& e : a.pkt.natives)
                    ++acct(e.pkt).in_flight;
        for (std::size_t s = 0; s < net_.flows.size(); ++s) {
            auto& fm = metrics_.flows[s];
            fm.delivered_bytes = rcv_[s].delivered_bytes();
            fm.throughput_bps = static_cast<double>(fm.delivered_bytes) * 8.0 / cfg_.duration;
            if (cfg_.transport == TransportKind::tcp) {
                fm.retransmissions = tcp_[s].retransmissions();
                fm.timeouts = tcp_[s].timeouts();
            } else {
                fm.retransmissions = opt_[s].retransmissions();
                fm.timeouts = opt_[s].timeouts();
                if (fm.rate_samples)
                    fm.mean_rate /= static_cast<double>(fm.rate_samples);
            }
        }
    }

    SimConfig cfg_;
    Network net_;
    RouteTable routes_;
    QmContext ctx_;
    std::mt19937_64 rng_;
    std::vector<QueueManager> qm_;
    std::vector<DecodingBuffer> buf_;
    std::vector<std::unordered_set<std::uint64_t>> snapshot_;
    std::vector<bool> busy_;
    std::vector<Active> active_;
    std::vector<TcpSender> tcp_;
    std::vector<TcpReceiver> rcv_;
    std::vector<OptimalSource> opt_;
    std::vector<std::uint64_t> timer_gen_;
    std::vector<ReorderBuffer> reorder_;
    std::vector<std::uint64_t> reorder_gen_;
    std::vector<std::uint32_t> expected_at_hold_;
    double hold_ = 0.0;
    Knowledge knows_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    std::uint64_t next_id_ = 1;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
    double now_ = 0.0;
    Metrics metrics_;
};

inline Metrics simulate(const Scenario& sc, const SimConfig& cfg)
{
    return Simulator(sc, cfg).run();
}

} // namespace ncsim
