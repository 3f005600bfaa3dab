#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncsim {

enum class TransportKind { tcp, optimal };

inline TransportKind parse_transport(const std::string& s)
{
    if (s == "tcp")
        return TransportKind::tcp;
    if (s == "optimal")
        return TransportKind::optimal;
    throw std::invalid_argument("unknown transport '" + s + "'");
}

inline const char* transport_name(TransportKind t)
{
    return t == TransportKind::tcp ? "tcp" : "optimal";
}

struct TcpConfig {
    std::uint32_t mss = 500;     // data bytes
    std::uint32_t ack_size = 40; // bytes
    double initial_cwnd = 2.0;
    double max_cwnd = 64.0;
    double min_rto = 0.2;
    double initial_rto = 1.0;
    double max_rto = 60.0;
};

/// Jacobson/Karels smoothed RTT with Karn's rule applied by the caller.
class RttEstimator {
public:
    explicit RttEstimator(const TcpConfig& cfg = {}) : cfg_(cfg), rto_(cfg.initial_rto) {}

    void sample(double rtt)
    {
        if (srtt_ < 0.0) {
            srtt_ = rtt;
            rttvar_ = rtt / 2.0;
        } else {
            rttvar_ = 0.75 * rttvar_ + 0.25 * std::abs(srtt_ - rtt);
            srtt_ = 0.875 * srtt_ + 0.125 * rtt;
        }
        rto_ = std::clamp(srtt_ + 4.0 * rttvar_, cfg_.min_rto, cfg_.max_rto);
    }
    void backoff() { rto_ = std::min(rto_ * 2.0, cfg_.max_rto); }

    [[nodiscard]] double rto() const { return rto_; }
    [[nodiscard]] double srtt() const { return srtt_; }
    [[nodiscard]] double rttvar() const { return rttvar_; }

private:
    TcpConfig cfg_;
    double srtt_ = -1.0;
    double rttvar_ = 0.0;
    double rto_;
};

/// What the simulator should do after a transport event.
struct SendActions {
    std::vector<std::uint32_t> seqs; // in send order
    bool restart_timer = false;
    bool stop_timer = false;
};

enum class TcpPhase { slow_start, congestion_avoidance, fast_recovery };

/// NewReno-style window sender with an unlimited backlog.
class TcpSender {
public:
    explicit TcpSender(TcpConfig cfg = {})
        : cfg_(cfg), cwnd_(cfg.initial_cwnd), ssthresh_(cfg.max_cwnd), rtt_(cfg)
    {
    }

    SendActions start(double now)
    {
        SendActions a;
        fill(a, now);
        a.restart_timer = flight() > 0;
        return a;
    }

    /// Cumulative ACK: `ack` is the next sequence number the receiver expects.
    SendActions on_ack(std::uint32_t ack, double now)
    {
        SendActions a;
        if (ack > snd_una_) {
            const std::uint32_t newly = ack - snd_una_;
            if (timed_ && ack > timed_->first) {
                rtt_.sample(now - timed_->second);
                timed_.reset();
            }
            snd_una_ = ack;
            next_seq_ = std::max(next_seq_, snd_una_);
            if (phase_ == TcpPhase::fast_recovery) {
                if (ack > recover_) {
                    cwnd_ = ssthresh_;
                    phase_ = TcpPhase::congestion_avoidance;
                } else {
                    retransmit(a, snd_una_);
                    cwnd_ = std::max(1.0, cwnd_ - newly + 1.0);
                }
            } else if (cwnd_ < ssthresh_) {
                cwnd_ += 1.0;
                phase_ = TcpPhase::slow_start;
            } else {
                cwnd_ += 1.0 / cwnd_;
                phase_ = TcpPhase::congestion_avoidance;
            }
            cwnd_ = std::min(cwnd_, cfg_.max_cwnd);
            dup_acks_ = 0;
            fill(a, now);
            if (flight() > 0)
                a.restart_timer = true;
            else
                a.stop_timer = true;
            return a;
        }
        if (ack == snd_una_ && flight() > 0) {
            ++dup_acks_;
            if (phase_ != TcpPhase::fast_recovery && dup_acks_ == 3 &&
                (!recovered_once_ || snd_una_ > recover_)) {
                ssthresh_ = std::max(static_cast<double>(flight()) / 2.0, 2.0);
                recover_ = next_seq_ - 1;
                recovered_once_ = true;
                retransmit(a, snd_una_);
                cwnd_ = std::min(ssthresh_ + 3.0, cfg_.max_cwnd);
                phase_ = TcpPhase::fast_recovery;
                a.restart_timer = true;
            } else if (phase_ == TcpPhase::fast_recovery) {
                cwnd_ = std::min(cwnd_ + 1.0, cfg_.max_cwnd);
                fill(a, now);
            }
        }
        return a;
    }

    SendActions on_timeout(double now)
    {
        SendActions a;
        if (flight() == 0)
            return a;
        ssthresh_ = std::max(static_cast<double>(flight()) / 2.0, 2.0);
        cwnd_ = 1.0;
        phase_ = TcpPhase::slow_start;
        dup_acks_ = 0;
        rtt_.backoff();
        timed_.reset();
        recover_ = next_seq_ - 1;
        recovered_once_ = true;
        next_seq_ = snd_una_;
        ++timeouts_;
        fill(a, now);
        a.restart_timer = true;
        return a;
    }

    [[nodiscard]] std::uint32_t flight() const { return next_seq_ - snd_una_; }
    [[nodiscard]] double cwnd() const { return cwnd_; }
    [[nodiscard]] double ssthresh() const { return ssthresh_; }
    [[nodiscard]] TcpPhase phase() const { return phase_; }
    [[nodiscard]] double rto() const { return rtt_.rto(); }
    [[nodiscard]] const RttEstimator& rtt() const { return rtt_; }
    [[nodiscard]] std::uint32_t snd_una() const { return snd_una_; }
    [[nodiscard]] std::uint32_t next_seq() const { return next_seq_; }
    [[nodiscard]] std::uint64_t retransmissions() const { return retransmits_; }
    [[nodiscard]] std::uint64_t timeouts() const { return timeouts_; }

    /// Test hook: place the sender in a given window state.
    void set_window(double cwnd, double ssthresh, TcpPhase phase)
    {
        cwnd_ = cwnd;
        ssthresh_ = ssthresh;
        phase_ = phase;
    }

private:
    void fill(SendActions& a, double now)
    {
        while (flight() < static_cast<std::uint32_t>(std::floor(cwnd_))) {
            const std::uint32_t s = next_seq_++;
            if (s < high_) {
                ++retransmits_;
            } else {
                high_ = s + 1;
                if (!timed_)
                    timed_ = std::pair{s, now};
            }
            a.seqs.push_back(s);
        }
    }
    void retransmit(SendActions& a, std::uint32_t s)
    {
        a.seqs.push_back(s);
        ++retransmits_;
        if (timed_ && timed_->first >= s)
            timed_.reset();
    }

    TcpConfig cfg_;
    double cwnd_;
    double ssthresh_;
    TcpPhase phase_ = TcpPhase::slow_start;
    RttEstimator rtt_;
    std::uint32_t next_seq_ = 0;
    std::uint32_t snd_una_ = 0;
    std::uint32_t high_ = 0;
    std::uint32_t recover_ = 0;
    bool recovered_once_ = false;
    std::uint32_t dup_acks_ = 0;
    std::optional<std::pair<std::uint32_t, double>> timed_;
    std::uint64_t retransmits_ = 0;
    std::uint64_t timeouts_ = 0;
};

/// Cumulative-ACK receiver with an out-of-order reassembly set.
class TcpReceiver {
public:
    /// Returns the cumulative ACK to send back.
    std::uint32_t on_data(std::uint32_t seq, std::uint32_t bytes)
    {
        if (seq == expected_) {
            ++expected_;
            delivered_ += bytes;
            while (!ooo_.empty() && *ooo_.begin() == expected_) {
                ooo_.erase(ooo_.begin());
                ++expected_;
                delivered_ += bytes;
            }
        } else if (seq > expected_) {
            ooo_.insert(seq);
        }
        return expected_;
    }
    [[nodiscard]] std::uint64_t delivered_bytes() const { return delivered_; }
    [[nodiscard]] std::uint32_t expected() const { return expected_; }

private:
    std::uint32_t expected_ = 0;
    std::set<std::uint32_t> ooo_;
    std::uint64_t delivered_ = 0;
};

/// Destination-side ordering agent: holds out-of-order data briefly so that
/// reordering introduced by coding does not reach TCP as duplicate ACKs. On
/// timeout the gap is given up and everything held is released.
class ReorderBuffer {
public:
    struct Item {
        std::uint32_t seq;
        double price;
    };

    std::vector<Item> on_arrival(std::uint32_t seq, double price)
    {
        std::vector<Item> out;
        if (seq < expected_) {
            out.push_back({seq, price});
            return out;
        }
        held_.emplace(seq, price);
        release_in_order(out);
        return out;
    }
    std::vector<Item> on_timeout()
    {
        std::vector<Item> out;
        if (held_.empty())
            return out;
        expected_ = held_.begin()->first;
        release_in_order(out);
        return out;
    }
    [[nodiscard]] bool holding() const { return !held_.empty(); }
    [[nodiscard]] std::uint32_t expected() const { return expected_; }

private:
    void release_in_order(std::vector<Item>& out)
    {
        while (!held_.empty() && held_.begin()->first <= expected_) {
            auto it = held_.begin();
            out.push_back({it->first, it->second});
            expected_ = std::max(expected_, it->first + 1);
            held_.erase(it);
        }
    }

    std::uint32_t expected_ = 0;
    std::map<std::uint32_t, double> held_;
};

struct OptimalConfig {
    double rate_min = 1e-3; // packets per slot
    double rate_max = 1.0;
    std::uint32_t max_outstanding = 64;
    double price_gain = 0.01;  // EWMA weight of each echoed path price
    double price_scale = 1.0;  // price per queued packet
};

/// Rate from the summed path price, clamped.
inline double optimal_rate(double feedback, const OptimalConfig& cfg = {})
{
    if (!(feedback > 0.0))
        return cfg.rate_max;
    return std::clamp(1.0 / feedback, cfg.rate_min, cfg.rate_max);
}

/// Paced source whose rate follows the price echoed on ACKs. Losses are
/// repaired by resending the first unacknowledged packet; the rate does not
/// react to them.
class OptimalSource {
public:
    explicit OptimalSource(OptimalConfig cfg = {}, TcpConfig tcp = {})
        : cfg_(cfg), rate_(cfg.rate_max), rtt_(tcp)
    {
    }

    /// Next sequence number to put on the wire at a pacing tick.
    std::optional<std::uint32_t> next(double now)
    {
        if (!resend_.empty()) {
            const std::uint32_t s = resend_.front();
            resend_.pop_front();
            ++retransmits_;
            return s;
        }
        if (next_seq_ - snd_una_ >= cfg_.max_outstanding)
            return std::nullopt;
        if (next_seq_ < high_) {
            ++retransmits_;
        } else {
            high_ = next_seq_ + 1;
            if (!timed_)
                timed_ = std::pair{next_seq_, now};
        }
        return next_seq_++;
    }

    /// Returns true when the retransmission timer should be restarted.
    bool on_ack(std::uint32_t ack, double price, double now)
    {
        price_ = seen_price_ ? price_ + cfg_.price_gain * (price - price_) : price;
        seen_price_ = true;
        rate_ = optimal_rate(price_, cfg_);
        if (ack > snd_una_) {
            if (timed_ && ack > timed_->first) {
                rtt_.sample(now - timed_->second);
                timed_.reset();
            }
            snd_una_ = ack;
            next_seq_ = std::max(next_seq_, snd_una_);
            dup_acks_ = 0;
            std::erase_if(resend_, [&](std::uint32_t s) { return s < snd_una_; });
            // partial ACK during recovery: the next hole is lost too
            if (recovering_ && snd_una_ <= recover_ && snd_una_ < next_seq_ && resend_.empty())
                resend_.push_back(snd_una_);
            if (snd_una_ > recover_)
                recovering_ = false;
            return true;
        }
        if (ack == snd_una_ && next_seq_ > snd_una_ && ++dup_acks_ == 3 && !recovering_) {
            resend_.push_back(snd_una_);
            recovering_ = true;
            recover_ = next_seq_ - 1;
        }
        return false;
    }

    /// Go-back-N: everything unacknowledged is resent at the paced rate.
    void on_timeout()
    {
        if (next_seq_ == snd_una_)
            return;
        rtt_.backoff();
        timed_.reset();
        resend_.clear();
        recovering_ = false;
        next_seq_ = snd_una_;
        ++timeouts_;
    }

    [[nodiscard]] double rate() const { return rate_; }
    [[nodiscard]] double price() const { return price_; }
    [[nodiscard]] double rto() const { return rtt_.rto(); }
    [[nodiscard]] bool outstanding() const { return next_seq_ > snd_una_; }
    [[nodiscard]] std::uint64_t retransmissions() const { return retransmits_; }
    [[nodiscard]] std::uint64_t timeouts() const { return timeouts_; }

private:
    OptimalConfig cfg_;
    double rate_;
    double price_ = 0.0;
    bool seen_price_ = false;
    RttEstimator rtt_;
    std::uint32_t next_seq_ = 0;
    std::uint32_t snd_una_ = 0;
    std::uint32_t high_ = 0;
    std::uint32_t recover_ = 0;
    bool recovering_ = false;
    std::uint32_t dup_acks_ = 0;
    std::deque<std::uint32_t> resend_;
    std::optional<std::pair<std::uint32_t, double>> timed_;
    std::uint64_t retransmits_ = 0;
    std::uint64_t timeouts_ = 0;
};

} // namespace ncsim
