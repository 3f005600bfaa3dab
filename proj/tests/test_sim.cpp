#include <gtest/gtest.h>

#include <cmath>

#include "ncsim/generators.hpp"
#include "ncsim/sim.hpp"

using namespace ncsim;

TEST(Sim, ZeroFlowsDoNothing)
{
    Scenario sc = make_x();
    sc.flows.clear();
    sc.depth = CodingDepth::none;
    SimConfig cfg;
    cfg.qm.discipline = Discipline::nonc;
    auto m = simulate(sc, cfg);
    EXPECT_EQ(m.events, 0u);
    EXPECT_EQ(m.mac_transmissions, 0u);
    EXPECT_DOUBLE_EQ(m.aggregate_throughput(), 0.0);
}

TEST(Sim, SameSeedSameMetrics)
{
    for (Discipline d : {Discipline::nonc, Discipline::cope, Discipline::ncaqm}) {
        SimConfig cfg;
        cfg.seed = 42;
        cfg.qm.discipline = d;
        cfg.duration = 20.0;
        const auto a = to_json(simulate(make_cross(), cfg)).dump();
        const auto b = to_json(simulate(make_cross(), cfg)).dump();
        EXPECT_EQ(a, b) << discipline_name(d);
    }
}

TEST(Sim, DifferentSeedsDiffer)
{
    SimConfig cfg;
    cfg.duration = 10.0;
    cfg.seed = 1;
    const auto a = simulate(make_x(), cfg).event_digest;
    cfg.seed = 2;
    EXPECT_NE(a, simulate(make_x(), cfg).event_digest);
}

TEST(Sim, SingleBackloggedNodeAlwaysGranted)
{
    Scenario sc;
    sc.name = "hop";
    sc.nodes = {{"a", 0.0, 0.0}, {"b", 50.0, 0.0}};
    sc.links = {{NodeId{0}, NodeId{1}, 1.0, 1.0}, {NodeId{1}, NodeId{0}, 1.0, 1.0}};
    detail::add_flow(sc, {NodeId{0}, NodeId{1}});
    sc.depth = CodingDepth::none;
    SimConfig cfg;
    cfg.qm.discipline = Discipline::nonc;
    cfg.transport = TransportKind::optimal;
    cfg.optimal.rate_min = cfg.optimal.rate_max = 0.5;
    cfg.duration = 5.0;
    auto m = simulate(sc, cfg);
    EXPECT_GT(m.nodes[0].grants, 0u);
    EXPECT_EQ(m.drops_queue(), 0u);
}

// Three always-backlogged stations in one clique share grants evenly.
TEST(Sim, SaturatedAliceBobGrantsSplitInThirds)
{
    SimConfig cfg;
    cfg.qm.discipline = Discipline::nonc;
    cfg.transport = TransportKind::optimal;
    cfg.optimal.rate_min = cfg.optimal.rate_max = 1.0;
    cfg.optimal.max_outstanding = 1u << 30;
    auto m = simulate(make_alice_bob(), cfg);
    double total = 0.0;
    for (const auto& n : m.nodes)
        total += static_cast<double>(n.grants);
    ASSERT_GE(total, 1e4);
    for (const auto& n : m.nodes)
        EXPECT_NEAR(static_cast<double>(n.grants) / total, 1.0 / 3.0, 0.05);
}

TEST(Channel, ResidualLossBelowOnePercent)
{
    std::mt19937_64 rng(5);
    const std::size_t n = 200000;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto o = draw_attempts({0.85}, {}, 7, rng);
        failed += !o.target_ok[0];
    }
    const double rate = static_cast<double>(failed) / static_cast<double>(n);
    EXPECT_LT(rate, 0.01);
    EXPECT_LT(rate, 1e-4); // 0.15^8 is about 2.6e-6
}

TEST(Channel, AttemptsStopOnceEveryTargetHasIt)
{
    std::mt19937_64 rng(1);
    auto o = draw_attempts({1.0, 1.0}, {0.0}, 7, rng);
    EXPECT_EQ(o.attempts, 1u);
    o = draw_attempts({1.0, 0.0}, {}, 7, rng);
    EXPECT_EQ(o.attempts, 8u);
    EXPECT_TRUE(o.target_ok[0]);
    EXPECT_FALSE(o.target_ok[1]);
}

TEST(Channel, AirtimeOfFullPacketAtOneMbps)
{
    ChannelModel ch;
    EXPECT_NEAR(ch.airtime(500, 1.0), 0.004 + 0.001, 1e-12);
    EXPECT_NEAR(ch.airtime(500, 4.0), 0.001 + 0.001, 1e-12);
}

TEST(DecodingBufferTest, EvictsOldestBeyondCapacity)
{
    DecodingBuffer b(3);
    for (std::uint64_t id = 1; id <= 4; ++id)
        b.insert(id);
    EXPECT_FALSE(b.contains(1));
    EXPECT_TRUE(b.contains(4));
    EXPECT_EQ(b.size(), 3u);
    b.insert(4);
    EXPECT_EQ(b.size(), 3u);
}

// Conservation, eligibility at transmit and causality across disciplines,
// topologies, buffer sizes, loss and knowledge modes.
TEST(Sim, InvariantsHoldOnRandomConfigurations)
{
    const std::vector<std::string> topos = {"alice-bob", "x", "cross", "wheel5", "butterfly",
                                            "grid3"};
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 40; ++trial) {
        SimConfig cfg;
        cfg.seed = gen();
        cfg.duration = 8.0;
        cfg.qm.discipline = static_cast<Discipline>(gen() % 4);
        cfg.qm.buffer = 2 + gen() % 30;
        cfg.qm.fallback = gen() % 2 ? DropFallback::tail : DropFallback::incoming;
        cfg.qm.recode_interval = gen() % 3 == 0 ? 0.005 : 0.0;
        cfg.channel.loss = static_cast<double>(gen() % 30) / 100.0;
        cfg.decode_buffer = 4 + gen() % 64;
        cfg.knowledge = gen() % 3 == 0 ? KnowledgeMode::delayed : KnowledgeMode::oracle;
        cfg.transport = gen() % 4 == 0 ? TransportKind::optimal : TransportKind::tcp;
        const std::string topo = topos[gen() % topos.size()];
        auto m = simulate(make_topology(topo), cfg);
        SCOPED_TRACE(topo + " " + discipline_name(cfg.qm.discipline));
        EXPECT_TRUE(m.conserved());
        EXPECT_EQ(m.causality_violations, 0u);
        if (cfg.knowledge == KnowledgeMode::oracle)
            EXPECT_EQ(m.eligibility_violations, 0u);
        if (cfg.qm.discipline == Discipline::ncaqm)
            EXPECT_EQ(m.non_dominant_drops, 0u);
        for (const auto& q : m.queue_series)
            EXPECT_LE(q.packets, cfg.qm.buffer);
    }
}

TEST(Sim, UncodedDisciplineNeverCodes)
{
    SimConfig cfg;
    cfg.qm.discipline = Discipline::nonc;
    cfg.duration = 10.0;
    auto m = simulate(make_cross(), cfg);
    for (const auto& n : m.nodes)
        EXPECT_EQ(n.coded_tx, 0u);
    EXPECT_DOUBLE_EQ(m.no_partner_fraction(), 1.0);
    EXPECT_EQ(m.drops_coding(), 0u);
}

TEST(Sim, LosslessChannelHasNoResidualFailures)
{
    SimConfig cfg;
    cfg.channel.loss = 0.0;
    cfg.duration = 10.0;
    auto m = simulate(make_x(), cfg);
    EXPECT_EQ(m.residual_failures, 0u);
    EXPECT_EQ(m.drops_channel(), 0u);
}

TEST(Sim, CopeOnXOftenLacksPartner)
{
    double frac = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimConfig cfg;
        cfg.seed = seed;
        cfg.qm.discipline = Discipline::cope;
        frac += simulate(make_x(), cfg).no_partner_fraction() / 5.0;
    }
    EXPECT_GE(frac, 0.35);
    EXPECT_LE(frac, 0.65);
}

TEST(Sim, CodingBeatsNoCodingOnCross)
{
    double nonc = 0.0, cope = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SimConfig cfg;
        cfg.seed = seed;
        cfg.qm.discipline = Discipline::nonc;
        nonc += simulate(make_cross(), cfg).aggregate_throughput();
        cfg.qm.discipline = Discipline::cope;
        cope += simulate(make_cross(), cfg).aggregate_throughput();
    }
    EXPECT_GT(cope, nonc);
}

TEST(Sim, MetricsJsonCarriesFlowsAndNodes)
{
    SimConfig cfg;
    cfg.duration = 5.0;
    auto j = to_json(simulate(make_x(), cfg));
    EXPECT_EQ(j["flows"].size(), 2u);
    EXPECT_EQ(j["nodes"].size(), 5u);
    EXPECT_TRUE(j.contains("event_digest"));
}
