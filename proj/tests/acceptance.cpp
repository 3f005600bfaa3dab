// Acceptance gate: one PASS/FAIL line per criterion, exit status = failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ncsim/experiment.hpp"
#include "ncsim/numopt.hpp"
#include "ncsim/simplex.hpp"
#include "oracles.hpp"

using namespace ncsim;

namespace {

// ---- pinned tolerances ----
constexpr double kSolverSeconds = 10.0;
constexpr double kBruteStep = 1e-4;
constexpr double kDualDrift = 1e-3;
constexpr std::size_t kDualWindow = 50;
constexpr double kSubproblemTol = 1e-3;
constexpr int kSubproblemInstances = 100;
constexpr std::size_t kSeeds = 10;
constexpr double kDuration = 60.0;
constexpr double kRatioMin = 1.5;
constexpr double kNoPartnerLo = 0.35, kNoPartnerHi = 0.65;
constexpr double kTcrit9 = 1.833; // one-sided 5%, 9 degrees of freedom
constexpr std::size_t kInvariantCases = 10000;
constexpr double kInvariantSeconds = 60.0;
constexpr double kResidualLossMax = 0.01;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- solver criteria ----

struct SolverCase {
    const char* topo;
    std::vector<double> caps;
    CodingDepth depth;
    double lo, hi, lo0, hi0;
};

const std::vector<SolverCase>& solver_cases()
{
    static const std::vector<SolverCase> cases = {
        {"alice-bob", {1, 1}, CodingDepth::one_hop, 0.64, 0.68, 0.49, 0.51},
        {"alice-bob", {1, 4}, CodingDepth::one_hop, 0.86, 0.90, 0.78, 0.82},
        {"x", {1, 1, 1, 1}, CodingDepth::one_hop, 0.64, 0.68, 0.49, 0.51},
        {"x", {1, 4, 4, 1}, CodingDepth::one_hop, 1.27, 1.33, 0.78, 0.82},
        {"butterfly", {1, 1, 1, 1, 1}, CodingDepth::two_hop, 0.48, 0.52, 0.32, 0.34},
        {"butterfly", {4, 4, 1, 4, 4}, CodingDepth::two_hop, 1.10, 1.18, 0.64, 0.68},
    };
    return cases;
}

struct SolverOutcome {
    Verdict verdict;
    double dual_drift = 0.0;
};

SolverOutcome solver_criterion(const SolverCase& c)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario sc = make_topology(c.topo, c.caps);
    const SolveResult r = solve(build_network(sc, c.depth));
    const double sum0 = brute_force_optimum(build_network(sc, CodingDepth::none), kBruteStep).sum_x();
    const double secs = seconds_since(t0);

    SolverOutcome out;
    const auto& rows = r.trace.rows;
    for (std::size_t i = rows.size() > kDualWindow ? rows.size() - kDualWindow : 1; i < rows.size(); ++i)
        for (std::size_t h = 0; h < rows[i].q.size(); ++h)
            out.dual_drift = std::max(out.dual_drift, std::abs(rows[i].q[h] - rows[i - 1].q[h]));
    const double s = r.sum_x();
    out.verdict.pass = s >= c.lo && s <= c.hi && sum0 >= c.lo0 && sum0 <= c.hi0 && secs < kSolverSeconds;
    std::string caps;
    for (double v : c.caps)
        caps += (caps.empty() ? "" : ",") + fmt("%g", v);
    out.verdict.detail = fmt("%s caps {%s}: sum_x=%.4f (band [%.2f,%.2f]); 0-hop=%.4f (band [%.2f,%.2f]); %zu iters%s; %.1f s",
                             c.topo, caps.c_str(), s, c.lo, c.hi, sum0, c.lo0, c.hi0, r.trace.iterations,
                             r.trace.converged ? "" : " (iteration cap)", secs);
    return out;
}

Verdict subproblem_criterion()
{
    double worst = 0.0;
    for (int seed = 0; seed < kSubproblemInstances; ++seed)
        worst = std::max(worst, oracle::subproblem_gap(static_cast<std::uint64_t>(seed)));
    return {worst < kSubproblemTol,
            fmt("%d instances, worst gap %.2e (tol %.0e)", kSubproblemInstances, worst, kSubproblemTol)};
}

// ---- simulator helpers ----

ExperimentSpec sim_spec(std::vector<std::string> scenarios, std::vector<const char*> arms)
{
    ExperimentSpec s;
    s.name = "acceptance";
    s.scenarios = std::move(scenarios);
    for (const char* a : arms)
        s.arms.push_back(make_arm(a));
    s.seeds = seed_range(1, kSeeds);
    s.duration = kDuration;
    s.threads = 1;
    return s;
}

const AggregateRow& find(const std::vector<AggregateRow>& agg, const std::string& sc, const std::string& arm,
                         double point = NAN)
{
    for (const auto& a : agg)
        if (a.scenario == sc && a.arm == arm && detail::same_point(a.point, point))
            return a;
    throw std::runtime_error("missing aggregate " + sc + "/" + arm);
}

/// Per-seed values of one (scenario, arm, point) in seed order.
std::vector<double> per_seed(const ResultTable& t, const std::string& sc, const std::string& arm, double point,
                             double ResultRow::*field)
{
    std::vector<double> v;
    for (const auto& r : t.rows)
        if (r.scenario == sc && r.arm == arm && detail::same_point(r.point, point) && r.ok())
            v.push_back(r.*field);
    return v;
}

/// Paired t statistic of b - a.
double paired_t(const std::vector<double>& a, const std::vector<double>& b)
{
    const std::size_t n = std::min(a.size(), b.size());
    std::vector<double> d(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mean += (d[i] = b[i] - a[i]) / static_cast<double>(n);
    double var = 0.0;
    for (double x : d)
        var += (x - mean) * (x - mean) / static_cast<double>(n - 1);
    if (var == 0.0)
        return mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
    return mean / std::sqrt(var / static_cast<double>(n));
}

// ---- simulator criteria ----

Verdict ordering_criterion()
{
    const auto t = run_experiment(sim_spec({"alice-bob", "x", "cross", "wheel8"}, {"nonc", "cope", "ncaqm"}));
    const auto agg = aggregate(t);
    bool pass = t.failures() == 0;
    std::string d;
    for (const char* sc : {"alice-bob", "x", "cross", "wheel8"}) {
        const auto& n = find(agg, sc, "nonc");
        const auto& c = find(agg, sc, "cope");
        const auto& q = find(agg, sc, "ncaqm");
        const bool order = q.mean_bps > c.mean_bps && c.mean_bps > n.mean_bps;
        const double ratio = c.improvement_pct > 0 ? q.improvement_pct / c.improvement_pct : 0.0;
        pass = pass && order && ratio >= kRatioMin;
        d += fmt("%s%s nonc %.0fk cope %+.1f%% ncaqm %+.1f%% (ratio %.2f, order %s)", d.empty() ? "" : "; ", sc,
                 n.mean_bps / 1e3, c.improvement_pct, q.improvement_pct, ratio, order ? "ok" : "broken");
    }
    return {pass, d};
}

Verdict starvation_criterion()
{
    const auto t = run_experiment(sim_spec({"x"}, {"cope"}));
    const double f = find(aggregate(t), "x", "cope").no_partner_fraction;
    return {t.failures() == 0 && f >= kNoPartnerLo && f <= kNoPartnerHi,
            fmt("X/COPE no-partner fraction %.3f (band [%.2f,%.2f])", f, kNoPartnerLo, kNoPartnerHi)};
}

Verdict buffer_criterion()
{
    auto s = sim_spec({"x"}, {"nonc", "cope", "ncaqm"});
    s.axis = SweepAxis::buffer;
    s.values = {10, 30, 50};
    const auto t = run_experiment(s);
    const auto agg = aggregate(t);
    bool pass = t.failures() == 0;
    std::string d = "X cope improvement";
    for (double L : s.values)
        d += fmt(" L%g %+.1f%%", L, find(agg, "x", "cope", L).improvement_pct);
    for (std::size_t k = 0; k + 1 < s.values.size(); ++k) {
        const double tv =
            paired_t(per_seed(t, "x", "cope", s.values[k], &ResultRow::improvement_pct),
                     per_seed(t, "x", "cope", s.values[k + 1], &ResultRow::improvement_pct));
        pass = pass && tv > -kTcrit9;
        d += fmt("; t(L%g->L%g)=%.2f", s.values[k], s.values[k + 1], tv);
    }
    d += "; ncaqm-cope";
    for (double L : s.values) {
        const double gap = find(agg, "x", "ncaqm", L).mean_bps - find(agg, "x", "cope", L).mean_bps;
        pass = pass && gap >= 0.0;
        d += fmt(" L%g %+.0f", L, gap);
    }
    return {pass, d + " bps"};
}

Verdict wheel_criterion()
{
    auto s = sim_spec({"wheel"}, {"nonc", "cope", "ncaqm"});
    s.buffer = 30;
    s.axis = SweepAxis::flows;
    s.values = {2, 4, 8};
    const auto t = run_experiment(s);
    const auto agg = aggregate(t);
    bool pass = t.failures() == 0;
    std::string d;
    for (const char* arm : {"nonc", "cope", "ncaqm"}) {
        const double sign = std::string(arm) == "nonc" ? -1.0 : 1.0; // expected direction
        d += fmt("%s%s", d.empty() ? "" : "; ", arm);
        for (double n : s.values)
            d += fmt(" %.0fk", find(agg, "wheel", arm, n).mean_bps / 1e3);
        for (std::size_t k = 0; k + 1 < s.values.size(); ++k) {
            const double tv = paired_t(per_seed(t, "wheel", arm, s.values[k], &ResultRow::aggregate_bps),
                                       per_seed(t, "wheel", arm, s.values[k + 1], &ResultRow::aggregate_bps));
            pass = pass && sign * tv > -kTcrit9;
            d += fmt(" t=%.2f", tv);
        }
    }
    const double gap = find(agg, "wheel", "ncaqm", 8).mean_bps - find(agg, "wheel", "cope", 8).mean_bps;
    pass = pass && gap >= 0.0;
    return {pass, d + fmt("; ncaqm-cope at 8 flows %+.0f bps", gap)};
}

Verdict butterfly_criterion()
{
    const auto t = run_experiment(sim_spec({"butterfly"}, {"nonc", "bfly", "ncaqm"}));
    const auto agg = aggregate(t);
    const auto& n = find(agg, "butterfly", "nonc");
    const auto& b = find(agg, "butterfly", "bfly");
    const auto& q = find(agg, "butterfly", "ncaqm");
    const bool order = q.mean_bps > b.mean_bps && b.mean_bps > n.mean_bps;
    const double ratio = b.improvement_pct > 0 ? q.improvement_pct / b.improvement_pct : 0.0;
    return {t.failures() == 0 && order && ratio >= kRatioMin,
            fmt("nonc %.0fk bfly %+.1f%% ncaqm %+.1f%% (ratio %.2f, order %s)", n.mean_bps / 1e3, b.improvement_pct,
                q.improvement_pct, ratio, order ? "ok" : "broken")};
}

Verdict determinism_criterion()
{
    struct Cell {
        const char* topo;
        Discipline d;
        TransportKind tr;
        std::uint64_t seed;
    };
    const std::vector<Cell> cells = {{"x", Discipline::ncaqm, TransportKind::tcp, 5},
                                     {"cross", Discipline::cope, TransportKind::tcp, 9},
                                     {"grid3", Discipline::nonc, TransportKind::tcp, 3},
                                     {"butterfly", Discipline::bfly, TransportKind::tcp, 2},
                                     {"alice-bob", Discipline::ncaqm, TransportKind::optimal, 4}};
    bool pass = true;
    for (const auto& c : cells) {
        SimConfig cfg;
        cfg.qm.discipline = c.d;
        cfg.transport = c.tr;
        cfg.seed = c.seed;
        cfg.duration = kDuration;
        const auto a = to_json(simulate(make_topology(c.topo), cfg)).dump();
        const auto b = to_json(simulate(make_topology(c.topo), cfg)).dump();
        pass = pass && a == b;
    }
    auto s = sim_spec({"x", "grid"}, {"nonc", "ncaqm"});
    s.seeds = {1, 2};
    s.duration = 20.0;
    s.threads = 1;
    const auto a = to_csv(run_experiment(s));
    s.threads = 3;
    const auto b = to_csv(run_experiment(s));
    pass = pass && a == b;
    return {pass, fmt("%zu single cells rerun, sweep csv identical across thread counts: %s", cells.size(),
                      a == b ? "yes" : "no")};
}

// ---- randomized invariant suites ----

struct SuiteCount {
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;
    void check(bool ok, const std::string& what)
    {
        if (!ok && failures++ == 0)
            first_failure = what;
    }
};

/// Random enqueue/transmit sequences on one relay: natives are conserved,
/// the queue never exceeds L, and every planned combination is decodable.
void queue_suite(SuiteCount& sc, std::size_t cases)
{
    const std::vector<std::string> topos = {"x", "cross", "wheel4", "wheel6", "alice-bob", "butterfly"};
    std::mt19937_64 gen(101);
    for (std::size_t c = 0; c < cases; ++c, ++sc.cases) {
        const std::string topo = topos[gen() % topos.size()];
        const Scenario s = make_topology(topo);
        const Network net = build_network(s, s.depth);
        const RouteTable routes(net.flows);
        const QmContext ctx{&net, &routes};
        const auto d = static_cast<Discipline>(gen() % 4);
        // the relay is the second node of flow 0's path
        const NodeId at = net.flows[0].path[1];
        QmConfig qc;
        qc.discipline = d;
        qc.buffer = 1 + gen() % 12;
        qc.fallback = gen() % 2 ? DropFallback::tail : DropFallback::incoming;
        QueueManager qm(at, qc, ctx);
        std::set<std::uint64_t> known;
        Knowledge k = [&](NodeId, std::uint64_t id) { return known.count(id) != 0; };
        std::mt19937_64 rng(gen());
        std::uint64_t next_id = 1, in = 0, out = 0, dropped = 0;
        bool ok = true;
        for (int step = 0; step < 40 && ok; ++step) {
            if (gen() % 3) {
                std::vector<std::size_t> through;
                for (std::size_t f = 0; f < net.flows.size(); ++f)
                    for (std::size_t i = 1; i + 1 < net.flows[f].path.size(); ++i)
                        if (net.flows[f].path[i] == at)
                            through.push_back(f);
                if (through.empty())
                    break;
                NativePacket p;
                p.id = next_id++;
                p.flow = FlowId{through[gen() % through.size()]};
                p.seq = static_cast<std::uint32_t>(p.id);
                if (gen() % 2)
                    known.insert(p.id);
                ++in;
                for (const auto& x : qm.enqueue(make_uncoded(p, at, routes.after(p, at)), k, rng))
                    dropped += x.natives.size();
            } else {
                std::vector<CodedPacket> lost;
                if (auto pl = qm.plan(k, rng, &lost)) {
                    ok = ok && eligible(pl->pkt, at, ctx, k);
                    out += qm.commit(*pl).natives.size();
                }
                for (const auto& x : lost)
                    dropped += x.natives.size();
            }
            std::size_t queued = 0;
            for (const auto& p : qm.queue().packets())
                queued += p.natives.size();
            ok = ok && queued + out + dropped == in && qm.queue().size() <= qc.buffer && qm.queue().consistent();
        }
        sc.check(ok, fmt("queue case %zu on %s/%s", c, topo.c_str(), discipline_name(d)));
    }
}

/// A second recoding pass leaves the queue unchanged.
void idempotence_suite(SuiteCount& sc, std::size_t cases)
{
    const Scenario s = make_wheel(4);
    const Network net = build_network(s, CodingDepth::one_hop);
    const RouteTable routes(net.flows);
    const QmContext ctx{&net, &routes};
    const NodeId at{0};
    std::mt19937_64 gen(202);
    std::uint64_t next_id = 1;
    auto blocks = [](const OutputQueue& q) {
        std::vector<std::vector<std::uint64_t>> b;
        for (const auto& p : q.packets()) {
            b.emplace_back();
            for (const auto& e : p.natives)
                b.back().push_back(e.pkt.id);
        }
        return b;
    };
    for (std::size_t c = 0; c < cases; ++c, ++sc.cases) {
        QmConfig qc;
        qc.discipline = Discipline::ncaqm;
        qc.buffer = 50;
        QueueManager qm(at, qc, ctx);
        std::set<std::uint64_t> known;
        const Knowledge none = [](NodeId, std::uint64_t) { return false; };
        std::mt19937_64 rng(1);
        const std::size_t n = 1 + gen() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            NativePacket p;
            p.id = next_id++;
            p.flow = FlowId{gen() % 4};
            if (gen() % 3)
                known.insert(p.id);
            qm.enqueue(make_uncoded(p, at, routes.after(p, at)), none, rng);
        }
        const Knowledge k = [&](NodeId, std::uint64_t id) { return known.count(id) != 0; };
        qm.recode(k);
        const auto once = blocks(qm.queue());
        qm.recode(k);
        sc.check(blocks(qm.queue()) == once && qm.queue().consistent(), fmt("idempotence case %zu", c));
    }
}

/// Simplex projections and proximal steps land on the simplex and beat
/// random feasible points.
void simplex_suite(SuiteCount& sc, std::size_t cases)
{
    std::mt19937_64 gen(303);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::exponential_distribution<double> ex(1.0);
    for (std::size_t c = 0; c < cases; ++c, ++sc.cases) {
        const std::size_t n = 1 + gen() % 8;
        std::vector<double> v(n), gain(n), anchor(n);
        for (auto& x : v)
            x = nd(gen);
        for (auto& x : gain)
            x = nd(gen);
        double as = 0.0;
        for (auto& x : anchor)
            as += (x = ex(gen));
        for (auto& x : anchor)
            x /= as;
        const double pc = 0.1 + 2.0 * std::uniform_real_distribution<double>(0.0, 1.0)(gen);
        const auto p = project_simplex(v);
        const auto w = proximal_simplex_max(gain, anchor, pc);
        auto on_simplex = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double e : x) {
                if (e < 0.0)
                    return false;
                s += e;
            }
            return std::abs(s - 1.0) < 1e-9;
        };
        auto dist = [&](const std::vector<double>& y) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += (v[i] - y[i]) * (v[i] - y[i]);
            return s;
        };
        auto obj = [&](const std::vector<double>& y) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += gain[i] * y[i] - pc * (y[i] - anchor[i]) * (y[i] - anchor[i]);
            return s;
        };
        bool ok = on_simplex(p) && on_simplex(w);
        for (int r = 0; r < 8 && ok; ++r) {
            std::vector<double> y(n);
            double ys = 0.0;
            for (auto& x : y)
                ys += (x = ex(gen));
            for (auto& x : y)
                x /= ys;
            ok = dist(p) <= dist(y) + 1e-12 && obj(w) >= obj(y) - 1e-12;
        }
        sc.check(ok, fmt("simplex case %zu (n=%zu)", c, n));
    }
}

/// Residual loss at success 0.85 with 7 retries, in batches of 100 draws.
double residual_suite(SuiteCount& sc, std::size_t cases)
{
    std::mt19937_64 rng(404);
    std::uint64_t failed = 0, total = 0;
    for (std::size_t c = 0; c < cases; ++c, ++sc.cases) {
        for (int i = 0; i < 100; ++i, ++total) {
            const auto o = draw_attempts({0.85}, {}, 7, rng);
            failed += !o.target_ok[0];
            sc.check(o.attempts >= 1 && o.attempts <= 8, "attempt count out of range");
        }
    }
    const double rate = static_cast<double>(failed) / static_cast<double>(total);
    sc.check(rate < kResidualLossMax, fmt("residual loss %.2e", rate));
    return rate;
}

/// End-to-end conservation, eligibility and causality on short runs.
void simulation_suite(SuiteCount& sc, std::size_t cases)
{
    const std::vector<std::string> topos = {"alice-bob", "x", "cross", "wheel5", "butterfly", "grid2"};
    std::mt19937_64 gen(505);
    for (std::size_t c = 0; c < cases; ++c, ++sc.cases) {
        SimConfig cfg;
        cfg.seed = gen();
        cfg.duration = 2.0;
        cfg.start_window = 0.5;
        cfg.qm.discipline = static_cast<Discipline>(gen() % 4);
        cfg.qm.buffer = 2 + gen() % 20;
        cfg.channel.loss = static_cast<double>(gen() % 30) / 100.0;
        cfg.transport = gen() % 4 ? TransportKind::tcp : TransportKind::optimal;
        const auto m = simulate(make_topology(topos[gen() % topos.size()]), cfg);
        sc.check(m.conserved() && m.eligibility_violations == 0 && m.causality_violations == 0,
                 fmt("simulation case %zu", c));
    }
}

Verdict invariant_criterion()
{
    const auto t0 = std::chrono::steady_clock::now();
    SuiteCount q, idem, simp, res, sim;
    queue_suite(q, 3000);
    idempotence_suite(idem, 2000);
    simplex_suite(simp, 3000);
    const double rate = residual_suite(res, 2000);
    simulation_suite(sim, 200);
    const double secs = seconds_since(t0);
    std::size_t cases = 0, failures = 0;
    std::string first;
    for (const auto* s : {&q, &idem, &simp, &res, &sim}) {
        cases += s->cases;
        failures += s->failures;
        if (first.empty())
            first = s->first_failure;
    }
    return {failures == 0 && cases >= kInvariantCases && secs < kInvariantSeconds,
            fmt("%zu cases (queue %zu, idempotence %zu, simplex %zu, residual %zu, sim %zu), %zu failures%s%s; "
                "residual loss %.1e; %.1f s",
                cases, q.cases, idem.cases, simp.cases, res.cases, sim.cases, failures, first.empty() ? "" : ", first: ",
                first.c_str(), rate, secs)};
}

} // namespace

int main()
{
    using Task = std::function<Verdict()>;
    std::vector<std::future<SolverOutcome>> solver;
    for (const auto& c : solver_cases())
        solver.push_back(std::async(std::launch::async, [&c] { return solver_criterion(c); }));
    std::vector<std::pair<int, Task>> tasks = {
        {8, subproblem_criterion},  {9, ordering_criterion},     {10, starvation_criterion},
        {11, buffer_criterion},     {12, wheel_criterion},       {13, butterfly_criterion},
        {14, determinism_criterion}, {15, invariant_criterion},
    };
    std::vector<std::future<Verdict>> rest;
    for (auto& [id, fn] : tasks)
        rest.push_back(std::async(std::launch::async, [fn = fn] {
            try {
                return fn();
            } catch (const std::exception& e) {
                return Verdict{false, std::string("exception: ") + e.what()};
            }
        }));

    int failures = 0;
    auto report = [&](int id, const Verdict& v) {
        std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    };
    std::vector<SolverOutcome> outcomes;
    for (std::size_t i = 0; i < solver.size(); ++i) {
        outcomes.push_back(solver[i].get());
        report(static_cast<int>(i) + 1, outcomes.back().verdict);
    }
    double drift = 0.0;
    std::string drifts;
    for (const auto& o : outcomes) {
        drift = std::max(drift, o.dual_drift);
        drifts += fmt("%s%.1e", drifts.empty() ? "" : " ", o.dual_drift);
    }
    report(7, {drift < kDualDrift, fmt("max |dq| over last %zu iterations: %s (tol %.0e)", kDualWindow,
                                       drifts.c_str(), kDualDrift)});
    for (std::size_t i = 0; i < tasks.size(); ++i)
        report(tasks[i].first, rest[i].get());
    std::printf("%d of 15 criteria failed\n", failures);
    return failures;
}
