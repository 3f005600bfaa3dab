#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncsim/generators.hpp"
#include "ncsim/scenario_io.hpp"
#include "ncsim/sim.hpp"

namespace ncsim {

class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SweepAxis { none, buffer, capacity, flows };

inline SweepAxis parse_axis(const std::string& s)
{
    if (s == "none")
        return SweepAxis::none;
    if (s == "buffer")
        return SweepAxis::buffer;
    if (s == "capacity")
        return SweepAxis::capacity;
    if (s == "flows")
        return SweepAxis::flows;
    throw ExperimentError("unknown sweep axis '" + s + "'");
}

inline const char* axis_name(SweepAxis a)
{
    switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::buffer: return "buffer";
    case SweepAxis::capacity: return "capacity";
    case SweepAxis::flows: return "flows";
    }
    return "?";
}

/// One treatment: a queue discipline paired with a transport.
struct Arm {
    std::string label;
    Discipline discipline = Discipline::nonc;
    TransportKind transport = TransportKind::tcp;
};

inline Arm make_arm(const std::string& label)
{
    if (label == "optimal")
        return {label, Discipline::ncaqm, TransportKind::optimal};
    return {label, parse_discipline(label), TransportKind::tcp};
}

struct ExperimentSpec {
    std::string name = "experiment";
    // Topology names. "grid" draws grid<seed> per seed; with the flows axis
    // the point is appended ("wheel" -> "wheel4"). A path ending in .json is
    // loaded as a scenario file.
    std::vector<std::string> scenarios;
    std::vector<Arm> arms;
    std::string baseline = "nonc";
    std::size_t buffer = 10;
    double capacity_mbps = 1.0;
    std::uint32_t packet_size = 500;
    double duration = 60.0;
    std::vector<std::uint64_t> seeds;
    SweepAxis axis = SweepAxis::none;
    std::vector<double> values;
    bool cdf = false;
    unsigned threads = 0; // 0: hardware concurrency
    SimConfig base;

    void validate() const
    {
        if (!(duration > 0.0))
            throw ExperimentError("duration must be positive");
        if (seeds.empty())
            throw ExperimentError("at least one seed is required");
        if (scenarios.empty() || arms.empty())
            throw ExperimentError("at least one scenario and one arm are required");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (!(values[i] > values[i - 1]))
                throw ExperimentError("sweep values must be strictly increasing");
        if (axis != SweepAxis::none && values.empty())
            throw ExperimentError(std::string("axis '") + axis_name(axis) + "' needs values");
        if (axis == SweepAxis::none && !values.empty())
            throw ExperimentError("sweep values given without an axis");
    }

    /// Config points; a single NaN point when there is no sweep.
    [[nodiscard]] std::vector<double> points() const
    {
        if (axis == SweepAxis::none)
            return {std::numeric_limits<double>::quiet_NaN()};
        return values;
    }
};

struct ResultRow {
    std::string scenario;
    std::string arm;
    double point = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    std::string status = "ok"; // ok | error
    double aggregate_bps = 0.0;
    double improvement_pct = std::numeric_limits<double>::quiet_NaN();
    double coded_fraction = 0.0;
    double no_partner_fraction = 0.0;
    std::uint64_t drops_queue = 0;
    std::uint64_t drops_channel = 0;
    std::uint64_t retransmissions = 0;
    std::vector<double> flow_bps;
    std::string error;

    [[nodiscard]] bool ok() const { return status == "ok"; }
};

struct ResultTable {
    std::string name;
    std::string axis = "none";
    std::string baseline = "nonc";
    std::vector<ResultRow> rows;

    [[nodiscard]] std::size_t failures() const
    {
        return static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.ok(); }));
    }
};

namespace detail {

inline bool same_point(double a, double b)
{
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

inline std::string fmt_num(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline double parse_num(const std::string& s)
{
    if (s == "nan" || s.empty())
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ExperimentError("bad number '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s)
{
    std::uint64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ExperimentError("bad integer '" + s + "'");
    return v;
}

inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

inline std::vector<std::string> csv_split(const std::string& line)
{
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

} // namespace detail

/// Scenario for one cell.
inline Scenario resolve_scenario(const std::string& name, SweepAxis axis, double point,
                                 std::uint64_t seed)
{
    if (name.size() > 5 && name.ends_with(".json"))
        return load_scenario(name);
    if (axis == SweepAxis::flows)
        return make_topology(name + std::to_string(static_cast<std::uint64_t>(point)));
    if (name == "grid")
        return make_topology("grid" + std::to_string(seed));
    return make_topology(name);
}

inline SimConfig cell_config(const ExperimentSpec& spec, const Arm& arm, double point,
                             std::uint64_t seed)
{
    SimConfig cfg = spec.base;
    cfg.qm.discipline = arm.discipline;
    cfg.transport = arm.transport;
    cfg.qm.buffer = spec.buffer;
    cfg.channel.bitrate_bps = spec.capacity_mbps * 1e6;
    cfg.tcp.mss = spec.packet_size;
    cfg.duration = spec.duration;
    cfg.seed = seed;
    if (spec.axis == SweepAxis::buffer)
        cfg.qm.buffer = static_cast<std::size_t>(point);
    else if (spec.axis == SweepAxis::capacity)
        cfg.channel.bitrate_bps = point * 1e6;
    return cfg;
}

inline ResultRow run_cell(const ExperimentSpec& spec, const std::string& scenario, const Arm& arm,
                          double point, std::uint64_t seed)
{
    ResultRow row;
    row.scenario = scenario;
    row.arm = arm.label;
    row.point = point;
    row.seed = seed;
    try {
        const Metrics m =
            simulate(resolve_scenario(scenario, spec.axis, point, seed), cell_config(spec, arm, point, seed));
        row.aggregate_bps = m.aggregate_throughput();
        row.coded_fraction = m.coded_fraction();
        row.no_partner_fraction = m.no_partner_fraction();
        row.drops_queue = m.drops_queue();
        row.drops_channel = m.drops_channel();
        for (const auto& f : m.flows) {
            row.flow_bps.push_back(f.throughput_bps);
            row.retransmissions += f.retransmissions;
        }
    } catch (const std::exception& e) {
        row.status = "error";
        row.error = e.what();
    }
    return row;
}

/// Fills improvement_pct from the baseline row with the same scenario, point
/// and seed.
inline void pair_with_baseline(ResultTable& t)
{
    using Key = std::tuple<std::string, std::string, std::uint64_t>;
    std::map<Key, double> base;
    for (const auto& r : t.rows)
        if (r.arm == t.baseline && r.ok())
            base[{r.scenario, detail::fmt_num(r.point), r.seed}] = r.aggregate_bps;
    for (auto& r : t.rows) {
        r.improvement_pct = std::numeric_limits<double>::quiet_NaN();
        if (!r.ok())
            continue;
        auto it = base.find({r.scenario, detail::fmt_num(r.point), r.seed});
        if (it != base.end() && it->second > 0.0)
            r.improvement_pct = 100.0 * (r.aggregate_bps / it->second - 1.0);
    }
}

/// Runs every (scenario, point, arm, seed) cell. Rows come back in that
/// nesting order whatever the thread count.
inline ResultTable run_experiment(const ExperimentSpec& spec)
{
    spec.validate();
    struct Cell {
        const std::string* scenario;
        const Arm* arm;
        double point;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    const auto points = spec.points();
    for (const auto& sc : spec.scenarios)
        for (double p : points)
            for (const auto& arm : spec.arms)
                for (auto seed : spec.seeds)
                    cells.push_back({&sc, &arm, p, seed});

    ResultTable t;
    t.name = spec.name;
    t.axis = axis_name(spec.axis);
    t.baseline = spec.baseline;
    t.rows.resize(cells.size());

    unsigned n = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, cells.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& c = cells[i];
            t.rows[i] = run_cell(spec, *c.scenario, *c.arm, c.point, c.seed);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k)
        pool.emplace_back(work);
    work();
    for (auto& th : pool)
        th.join();

    pair_with_baseline(t);
    return t;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
    std::string scenario;
    std::string arm;
    double point = std::numeric_limits<double>::quiet_NaN();
    std::size_t seeds = 0; // successful cells
    double mean_bps = 0.0;
    double stddev_bps = 0.0;
    double baseline_bps = std::numeric_limits<double>::quiet_NaN();
    double improvement_pct = std::numeric_limits<double>::quiet_NaN(); // of the seed means
    double mean_paired_improvement_pct = std::numeric_limits<double>::quiet_NaN();
    double no_partner_fraction = 0.0;
};

/// Seed means per (scenario, arm, point), in first-appearance order. Each
/// row's throughput is already a time average over its run.
inline std::vector<AggregateRow> aggregate(const ResultTable& t)
{
    std::vector<AggregateRow> out;
    std::vector<std::vector<const ResultRow*>> members;
    for (const auto& r : t.rows) {
        std::size_t i = 0;
        while (i < out.size() &&
               !(out[i].scenario == r.scenario && out[i].arm == r.arm && detail::same_point(out[i].point, r.point)))
            ++i;
        if (i == out.size()) {
            out.push_back({r.scenario, r.arm, r.point});
            members.emplace_back();
        }
        if (r.ok())
            members[i].push_back(&r);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& a = out[i];
        const auto& ms = members[i];
        a.seeds = ms.size();
        if (ms.empty())
            continue;
        double s = 0.0, np = 0.0, imp = 0.0;
        std::size_t nimp = 0;
        for (const auto* r : ms) {
            s += r->aggregate_bps;
            np += r->no_partner_fraction;
            if (!std::isnan(r->improvement_pct)) {
                imp += r->improvement_pct;
                ++nimp;
            }
        }
        const double k = static_cast<double>(ms.size());
        a.mean_bps = s / k;
        a.no_partner_fraction = np / k;
        if (nimp)
            a.mean_paired_improvement_pct = imp / static_cast<double>(nimp);
        double v = 0.0;
        for (const auto* r : ms)
            v += (r->aggregate_bps - a.mean_bps) * (r->aggregate_bps - a.mean_bps);
        a.stddev_bps = ms.size() > 1 ? std::sqrt(v / (k - 1.0)) : 0.0;
    }
    for (auto& a : out) {
        for (const auto& b : out)
            if (b.arm == t.baseline && b.scenario == a.scenario && detail::same_point(b.point, a.point) &&
                b.seeds > 0)
                a.baseline_bps = b.mean_bps;
        if (a.seeds > 0 && a.baseline_bps > 0.0)
            a.improvement_pct = 100.0 * (a.mean_bps / a.baseline_bps - 1.0);
    }
    return out;
}

struct CdfPoint {
    std::string scenario;
    std::string arm;
    double point;
    double improvement_pct;
    double cdf;
};

/// Empirical CDF of per-seed improvements for each non-baseline arm.
inline std::vector<CdfPoint> cdf_points(const ResultTable& t)
{
    std::vector<CdfPoint> out;
    for (const auto& a : aggregate(t)) {
        if (a.arm == t.baseline)
            continue;
        std::vector<double> v;
        for (const auto& r : t.rows)
            if (r.scenario == a.scenario && r.arm == a.arm && detail::same_point(r.point, a.point) &&
                r.ok() && !std::isnan(r.improvement_pct))
                v.push_back(r.improvement_pct);
        std::sort(v.begin(), v.end());
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back({a.scenario, a.arm, a.point, v[i],
                           static_cast<double>(i + 1) / static_cast<double>(v.size())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Emission

enum class Format { csv, json };

inline Format parse_format(const std::string& s)
{
    if (s == "csv")
        return Format::csv;
    if (s == "json")
        return Format::json;
    throw ExperimentError("unknown format '" + s + "'");
}

inline const std::vector<std::string>& result_columns()
{
    static const std::vector<std::string> cols = {
        "scenario",        "arm",           "point",         "seed",
        "status",          "aggregate_bps", "improvement_pct", "coded_fraction",
        "no_partner_fraction", "drops_queue", "drops_channel", "retransmissions",
        "flow_bps",        "error"};
    return cols;
}

inline std::string to_csv(const ResultTable& t)
{
    std::ostringstream os;
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : t.rows) {
        std::string flows;
        for (std::size_t i = 0; i < r.flow_bps.size(); ++i)
            flows += (i ? ";" : "") + detail::fmt_num(r.flow_bps[i]);
        os << detail::csv_quote(r.scenario) << ',' << detail::csv_quote(r.arm) << ','
           << detail::fmt_num(r.point) << ',' << r.seed << ',' << r.status << ','
           << detail::fmt_num(r.aggregate_bps) << ',' << detail::fmt_num(r.improvement_pct) << ','
           << detail::fmt_num(r.coded_fraction) << ',' << detail::fmt_num(r.no_partner_fraction) << ','
           << r.drops_queue << ',' << r.drops_channel << ',' << r.retransmissions << ',' << flows << ','
           << detail::csv_quote(r.error) << '\n';
    }
    return os.str();
}

/// Inverse of to_csv; table-level fields other than rows are left default.
inline ResultTable parse_csv(const std::string& text)
{
    ResultTable t;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || detail::csv_split(line) != result_columns())
        throw ExperimentError("unexpected csv header");
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto f = detail::csv_split(line);
        if (f.size() != result_columns().size())
            throw ExperimentError("csv row has " + std::to_string(f.size()) + " fields");
        ResultRow r;
        r.scenario = f[0];
        r.arm = f[1];
        r.point = detail::parse_num(f[2]);
        r.seed = detail::parse_u64(f[3]);
        r.status = f[4];
        r.aggregate_bps = detail::parse_num(f[5]);
        r.improvement_pct = detail::parse_num(f[6]);
        r.coded_fraction = detail::parse_num(f[7]);
        r.no_partner_fraction = detail::parse_num(f[8]);
        r.drops_queue = detail::parse_u64(f[9]);
        r.drops_channel = detail::parse_u64(f[10]);
        r.retransmissions = detail::parse_u64(f[11]);
        std::istringstream fs(f[12]);
        for (std::string x; std::getline(fs, x, ';');)
            r.flow_bps.push_back(detail::parse_num(x));
        r.error = f[13];
        t.rows.push_back(std::move(r));
    }
    return t;
}

inline nlohmann::ordered_json to_json(const ResultTable& t)
{
    auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json() : nlohmann::ordered_json(v); };
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
        nlohmann::ordered_json o;
        o["scenario"] = r.scenario;
        o["arm"] = r.arm;
        o["point"] = num(r.point);
        o["seed"] = r.seed;
        o["status"] = r.status;
        o["aggregate_bps"] = r.aggregate_bps;
        o["improvement_pct"] = num(r.improvement_pct);
        o["coded_fraction"] = r.coded_fraction;
        o["no_partner_fraction"] = r.no_partner_fraction;
        o["drops_queue"] = r.drops_queue;
        o["drops_channel"] = r.drops_channel;
        o["retransmissions"] = r.retransmissions;
        o["flow_bps"] = r.flow_bps;
        o["error"] = r.error;
        arr.push_back(std::move(o));
    }
    return arr;
}

inline ResultTable table_from_json(const nlohmann::json& arr)
{
    auto num = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    ResultTable t;
    for (const auto& o : arr) {
        ResultRow r;
        r.scenario = o.at("scenario").get<std::string>();
        r.arm = o.at("arm").get<std::string>();
        r.point = num(o.at("point"));
        r.seed = o.at("seed").get<std::uint64_t>();
        r.status = o.at("status").get<std::string>();
        r.aggregate_bps = o.at("aggregate_bps").get<double>();
        r.improvement_pct = num(o.at("improvement_pct"));
        r.coded_fraction = o.at("coded_fraction").get<double>();
        r.no_partner_fraction = o.at("no_partner_fraction").get<double>();
        r.drops_queue = o.at("drops_queue").get<std::uint64_t>();
        r.drops_channel = o.at("drops_channel").get<std::uint64_t>();
        r.retransmissions = o.at("retransmissions").get<std::uint64_t>();
        r.flow_bps = o.at("flow_bps").get<std::vector<double>>();
        r.error = o.at("error").get<std::string>();
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// Improvement over the baseline in the shape of the headline table:
/// one line per topology and config point, one column per treatment.
inline std::string summary_csv(const ResultTable& t)
{
    static const std::vector<std::string> cols = {"optimal", "ncaqm", "cope", "bfly"};
    const auto agg = aggregate(t);
    std::vector<std::string> present;
    for (const auto& c : cols)
        if (std::any_of(agg.begin(), agg.end(), [&](const AggregateRow& a) { return a.arm == c; }))
            present.push_back(c);
    std::ostringstream os;
    os << "topology," << t.axis << ',' << t.baseline << "_bps";
    for (const auto& c : present)
        os << ',' << c << "_pct";
    os << '\n';
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& a : agg)
        if (std::none_of(keys.begin(), keys.end(), [&](const auto& k) {
                return k.first == a.scenario && detail::same_point(k.second, a.point);
            }))
            keys.emplace_back(a.scenario, a.point);
    for (const auto& [sc, p] : keys) {
        double base = std::numeric_limits<double>::quiet_NaN();
        for (const auto& a : agg)
            if (a.scenario == sc && detail::same_point(a.point, p))
                base = a.baseline_bps;
        os << detail::csv_quote(sc) << ',' << detail::fmt_num(p) << ',' << detail::fmt_num(base);
        for (const auto& c : present) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto& a : agg)
                if (a.scenario == sc && a.arm == c && detail::same_point(a.point, p))
                    v = a.improvement_pct;
            os << ',' << detail::fmt_num(v);
        }
        os << '\n';
    }
    return os.str();
}

inline std::string cdf_csv(const ResultTable& t)
{
    std::ostringstream os;
    os << "scenario,arm,point,improvement_pct,cdf\n";
    for (const auto& c : cdf_points(t))
        os << detail::csv_quote(c.scenario) << ',' << detail::csv_quote(c.arm) << ','
           << detail::fmt_num(c.point) << ',' << detail::fmt_num(c.improvement_pct) << ','
           << detail::fmt_num(c.cdf) << '\n';
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw ExperimentError("cannot write " + p.string());
    f << text;
    if (!f)
        throw ExperimentError("write failed for " + p.string());
}

/// Writes <name>.<fmt>, <name>_summary.csv and, when asked, <name>_cdf.csv.
/// Returns the paths written.
inline std::vector<std::filesystem::path> emit(const ResultTable& t, const std::filesystem::path& dir,
                                               Format fmt, bool with_cdf = false)
{
    if (t.rows.empty())
        throw ExperimentError("nothing to emit");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::vector<std::filesystem::path> out;
    const auto primary = dir / (t.name + (fmt == Format::csv ? ".csv" : ".json"));
    write_file(primary, fmt == Format::csv ? to_csv(t) : to_json(t).dump(2) + "\n");
    out.push_back(primary);
    out.push_back(dir / (t.name + "_summary.csv"));
    write_file(out.back(), summary_csv(t));
    if (with_cdf) {
        out.push_back(dir / (t.name + "_cdf.csv"));
        write_file(out.back(), cdf_csv(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Specs

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n)
{
    std::vector<std::uint64_t> s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = first + i;
    return s;
}

inline std::vector<std::string> preset_names()
{
    return {"table1", "fig3-cdf", "fig4-buffers", "fig5-wheel", "fig6-capacity", "fig8-butterfly"};
}

/// Built-in sweep grids. Buffer values 5 and 20 and capacities 2 and 5.5 Mbps
/// are interpolated between the named endpoints.
inline ExperimentSpec preset(const std::string& name)
{
    ExperimentSpec s;
    s.name = name;
    s.seeds = seed_range(1, 10);
    auto arms = [](std::initializer_list<const char*> labels) {
        std::vector<Arm> v;
        for (const char* l : labels)
            v.push_back(make_arm(l));
        return v;
    };
    if (name == "table1") {
        s.scenarios = {"alice-bob", "x", "cross", "grid"};
        s.arms = arms({"nonc", "cope", "ncaqm", "optimal"});
    } else if (name == "fig3-cdf") {
        s.scenarios = {"alice-bob", "x", "cross", "grid"};
        s.arms = arms({"nonc", "cope", "ncaqm"});
        s.seeds = seed_range(1, 30);
        s.cdf = true;
    } else if (name == "fig4-buffers") {
        s.scenarios = {"alice-bob", "x", "cross", "grid"};
        s.arms = arms({"nonc", "cope", "ncaqm"});
        s.axis = SweepAxis::buffer;
        s.values = {5, 10, 20, 30, 50};
    } else if (name == "fig5-wheel") {
        s.scenarios = {"wheel"};
        s.arms = arms({"nonc", "cope", "ncaqm"});
        s.buffer = 30;
        s.axis = SweepAxis::flows;
        s.values = {2, 4, 6, 8};
    } else if (name == "fig6-capacity") {
        s.scenarios = {"alice-bob", "x", "cross"};
        s.arms = arms({"nonc", "cope", "ncaqm"});
        s.buffer = 30;
        s.axis = SweepAxis::capacity;
        s.values = {1, 2, 5.5, 11};
    } else if (name == "fig8-butterfly") {
        s.scenarios = {"butterfly"};
        s.arms = arms({"nonc", "bfly", "cope", "ncaqm"});
    } else {
        throw ExperimentError("unknown preset '" + name + "'");
    }
    return s;
}

/// Spec from JSON. Either {"preset": name, ...overrides} or a full spec; seeds
/// may be a list or a count starting at 1.
inline ExperimentSpec spec_from_json(const nlohmann::json& j)
{
    ExperimentSpec s = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : ExperimentSpec{};
    if (j.contains("name"))
        s.name = j.at("name").get<std::string>();
    if (j.contains("scenarios"))
        s.scenarios = j.at("scenarios").get<std::vector<std::string>>();
    if (j.contains("scenario"))
        s.scenarios = {j.at("scenario").get<std::string>()};
    if (j.contains("arms")) {
        s.arms.clear();
        for (const auto& a : j.at("arms")) {
            if (a.is_string()) {
                s.arms.push_back(make_arm(a.get<std::string>()));
                continue;
            }
            Arm arm;
            arm.label = a.at("label").get<std::string>();
            arm.discipline = parse_discipline(a.value("discipline", arm.label));
            arm.transport = parse_transport(a.value("transport", std::string("tcp")));
            s.arms.push_back(arm);
        }
    }
    s.baseline = j.value("baseline", s.baseline);
    s.buffer = j.value("buffer", s.buffer);
    s.capacity_mbps = j.value("capacity_mbps", s.capacity_mbps);
    s.packet_size = j.value("packet_size", s.packet_size);
    s.duration = j.value("duration", s.duration);
    if (j.contains("seeds")) {
        const auto& sd = j.at("seeds");
        s.seeds = sd.is_array() ? sd.get<std::vector<std::uint64_t>>() : seed_range(1, sd.get<std::size_t>());
    }
    if (j.contains("axis"))
        s.axis = parse_axis(j.at("axis").get<std::string>());
    if (j.contains("values"))
        s.values = j.at("values").get<std::vector<double>>();
    s.cdf = j.value("cdf", s.cdf);
    s.threads = j.value("threads", s.threads);
    s.base.channel.loss = j.value("loss", s.base.channel.loss);
    s.base.qm.window = j.value("window", s.base.qm.window);
    s.base.qm.recode_interval = j.value("recode_interval", s.base.qm.recode_interval);
    if (j.contains("fallback"))
        s.base.qm.fallback =
            j.at("fallback").get<std::string>() == "incoming" ? DropFallback::incoming : DropFallback::tail;
    s.base.reorder_hold = j.value("reorder_hold", s.base.reorder_hold);
    s.validate();
    return s;
}

} // namespace ncsim
