#pragma once

// File formats: EigenSystem JSON, trace CSV + summary JSON, rank JSON/CSV and
// sweep CSV/JSON. Doubles are written with 17 significant digits so that
// every value round-trips exactly.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "xpoint/circuit.hpp"
#include "xpoint/experiments.hpp"
#include "xpoint/fdsim.hpp"
#include "xpoint/linalg.hpp"
#include "xpoint/pagerank.hpp"

namespace xpoint {

using json = nlohmann::json;

inline json to_json(const OpAmpParams& p)
{
    return {{"L0", p.L0}, {"omega0", p.omega0}, {"v_supp", p.v_supp}};
}

inline json to_json(const SimConfig& c)
{
    return {{"alpha", c.alpha},
            {"x0", c.x0},
            {"t_max", c.t_max},
            {"conv_tol", c.conv_tol},
            {"record_stride", c.record_stride},
            {"settle_factor", c.settle_factor}};
}

inline json to_json(const Thresholds& t)
{
    return {{"time_cv_across_sizes", t.time_cv_across_sizes},
            {"time_spread_in_cell", t.time_spread_in_cell},
            {"epsilon_flatness_ratio", t.epsilon_flatness_ratio},
            {"variation_band", t.variation_band}};
}

/// {A, delta | lambdas, L0, omega0, v_supp}; lambda_max is kept so the
/// document rebuilds the identical system.
inline json to_json(const EigenSystem<Matrix>& sys)
{
    json a = json::array();
    for (std::size_t r = 0; r < sys.A().rows(); ++r) {
        a.push_back(std::vector<double>(sys.A().row(r).begin(), sys.A().row(r).end()));
    }
    json j = {{"A", a},
              {"lambda_max", sys.lambda_max()},
              {"L0", sys.params().L0},
              {"omega0", sys.params().omega0},
              {"v_supp", sys.params().v_supp}};
    if (sys.delta()) {
        j["delta"] = *sys.delta();
    } else {
        j["lambdas"] = sys.lambdas().values();
    }
    return j;
}

inline EigenSystem<Matrix> eigen_system_from_json(const json& j)
{
    const auto rows = j.at("A").get<std::vector<std::vector<double>>>();
    if (rows.empty()) {
        throw std::invalid_argument("EigenSystem JSON: empty A");
    }
    std::vector<double> entries;
    for (const auto& r : rows) {
        if (r.size() != rows.size()) {
            throw DimensionError("EigenSystem JSON: A is not square");
        }
        entries.insert(entries.end(), r.begin(), r.end());
    }
    Matrix a(rows.size(), rows.size(), std::move(entries));
    OpAmpParams p;
    p.L0 = j.at("L0").get<double>();
    p.omega0 = j.at("omega0").get<double>();
    p.v_supp = j.at("v_supp").get<double>();
    const double lmax = j.contains("lambda_max") ? j.at("lambda_max").get<double>() : power_iteration(a).value;
    if (j.contains("delta")) {
        return EigenSystem<Matrix>::uniform(std::move(a), lmax, j.at("delta").get<double>(), p);
    }
    return EigenSystem<Matrix>::varied(std::move(a), lmax, Vector(j.at("lambdas").get<std::vector<double>>()), p);
}

namespace detail {

inline json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

inline json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

inline void set_precision(std::ostream& out) { out.precision(17); }

} // namespace detail

/// Header time_s,x_1..x_N then one line per recorded sample.
inline void write_trace_csv(std::ostream& out, const Trace& tr)
{
    detail::set_precision(out);
    const std::size_t n = tr.steady_state.size();
    out << "time_s";
    for (std::size_t k = 1; k <= n; ++k) {
        out << ",x_" << k;
    }
    out << '\n';
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
        out << tr.times[s];
        for (double v : tr.states[s]) {
            out << ',' << v;
        }
        out << '\n';
    }
}

struct TraceTable {
    std::vector<std::string> header;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
};

inline TraceTable read_trace_csv(std::istream& in)
{
    TraceTable t;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError("empty trace file", 0);
    }
    ++lineno;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            t.header.push_back(cell);
        }
    }
    if (t.header.empty() || t.header.front() != "time_s") {
        throw ParseError("trace header must start with time_s", lineno);
    }
    while (std::getline(in, line)) {
        ++lineno;
        auto row = detail::parse_csv_line(line, lineno);
        if (row.size() != t.header.size()) {
            throw ParseError("trace row width does not match header", lineno);
        }
        t.times.push_back(row.front());
        t.states.emplace_back(row.begin() + 1, row.end());
    }
    return t;
}

/// {computing_time_s, epsilon, lambda_h, saturated_index}; the index is
/// 0-based, null fields mark absent values.
inline json trace_summary(const Trace& tr, std::optional<double> epsilon, std::optional<double> lambda_h)
{
    json j = {{"computing_time_s", detail::optional_number(tr.computing_time)},
              {"epsilon", detail::optional_number(epsilon)},
              {"lambda_h", detail::optional_number(lambda_h)},
              {"saturated_index", tr.saturated_index ? json(*tr.saturated_index) : json(nullptr)}};
    return j;
}

inline json to_json(const RankResult& r)
{
    return {{"scores", r.scores.values()},
            {"order", r.order},
            {"computing_time_s", detail::optional_number(r.computing_time)},
            {"epsilon", r.epsilon}};
}

/// "rank,page,score", best page first; pages 1-based.
inline void write_rank_csv(std::ostream& out, const RankResult& r, std::size_t topk = 0)
{
    detail::set_precision(out);
    out << "rank,page,score\n";
    const std::size_t k = topk == 0 ? r.order.size() : std::min(topk, r.order.size());
    for (std::size_t i = 0; i < k; ++i) {
        out << i + 1 << ',' << r.order[i] << ',' << r.scores[r.order[i] - 1] << '\n';
    }
}

// ---------------------------------------------------------------------------
// Sweep reports.

inline constexpr const char* kSweepCsvHeader =
    "kind,n,delta,delta_index,trial,seed,computing_time_s,epsilon,lambda_h,error";

inline void write_sweep_row(std::ostream& out, const SweepRow& r)
{
    detail::set_precision(out);
    auto num = [&](double v) {
        if (std::isfinite(v)) {
            out << v;
        }
    };
    out << r.kind << ',' << r.n << ',' << r.delta << ',' << r.delta_index << ',' << r.trial << ',' << r.seed << ',';
    if (r.computing_time) {
        num(*r.computing_time);
    }
    out << ',';
    num(r.epsilon);
    out << ',';
    num(r.lambda_h);
    out << ',';
    // errors are free text; keep the CSV one field wide
    for (char c : r.error) {
        out << (c == ',' || c == '\n' || c == '\r' ? ';' : c);
    }
    out << '\n';
}

inline void write_sweep_csv(std::ostream& out, const SweepReport& rep)
{
    out << kSweepCsvHeader << '\n';
    for (const auto& r : rep.rows) {
        write_sweep_row(out, r);
    }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in)
{
    std::vector<SweepRow> rows;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        return rows;
    }
    ++lineno;
    if (line != kSweepCsvHeader) {
        throw ParseError("unexpected sweep CSV header", lineno);
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            f.emplace_back();
        }
        if (f.size() != 10) {
            throw ParseError("sweep row must have 10 fields", lineno);
        }
        try {
            auto num = [](const std::string& s) {
                return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
            };
            SweepRow r;
            r.kind = f[0];
            r.n = std::stoul(f[1]);
            r.delta = std::stod(f[2]);
            r.delta_index = std::stoul(f[3]);
            r.trial = std::stoul(f[4]);
            r.seed = std::stoull(f[5]);
            if (!f[6].empty()) {
                r.computing_time = std::stod(f[6]);
            }
            r.epsilon = num(f[7]);
            r.lambda_h = num(f[8]);
            r.error = f[9];
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("malformed sweep row", lineno);
        }
    }
    return rows;
}

inline json stats_json(const Stats& s)
{
    return {{"count", s.count},
            {"mean", detail::finite_or_null(s.mean)},
            {"stdev", detail::finite_or_null(s.stdev)},
            {"min", detail::finite_or_null(s.min)},
            {"max", detail::finite_or_null(s.max)}};
}

/// Header (mode, config, op-amp parameters, thresholds, seed) plus the
/// per-cell aggregates.
inline json sweep_summary(const SweepReport& rep)
{
    json cells = json::array();
    for (const auto& a : rep.aggregates()) {
        cells.push_back({{"kind", a.kind},
                         {"n", a.n},
                         {"delta", a.delta},
                         {"failures", a.failures},
                         {"computing_time_s", stats_json(a.computing_time)},
                         {"epsilon", stats_json(a.epsilon)},
                         {"lambda_h", stats_json(a.lambda_h)}});
    }
    return {{"header",
             {{"mode", rep.mode},
              {"base_seed", rep.base_seed},
              {"config", to_json(rep.cfg)},
              {"params", to_json(rep.params)},
              {"thresholds", to_json(rep.thresholds)}}},
            {"aggregates", cells}};
}

} // namespace xpoint
