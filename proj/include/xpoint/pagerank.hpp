#pragma once

// Web-graph ingestion, the PageRank transition matrix and ranking through the
// circuit simulator.
//
// The transition matrix is column-stochastic:
//   T_ij = p C_ij / outdeg_j + sigma   if page j has outgoing links,
//   T_ij = 1/n                         otherwise,
// with sigma = (1 - p)/n. It is kept in structured form (sparse citations
// plus two rank-one terms) and applied in O(n + links).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xpoint/circuit.hpp"
#include "xpoint/fdsim.hpp"
#include "xpoint/linalg.hpp"

namespace xpoint {

/// Boolean link matrix: C(to, from) = 1 when page `from` links to page `to`.
/// Pages are 0-based here; files and reports use 1-based page numbers.
class CitationMatrix {
public:
    struct Link {
        std::size_t to;
        std::size_t from;
        friend auto operator<=>(const Link&, const Link&) = default;
    };

    CitationMatrix() = default;
    CitationMatrix(std::size_t n, std::vector<Link> links) : n_(n), links_(std::move(links))
    {
        for (const auto& l : links_) {
            if (l.to >= n_ || l.from >= n_) {
                throw std::out_of_range("CitationMatrix: page index out of range");
            }
        }
        std::sort(links_.begin(), links_.end());
        links_.erase(std::unique(links_.begin(), links_.end()), links_.end());
    }

    std::size_t n() const noexcept { return n_; }
    const std::vector<Link>& links() const noexcept { return links_; }
    std::size_t link_count() const noexcept { return links_.size(); }

    bool operator()(std::size_t to, std::size_t from) const
    {
        return std::binary_search(links_.begin(), links_.end(), Link{to, from});
    }

    friend bool operator==(const CitationMatrix&, const CitationMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Link> links_;
};

/// Reads lines "from to" (1-based, whitespace separated). Blank lines and
/// '#' comments are skipped; an optional line "n <count>" fixes the page
/// count, otherwise it is the largest index seen.
inline CitationMatrix parse_edge_list(std::istream& in)
{
    std::vector<CitationMatrix::Link> links;
    std::optional<std::size_t> declared;
    std::size_t max_index = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) {
            continue;
        }
        if (first == "n") {
            long long count = 0;
            std::string extra;
            if (!(ss >> count) || (ss >> extra) || count < 1) {
                throw ParseError("malformed header, expected 'n <count>'", lineno);
            }
            if (declared) {
                throw ParseError("duplicate 'n' header", lineno);
            }
            declared = static_cast<std::size_t>(count);
            continue;
        }
        long long from = 0;
        long long to = 0;
        std::string extra;
        std::istringstream full(line);
        if (!(full >> from >> to) || (full >> extra)) {
            throw ParseError("malformed edge, expected 'from to'", lineno);
        }
        if (from < 1 || to < 1) {
            throw ParseError("page index < 1", lineno);
        }
        links.push_back({static_cast<std::size_t>(to - 1), static_cast<std::size_t>(from - 1)});
        max_index = std::max({max_index, static_cast<std::size_t>(from), static_cast<std::size_t>(to)});
    }
    std::size_t n = max_index;
    if (declared) {
        if (*declared < max_index) {
            throw ParseError("edge index exceeds declared page count", lineno);
        }
        n = *declared;
    }
    return CitationMatrix(n, std::move(links));
}

inline CitationMatrix load_edge_list(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open edge list: " + path);
    }
    return parse_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const CitationMatrix& c)
{
    out << "n " << c.n() << '\n';
    for (const auto& l : c.links()) {
        out << l.from + 1 << ' ' << l.to + 1 << '\n';
    }
}

/// Principal submatrix on pages 1..m.
inline CitationMatrix subset(const CitationMatrix& c, std::size_t m)
{
    if (m < 1 || m > c.n()) {
        throw std::out_of_range("subset: N must lie in [1, n]");
    }
    std::vector<CitationMatrix::Link> kept;
    for (const auto& l : c.links()) {
        if (l.to < m && l.from < m) {
            kept.push_back(l);
        }
    }
    return CitationMatrix(m, std::move(kept));
}

class TransitionMatrix {
public:
    TransitionMatrix(const CitationMatrix& c, double p) : n_(c.n()), p_(p)
    {
        if (n_ == 0) {
            throw std::invalid_argument("transition_matrix: n must be >= 1");
        }
        if (!(p > 0.0 && p < 1.0)) {
            throw std::invalid_argument("transition_matrix: p must lie in (0, 1)");
        }
        sigma_ = (1.0 - p) / static_cast<double>(n_);
        uniform_ = 1.0 / static_cast<double>(n_);
        col_start_.assign(n_ + 1, 0);
        for (const auto& l : c.links()) {
            ++col_start_[l.from + 1];
        }
        std::partial_sum(col_start_.begin(), col_start_.end(), col_start_.begin());
        rows_.resize(c.link_count());
        std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
        for (const auto& l : c.links()) {
            rows_[fill[l.from]++] = l.to;
        }
        for (std::size_t j = 0; j < n_; ++j) {
            if (out_degree(j) == 0) {
                ++dangling_;
            }
        }
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t n() const noexcept { return n_; }
    double p() const noexcept { return p_; }
    double sigma() const noexcept { return sigma_; }
    std::size_t dangling_count() const noexcept { return dangling_; }
    std::size_t out_degree(std::size_t j) const noexcept { return col_start_[j + 1] - col_start_[j]; }

    double operator()(std::size_t i, std::size_t j) const
    {
        const std::size_t deg = out_degree(j);
        if (deg == 0) {
            return uniform_;
        }
        const auto first = rows_.begin() + static_cast<std::ptrdiff_t>(col_start_[j]);
        const auto last = rows_.begin() + static_cast<std::ptrdiff_t>(col_start_[j + 1]);
        const bool linked = std::binary_search(first, last, i);
        return (linked ? p_ / static_cast<double>(deg) : 0.0) + sigma_;
    }

    void apply(std::span<const double> x, std::span<double> y) const
    {
        double linked_mass = 0.0;
        double dangling_mass = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            (out_degree(j) == 0 ? dangling_mass : linked_mass) += x[j];
        }
        const double base = sigma_ * linked_mass + uniform_ * dangling_mass;
        std::fill(y.begin(), y.end(), base);
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t deg = out_degree(j);
            if (deg == 0) {
                continue;
            }
            const double share = p_ * x[j] / static_cast<double>(deg);
            for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) {
                y[rows_[e]] += share;
            }
        }
    }

    Vector row_sums() const
    {
        const double linked_cols = static_cast<double>(n_ - dangling_);
        Vector s(n_, sigma_ * linked_cols + uniform_ * static_cast<double>(dangling_));
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t deg = out_degree(j);
            for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) {
                s[rows_[e]] += p_ / static_cast<double>(deg);
            }
        }
        return s;
    }

    Vector column_sums() const
    {
        Vector s(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                acc += (*this)(i, j);
            }
            s[j] = acc;
        }
        return s;
    }

    Vector diagonal() const
    {
        Vector d(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            d[i] = (*this)(i, i);
        }
        return d;
    }

    double min_entry() const
    {
        // every non-dangling column has an unlinked entry unless it links to all pages
        double best = dangling_ > 0 ? uniform_ : std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t deg = out_degree(j);
            if (deg == 0) {
                continue;
            }
            best = std::min(best, deg < n_ ? sigma_ : p_ / static_cast<double>(deg) + sigma_);
        }
        return best;
    }

    Matrix dense() const
    {
        Matrix m(n_, n_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                m(i, j) = (*this)(i, j);
            }
        }
        return m;
    }

private:
    std::size_t n_;
    double p_;
    double sigma_ = 0.0;
    double uniform_ = 0.0;
    std::size_t dangling_ = 0;
    std::vector<std::size_t> col_start_;
    std::vector<std::size_t> rows_;
};

static_assert(CoefficientOperator<TransitionMatrix>);

inline TransitionMatrix transition_matrix(const CitationMatrix& c, double p = 0.85)
{
    return TransitionMatrix(c, p);
}

struct EntryStatistics {
    double sigma_fraction = 0.0;   // entries equal to sigma
    double uniform_fraction = 0.0; // entries equal to 1/n
};

/// Fractions of T's entries equal to sigma and to 1/n, counted entry by entry.
inline EntryStatistics entry_statistics(const TransitionMatrix& t)
{
    const double n = static_cast<double>(t.n());
    const double uniform = 1.0 / n;
    std::size_t at_sigma = 0;
    std::size_t at_uniform = 0;
    for (std::size_t i = 0; i < t.n(); ++i) {
        for (std::size_t j = 0; j < t.n(); ++j) {
            const double v = t(i, j);
            if (std::abs(v - t.sigma()) <= 1e-15) {
                ++at_sigma;
            } else if (std::abs(v - uniform) <= 1e-15) {
                ++at_uniform;
            }
        }
    }
    return {static_cast<double>(at_sigma) / (n * n), static_cast<double>(at_uniform) / (n * n)};
}

struct RankResult {
    Vector scores;                  // sums to 1
    std::vector<std::size_t> order; // 1-based pages, best first
    std::optional<double> computing_time;
    double epsilon = 0.0;
    Vector oracle_scores;           // power-iteration scores, sum 1
    std::vector<std::size_t> oracle_order;
};

/// Pages sorted by descending score, ties by ascending page; 1-based.
inline std::vector<std::size_t> ranking(std::span<const double> scores)
{
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (auto& i : idx) {
        ++i;
    }
    return idx;
}

inline Vector normalize_sum(std::span<const double> v)
{
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total == 0.0) {
        throw std::invalid_argument("normalize_sum: zero total");
    }
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] / total;
    }
    return out;
}

// Above this size the structured operator drives the simulation.
inline constexpr std::size_t kDenseRankLimit = 64;

/// Circuit system for a transition matrix: lambda_max is exactly 1.
inline EigenSystem<TransitionMatrix> pagerank_system(const TransitionMatrix& t, double delta,
                                                     const OpAmpParams& params = {})
{
    return EigenSystem<TransitionMatrix>::uniform(t, 1.0, delta, params);
}

template <CoefficientOperator Op>
RankResult rank_with(const EigenSystem<Op>& sys, const TransitionMatrix& t, const SimConfig& cfg)
{
    const Trace tr = simulate(sys, cfg);
    const EigPair oracle = power_iteration(t);
    RankResult r;
    r.scores = normalize_sum(tr.steady_state.span());
    r.order = ranking(r.scores.span());
    r.computing_time = tr.computing_time;
    r.epsilon = solution_error(tr.steady_state.span(), oracle.vector.span());
    r.oracle_scores = normalize_sum(oracle.vector.span());
    r.oracle_order = ranking(r.oracle_scores.span());
    return r;
}

/// Ranks pages with the circuit: lambda_G = 1 - delta, steady state
/// normalized to unit sum.
inline RankResult rank(const TransitionMatrix& t, double delta, const SimConfig& cfg = {},
                       const OpAmpParams& params = {})
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("rank: delta must lie in (0, 1)");
    }
    if (t.n() <= kDenseRankLimit) {
        const auto sys = EigenSystem<Matrix>::uniform(t.dense(), 1.0, delta, params);
        return rank_with(sys, t, cfg);
    }
    return rank_with(pagerank_system(t, delta, params), t, cfg);
}

/// Number of pages of `reference_top` that also appear in `candidate_top`.
inline std::size_t top_k_overlap(std::span<const std::size_t> reference, std::span<const std::size_t> candidate,
                                 std::size_t k)
{
    k = std::min({k, reference.size(), candidate.size()});
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (std::find(candidate.begin(), candidate.begin() + static_cast<std::ptrdiff_t>(k), reference[i]) !=
            candidate.begin() + static_cast<std::ptrdiff_t>(k)) {
            ++hits;
        }
    }
    return hits;
}

} // namespace xpoint
