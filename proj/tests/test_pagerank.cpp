#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "xpoint/pagerank.hpp"

using namespace xpoint;

namespace {

CitationMatrix parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_edge_list(in);
}

CitationMatrix random_graph(std::size_t n, double link_prob, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution link(link_prob);
    std::vector<CitationMatrix::Link> links;
    for (std::size_t to = 0; to < n; ++to) {
        for (std::size_t from = 0; from < n; ++from) {
            if (link(rng)) {
                links.push_back({to, from});
            }
        }
    }
    return CitationMatrix(n, links);
}

/// Transition entries straight from the citation matrix, one entry at a time.
oracle::Dense eq11(const CitationMatrix& c, double p)
{
    const std::size_t n = c.n();
    const double sigma = (1.0 - p) / static_cast<double>(n);
    oracle::Dense t(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            colsum += c(i, j) ? 1.0 : 0.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            t[i][j] = colsum == 0.0 ? 1.0 / static_cast<double>(n) : p * (c(i, j) ? 1.0 : 0.0) / colsum + sigma;
        }
    }
    return t;
}

} // namespace

TEST(EdgeList, FromToOrder)
{
    const CitationMatrix c = parse("2 1\n");
    EXPECT_EQ(c.n(), 2u);
    EXPECT_EQ(c.link_count(), 1u);
    EXPECT_TRUE(c(0, 1)); // page 2 links to page 1
    EXPECT_FALSE(c(1, 0));
}

TEST(EdgeList, HeaderCommentsDuplicatesAndSelfLinks)
{
    const CitationMatrix c = parse("# graph\nn 5\n\n1 2\n1 2\n3 3  # self\n");
    EXPECT_EQ(c.n(), 5u);
    EXPECT_EQ(c.link_count(), 2u);
    EXPECT_TRUE(c(1, 0));
    EXPECT_TRUE(c(2, 2));
    const CitationMatrix empty = parse("n 3\n");
    EXPECT_EQ(empty.n(), 3u);
    EXPECT_EQ(empty.link_count(), 0u);
}

TEST(EdgeList, ErrorsCarryLineNumbers)
{
    for (const auto& [text, line] : std::vector<std::pair<std::string, std::size_t>>{
             {"1 2\n0 1\n", 2}, {"1 2\n3\n", 2}, {"\n\n1 x\n", 3}, {"n 2\n1 3\n", 2}, {"1 2 3\n", 1}}) {
        try {
            parse(text);
            FAIL() << "accepted: " << text;
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), line) << text;
        }
    }
}

TEST(EdgeList, RoundTrip)
{
    const CitationMatrix c = random_graph(12, 0.2, 4);
    std::stringstream ss;
    write_edge_list(ss, c);
    EXPECT_EQ(parse_edge_list(ss), c);
}

TEST(Transition, TwoPageExample)
{
    const CitationMatrix c = parse("2 1\n");
    const TransitionMatrix t = transition_matrix(c);
    EXPECT_DOUBLE_EQ(t.sigma(), 0.075);
    EXPECT_DOUBLE_EQ(t(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(t(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(t(0, 1), 0.925);
    EXPECT_DOUBLE_EQ(t(1, 1), 0.075);
    EXPECT_EQ(t.dangling_count(), 1u);
}

TEST(Transition, AllDangling)
{
    const TransitionMatrix t = transition_matrix(parse("n 4\n"));
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_DOUBLE_EQ(t(i, j), 0.25);
        }
    }
}

TEST(Transition, MatchesEntrywiseFormulaAndIsStochastic)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const std::size_t n = 5 + 7 * seed;
        const CitationMatrix c = random_graph(n, 0.1, seed);
        const TransitionMatrix t = transition_matrix(c, 0.85);
        const auto ref = eq11(c, 0.85);
        const Matrix dense = t.dense();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_NEAR(t(i, j), ref[i][j], 1e-14);
                EXPECT_NEAR(dense(i, j), ref[i][j], 1e-14);
            }
        }
        for (double s : t.column_sums()) {
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
        // structured apply vs naive product with the dense entries
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = std::cos(static_cast<double>(i));
        }
        std::vector<double> y(n);
        t.apply(x, y);
        const auto yr = oracle::naive_matvec(ref, x);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(y[i], yr[i], 1e-13);
        }
        const Vector rs = t.row_sums();
        const Vector d = t.diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(rs[i], std::accumulate(ref[i].begin(), ref[i].end(), 0.0), 1e-13);
            EXPECT_DOUBLE_EQ(d[i], ref[i][i]);
        }
        EXPECT_DOUBLE_EQ(t.min_entry(), dense.min_entry());
        EXPECT_NEAR(power_iteration(t).value, 1.0, 1e-9);
    }
    EXPECT_THROW(transition_matrix(CitationMatrix(0, {})), std::invalid_argument);
    EXPECT_THROW(transition_matrix(random_graph(3, 0.5, 1), 1.0), std::invalid_argument);
}

TEST(Subset, Family)
{
    const CitationMatrix c = random_graph(20, 0.15, 9);
    EXPECT_EQ(subset(c, 20), c);
    const CitationMatrix one = subset(c, 1);
    EXPECT_EQ(one.n(), 1u);
    EXPECT_LE(one.link_count(), 1u);
    const CitationMatrix s = subset(c, 8);
    for (const auto& l : s.links()) {
        EXPECT_LT(l.to, 8u);
        EXPECT_LT(l.from, 8u);
        EXPECT_TRUE(c(l.to, l.from));
    }
    std::size_t inside = 0;
    for (const auto& l : c.links()) {
        inside += (l.to < 8 && l.from < 8) ? 1 : 0;
    }
    EXPECT_EQ(s.link_count(), inside);
    EXPECT_THROW(subset(c, 0), std::out_of_range);
    EXPECT_THROW(subset(c, 21), std::out_of_range);
}

TEST(Rank, TwoPageAnalytic)
{
    // T v = v with T = [[0.5, 0.925], [0.5, 0.075]]: v1/v2 = 0.925/0.5
    const double v1 = 0.925 / (0.925 + 0.5);
    const RankResult r = rank(transition_matrix(parse("2 1\n")), 0.01);
    EXPECT_NEAR(v1, 0.64912, 1e-5);
    EXPECT_NEAR(r.scores[0], v1, 0.01);
    EXPECT_NEAR(r.scores[1], 1.0 - v1, 0.01);
    EXPECT_NEAR(r.oracle_scores[0], v1, 1e-12);
    EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 2}));
    ASSERT_TRUE(r.computing_time);
}

TEST(Rank, UniformWhenAllDangling)
{
    const RankResult r = rank(transition_matrix(parse("n 6\n")), 0.01);
    for (double s : r.scores) {
        EXPECT_NEAR(s, 1.0 / 6.0, 1e-12);
    }
    EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 2, 3, 4, 5, 6}));
}

TEST(Rank, ScoresFormDistribution)
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const RankResult r = rank(transition_matrix(random_graph(30, 0.08, seed)), 0.01);
        double total = 0.0;
        for (double s : r.scores) {
            EXPECT_GE(s, 0.0);
            total += s;
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
        EXPECT_LT(r.epsilon, 0.05);
    }
    EXPECT_THROW(rank(transition_matrix(parse("1 2\n")), 0.0), std::invalid_argument);
}

TEST(Rank, StructuredTrajectoryMatchesDense)
{
    const TransitionMatrix t = transition_matrix(random_graph(40, 0.07, 77));
    SimConfig cfg;
    cfg.record_stride = 1;
    const auto structured = pagerank_system(t, 0.02);
    const auto dense = EigenSystem<Matrix>::uniform(t.dense(), 1.0, 0.02);
    const Trace a = simulate(structured, cfg);
    const Trace b = simulate(dense, cfg);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t s = 0; s < a.states.size(); ++s) {
        EXPECT_LE(distance2(a.states[s].span(), b.states[s].span()), 1e-10) << "sample " << s;
    }
    EXPECT_EQ(a.computing_time.has_value(), b.computing_time.has_value());
}

TEST(Ranking, TiesByPageAndOverlap)
{
    const std::vector<double> s{0.1, 0.3, 0.3, 0.05, 0.25};
    EXPECT_EQ(ranking(s), (std::vector<std::size_t>{2, 3, 5, 1, 4}));
    const std::vector<std::size_t> a{1, 2, 3, 4};
    const std::vector<std::size_t> b{4, 3, 9, 1};
    EXPECT_EQ(top_k_overlap(a, b, 4), 3u);
    EXPECT_EQ(top_k_overlap(a, b, 2), 0u);
}

TEST(EntryStatistics, CountsSigmaAndUniformEntries)
{
    // a 3-cycle: each column holds one link entry and two sigma entries
    const TransitionMatrix t = transition_matrix(parse("1 2\n2 3\n3 1\n"), 0.85);
    const EntryStatistics st = entry_statistics(t);
    EXPECT_EQ(t.n(), 3u);
    EXPECT_NEAR(st.sigma_fraction, 6.0 / 9.0, 1e-15);
    EXPECT_NEAR(st.uniform_fraction, 0.0, 1e-15);
    // one link out of page 1, pages 2..4 dangling
    const TransitionMatrix t2 = transition_matrix(parse("n 4\n1 2\n"), 0.85);
    const EntryStatistics st2 = entry_statistics(t2);
    EXPECT_NEAR(st2.sigma_fraction, 3.0 / 16.0, 1e-15);
    EXPECT_NEAR(st2.uniform_fraction, 12.0 / 16.0, 1e-15);
}
