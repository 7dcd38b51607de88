#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "anovats/core.hpp"
#include "anovats/simgen.hpp"
#include "oracle.hpp"

using namespace anovats;

namespace {

// Noiseless panel: group i constant at levels[i] over n time points.
CompletePanel constant_panel(const std::vector<double>& levels, std::size_t n) {
    std::vector<std::string> labels;
    std::vector<double> values;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        labels.push_back("A" + std::to_string(i + 1));
        values.insert(values.end(), n, levels[i]);
    }
    return CompletePanel(Panel(labels, n, 1, values));
}

CompletePanel transformed(const CompletePanel& panel, double scale, const std::vector<double>& shift) {
    const Panel& src = panel.panel();
    std::vector<double> values(src.values().begin(), src.values().end());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = scale * values[k] + shift[k % src.dim()];
    return CompletePanel(Panel(src.labels(), src.num_times(), src.dim(), values));
}

}  // namespace

TEST(BlockLength, PublishedValues) {
    EXPECT_EQ(block_length(15), 6u);
    EXPECT_EQ(block_length(36), 8u);
    EXPECT_EQ(block_length(27), 7u);
    EXPECT_EQ(block_length(26), 7u);
}

TEST(BlockLength, ClampAtThree) {
    // floor(2.5 * 3^(1/3)) = floor(3.6057) = 3 = n, clamped to n - 1.
    EXPECT_EQ(static_cast<int>(std::floor(2.5 * std::cbrt(3.0))), 3);
    EXPECT_EQ(block_length(3), 2u);
    EXPECT_EQ(block_length(3, BlockRule{0.5, std::nullopt}), 2u);
}

TEST(BlockLength, OverrideIsClampedAndErrors) {
    EXPECT_EQ(block_length(20, BlockRule{2.5, 9}), 9u);
    EXPECT_EQ(block_length(20, BlockRule{2.5, 40}), 19u);
    EXPECT_EQ(block_length(20, BlockRule{2.5, 1}), 2u);
    EXPECT_THROW((void)block_length(2), InapplicableError);
    EXPECT_THROW((void)block_length(10, BlockRule{0.0, std::nullopt}), Error);
    for (std::size_t n = 3; n < 2000; ++n) {
        const auto b = block_length(n);
        EXPECT_GE(b, 2u);
        EXPECT_LE(b, n - 1);
    }
}

TEST(Statistic, ConstantSeries) {
    const auto r = statistic(constant_panel({1, 3}, 4));
    EXPECT_DOUBLE_EQ(r.statistic, 8.0);
    EXPECT_DOUBLE_EQ(r.grand_mean[0], 2.0);
    EXPECT_DOUBLE_EQ(r.group_means[1][0], 3.0);
}

TEST(Statistic, IdenticalGroupsGiveZero) {
    std::mt19937_64 rng(5);
    const auto base = oracle::random_panel(rng, 1, 12, 2);
    std::vector<double> values;
    for (int copy = 0; copy < 3; ++copy)
        values.insert(values.end(), base.panel().values().begin(), base.panel().values().end());
    const CompletePanel panel(Panel({"A", "B", "C"}, 12, 2, values));
    EXPECT_EQ(statistic(panel).statistic, 0.0);
}

TEST(Statistic, MatchesNaiveTranscription) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto panel = oracle::random_panel(rng, 3, 10, 2);
        const double expected = oracle::statistic(oracle::to_cube(panel));
        EXPECT_TRUE(oracle::close_relative(statistic(panel).statistic, expected, 1e-12));
    }
}

TEST(SubsampleStatistics, NoiselessClosedForm) {
    const std::vector<double> levels{-1.0, 0.5, 2.0};
    const auto panel = constant_panel(levels, 20);
    const double mean = (levels[0] + levels[1] + levels[2]) / 3.0;
    double ss = 0.0;
    for (const double l : levels) ss += (l - mean) * (l - mean);
    const auto stats = subsample_statistics(panel, 7);
    ASSERT_EQ(stats.size(), 14u);
    const double factor = 7.0 / (1.0 - 7.0 / 20.0);
    EXPECT_NEAR(factor, 10.769230769, 1e-9);
    for (const double s : stats) EXPECT_NEAR(s, factor * ss, 1e-12 * factor * ss);
    const double t_n = statistic(panel).statistic;
    EXPECT_NEAR(t_n, 20.0 * ss, 1e-12);
    EXPECT_EQ(p_value(t_n, stats), 0.0);
}

TEST(SubsampleStatistics, CountAndRange) {
    std::mt19937_64 rng(3);
    const auto panel = oracle::random_panel(rng, 3, 10, 1);
    EXPECT_EQ(subsample_statistics(panel, 9).size(), 2u);
    EXPECT_EQ(subsample_statistics(panel, 2).size(), 9u);
    EXPECT_THROW((void)subsample_statistics(panel, 1), Error);
    EXPECT_THROW((void)subsample_statistics(panel, 10), Error);
}

TEST(SubsampleStatistics, SlidingMatchesPerWindowOracle) {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> groups(2, 8), times(6, 80), dims(1, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto panel = oracle::random_panel(rng, groups(rng), times(rng), dims(rng));
        const std::size_t b = block_length(panel.num_times());
        const auto fast = subsample_statistics(panel, b);
        const auto slow = oracle::subsample_statistics(oracle::to_cube(panel), b);
        ASSERT_EQ(fast.size(), slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k)
            EXPECT_TRUE(oracle::close_relative(fast[k], slow[k], 1e-12)) << fast[k] << " vs " << slow[k];
    }
}

TEST(SubsampleStatistics, LongSeriesStayAccurate) {
    std::mt19937_64 rng(29);
    const auto panel = transformed(oracle::random_panel(rng, 3, 10000, 1), 1.0, {1e3});
    const std::size_t b = block_length(panel.num_times());
    const auto fast = subsample_statistics(panel, b);
    const auto slow = oracle::subsample_statistics(oracle::to_cube(panel), b);
    double worst = 0.0;
    for (std::size_t k = 0; k < fast.size(); ++k)
        worst = std::max(worst, std::abs(fast[k] - slow[k]) / std::max(std::abs(slow[k]), 1e-300));
    EXPECT_LT(worst, 1e-10);
}

TEST(PValue, Examples) {
    EXPECT_EQ(p_value(5.0, std::vector<double>{1, 2, 5}), 0.0);
    EXPECT_EQ(p_value(0.0, std::vector<double>{0, 0, 0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(p_value(2.0, std::vector<double>{1, 3, 4, 2}), 0.5);
    EXPECT_THROW((void)p_value(1.0, std::vector<double>{}), Error);
}

TEST(PValue, LatticeOfWindowCount) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto panel = oracle::random_panel(rng, 3, 20, 1, 0.2);
        const auto r = test(panel, BlockRule{2.5, 6});
        ASSERT_EQ(r.subsample_stats.size(), 15u);
        const double scaled = r.p_value * 15.0;
        EXPECT_EQ(scaled, std::round(scaled));
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
    }
}

TEST(QuantileDecision, AgreesWithPValueForm) {
    std::mt19937_64 rng(37);
    std::uniform_int_distribution<std::size_t> groups(2, 6), times(5, 40);
    std::uniform_real_distribution<double> alphas(0.001, 0.999);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto panel = oracle::random_panel(rng, groups(rng), times(rng), 1, 0.3);
        const double alpha = trial % 3 == 0 ? 0.05 : alphas(rng);
        const auto r = test(panel, {}, alpha);
        EXPECT_EQ(quantile_decision(r.statistic, r.subsample_stats, alpha), r.reject);
    }
}

TEST(QuantileDecision, Ties) {
    // All subsample statistics equal to T_n: p = 0 and T_n >= quantile, both reject.
    const std::vector<double> ties(10, 4.0);
    EXPECT_EQ(p_value(4.0, ties), 0.0);
    EXPECT_TRUE(quantile_decision(4.0, ties, 0.05));

    // Enumerate tie patterns on a small lattice.
    for (int mask = 0; mask < 243; ++mask) {
        std::vector<double> stats;
        int m = mask;
        for (int k = 0; k < 5; ++k, m /= 3) stats.push_back(static_cast<double>(m % 3));
        for (const double t : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5})
            for (const double alpha : {0.05, 0.2, 0.4, 0.5, 0.6, 0.8, 0.99})
                EXPECT_EQ(quantile_decision(t, stats, alpha), p_value(t, stats) < alpha);
    }
}

TEST(QuantileDecision, AlphaNearOne) {
    // 1 / N = 0.1; alpha = 1 - 0.01 rejects unless every statistic exceeds T_n.
    const std::vector<double> stats{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const double alpha = 0.99;
    EXPECT_TRUE(quantile_decision(5.0, stats, alpha));
    EXPECT_FALSE(quantile_decision(0.5, stats, alpha));
    EXPECT_EQ(p_value(0.5, stats) < alpha, false);
}

TEST(SmallNGuarantee, Examples) {
    EXPECT_TRUE(small_n_guarantee(26, {}, 0.05));
    EXPECT_FALSE(small_n_guarantee(27, {}, 0.05));
    for (std::size_t n = 3; n <= 26; ++n) EXPECT_TRUE(small_n_guarantee(n, {}, 0.05)) << n;
    for (std::size_t n = 27; n < 500; ++n) EXPECT_FALSE(small_n_guarantee(n, {}, 0.05)) << n;
    EXPECT_TRUE(small_n_guarantee(100, {}, 0.01));
}

TEST(Test, SeparatedMeansRejectWithZeroPValue) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = test(oracle::separated_panel(seed));
        EXPECT_EQ(r.block_b, 6u);
        EXPECT_EQ(r.subsample_stats.size(), 15u);
        EXPECT_EQ(r.p_value, 0.0) << "seed " << seed;
        EXPECT_TRUE(r.reject);
    }
}

TEST(Test, SimulatedShiftIsUsuallyDetected) {
    int rejected = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        sim::RngStream rng(seed, 0);
        const auto spec = sim::standard_process(1, sim::Dependence::case1_independent, 4, 20, {0, 2, 2, 4});
        rejected += test(sim::assemble_panel(spec, rng)).reject ? 1 : 0;
    }
    EXPECT_GE(rejected, 15);
}

TEST(Test, ConstantPanelRejectsDegenerately) {
    const auto r = test(constant_panel({0.0, 0.0, 0.0}, 10));
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_value, 0.0);
    EXPECT_TRUE(r.reject);
}

TEST(Test, Preconditions) {
    std::mt19937_64 rng(1);
    const auto panel = oracle::random_panel(rng, 3, 10, 1);
    EXPECT_THROW((void)test(panel, {}, 0.0), Error);
    EXPECT_THROW((void)test(panel, {}, 1.0), Error);
    EXPECT_THROW((void)test(oracle::random_panel(rng, 1, 10, 1)), InapplicableError);
    EXPECT_THROW((void)test(oracle::random_panel(rng, 2, 2, 1)), InapplicableError);
}

TEST(Properties, LocationScaleAndPermutation) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> groups(2, 7), times(8, 50), dims(1, 3);
    std::uniform_real_distribution<double> shifts(-50.0, 50.0), scales(0.01, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto panel = oracle::random_panel(rng, groups(rng), times(rng), dims(rng), 0.3);
        const auto base = test(panel);

        std::vector<double> shift(panel.dim());
        for (auto& s : shift) s = shifts(rng);
        const auto moved = test(transformed(panel, 1.0, shift));
        EXPECT_EQ(moved.p_value, base.p_value);
        EXPECT_TRUE(oracle::close_relative(moved.statistic, base.statistic, 1e-9));

        const double s = scales(rng);
        const auto scaled = test(transformed(panel, s, std::vector<double>(panel.dim(), 0.0)));
        EXPECT_EQ(scaled.p_value, base.p_value);
        EXPECT_TRUE(oracle::close_relative(scaled.statistic, s * s * base.statistic, 1e-12));
        for (std::size_t k = 0; k < base.subsample_stats.size(); ++k)
            EXPECT_TRUE(oracle::close_relative(scaled.subsample_stats[k], s * s * base.subsample_stats[k], 1e-12));

        std::vector<std::size_t> order(panel.num_groups());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const auto permuted = test(select_groups(panel, order));
        EXPECT_EQ(permuted.p_value, base.p_value);
        EXPECT_TRUE(oracle::close_relative(permuted.statistic, base.statistic, 1e-12));
    }
}

TEST(Properties, NoiselessPanelsRejectWhenBlocksAreShort) {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> normal;
    for (std::size_t n = 5; n <= 120; ++n) {
        const std::size_t b = block_length(n);
        if (2 * b >= n) continue;
        std::vector<double> levels{normal(rng), normal(rng), normal(rng), normal(rng)};
        EXPECT_EQ(test(constant_panel(levels, n)).p_value, 0.0) << n;
    }
}

TEST(Properties, StatisticMonotoneInEffectSize) {
    const std::vector<double> levels{-1.0, 0.25, 0.75};
    double previous = 0.0;
    for (double lambda = 1.0; lambda <= 8.0; lambda += 0.5) {
        std::vector<double> scaled;
        for (const double l : levels) scaled.push_back(lambda * l);
        const double t = statistic(constant_panel(scaled, 15)).statistic;
        EXPECT_GE(t, previous);
        previous = t;
    }
}
