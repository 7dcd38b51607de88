#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "anovats/harness.hpp"

using namespace anovats;
using namespace anovats::harness;

namespace {

// Panel without noise: every observation equals its group effect.
PanelGenerator noiseless_generator(std::vector<double> effects, std::size_t n) {
    return [effects, n](sim::RngStream&) {
        sim::Matrix e(static_cast<Eigen::Index>(effects.size()), 1);
        for (std::size_t i = 0; i < effects.size(); ++i) e(static_cast<Eigen::Index>(i), 0) = effects[i];
        return sim::panel_from_disturbances(e, sim::Vector::Zero(1),
                                            sim::Matrix::Zero(static_cast<Eigen::Index>(n),
                                                              static_cast<Eigen::Index>(effects.size())));
    };
}

SizeExperiment small_size_grid() {
    SizeExperiment exp;
    exp.a_list = {3};
    exp.n_list = {20, 30};
    exp.c_list = {1.5, 2.5};
    exp.processes = {1, 4};
    exp.reps = 20;
    return exp;
}

}  // namespace

TEST(Replicate, ResultsDoNotDependOnThreadCount) {
    const auto body = [](std::size_t rep) { return rep * rep; };
    const auto one = replicate<std::size_t>(37, body, 1);
    const auto four = replicate<std::size_t>(37, body, 4);
    EXPECT_EQ(one, four);
    EXPECT_EQ(four[36], 36u * 36u);
    EXPECT_THROW((void)replicate<int>(5, [](std::size_t r) -> int { if (r == 3) throw Error("x", "boom"); return 0; }, 3),
                 Error);
}

TEST(Replicate, ThreadCountFromEnvironment) {
    ::setenv("ANOVATS_THREADS", "3", 1);
    EXPECT_EQ(thread_count(), 3u);
    ::setenv("ANOVATS_THREADS", "zero", 1);
    EXPECT_GE(thread_count(), 1u);
    ::unsetenv("ANOVATS_THREADS");
}

TEST(SizeExperimentRun, DeterministicAcrossRunsAndThreads) {
    const auto exp = small_size_grid();
    std::ostringstream first, second, threaded;
    write_report(first, run_size(exp, 7, 1));
    write_report(second, run_size(exp, 7, 1));
    write_report(threaded, run_size(exp, 7, 4));
    EXPECT_EQ(first.str(), second.str());
    EXPECT_EQ(first.str(), threaded.str());
    std::ostringstream other;
    write_report(other, run_size(exp, 8, 1));
    EXPECT_NE(first.str(), other.str());
}

TEST(SizeExperimentRun, ReportShape) {
    const auto exp = small_size_grid();
    const auto report = run_size(exp, 3, 2);
    std::size_t size_rows = 0;
    for (const auto& row : report.rows) {
        if (row.metric != metric::empirical_size) continue;
        ++size_rows;
        EXPECT_GE(row.value, 0.0);
        EXPECT_LE(row.value, 1.0);
        EXPECT_DOUBLE_EQ(row.value * 20.0, std::round(row.value * 20.0));
    }
    EXPECT_EQ(size_rows, 2u * 2u * 1u * 2u * 2u);
    ASSERT_NE(report.find("4", "2", 3, 30, 2.5, metric::empirical_size), nullptr);

    std::ostringstream os;
    write_report(os, report);
    std::istringstream lines(os.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "process,case,a,n,c,reps,seed,metric,value");
    std::getline(lines, line);
    EXPECT_EQ(line.rfind("1,1,3,20,1.5,20,3,empirical_size,", 0), 0u) << line;
}

TEST(SizeCellRun, ExtremeLevels) {
    const auto generator = standard_generator(1, sim::Dependence::case1_independent, 3, 30);
    const auto single = size_cell(generator, {2.5}, 1, 0.05, 11, 1);
    EXPECT_LE(single.rejections[0], 1u);
    // At level 0.999 only a panel whose every subsample statistic exceeds T_n escapes rejection.
    const auto loose = size_cell(generator, {2.5}, 100, 0.999, 11, 1);
    EXPECT_GE(loose.rejections[0], 90u);
    EXPECT_THROW((void)size_cell(generator, {2.5}, 10, 1.0, 11, 1), Error);
}

TEST(DrawPanel, RegeneratesOnGeneratorFailure) {
    const PanelGenerator flaky = [](sim::RngStream& rng) -> CompletePanel {
        if (rng.stream_id() < (std::uint64_t{2} << 32)) throw sim::GenerationError("simgen", "synthetic failure");
        return CompletePanel(Panel({"a", "b"}, 3, 1, {1, 2, 3, 4, 5, 6}));
    };
    const Draw draw = draw_panel(flaky, 1, 5);
    EXPECT_EQ(draw.regenerated, 2u);
    ASSERT_TRUE(draw.panel.has_value());

    const PanelGenerator broken = [](sim::RngStream&) -> CompletePanel {
        throw sim::GenerationError("simgen", "always");
    };
    EXPECT_THROW((void)draw_panel(broken, 1, 0), Error);
}

TEST(PowerCellRun, MetricsAreConsistent) {
    const std::vector<double> effects{0, 0, 0, 1, 1, 1};
    const Partition truth = partition_from_effects(effects);
    ASSERT_EQ(truth.size(), 2u);
    for (const int process : {1, 2}) {
        const auto cell = power_cell(standard_generator(process, sim::Dependence::case1_independent, 6, 50, effects),
                                     truth, {}, 60, 0.05, 21, 2);
        EXPECT_EQ(cell.reps, 60u);
        EXPECT_LE(cell.subgroup_rejected, cell.correct_split);
        EXPECT_EQ(cell.correct_clustering, cell.correct_split - cell.subgroup_rejected);
        EXPECT_GE(cell.first_split_power(), cell.clustering_rate());
    }
}

TEST(PowerCellRun, NoiselessTwoClusterPanel) {
    // Constant subgroups give T_n = 0 and all subsample statistics 0, so the
    // strict-exceedance p-value is 0 and every subgroup is split again.
    const std::vector<double> effects{0, 0, 0, 1, 1, 1};
    const auto cell =
        power_cell(noiseless_generator(effects, 30), partition_from_effects(effects), {}, 5, 0.05, 1, 1);
    EXPECT_EQ(cell.first_split_power(), 1.0);
    EXPECT_EQ(cell.correct_split, 5u);
    EXPECT_EQ(cell.subgroup_size(), 1.0);
    EXPECT_EQ(cell.clustering_rate(), 0.0);
}

TEST(PowerCellRun, UndefinedSubgroupRateIsNA) {
    PowerCell cell;
    cell.reps = 10;
    EXPECT_TRUE(std::isnan(cell.subgroup_size()));
    ExperimentReport report;
    append_power_rows(report, "1", "1", 6, 20, 2.5, 1, cell);
    std::ostringstream os;
    write_report(os, report);
    EXPECT_NE(os.str().find("subgroup_rejection_given_correct_split,NA\n"), std::string::npos) << os.str();
}

TEST(PowerExperimentRun, QuickGrid) {
    PowerExperiment exp;
    exp.n_list = {30};
    exp.processes = {1, 4};
    exp.reps = 10;
    const auto report = run_power(exp, 5, 2);
    for (const int process : {1, 4})
        for (const char* c : {"1", "2"}) {
            const auto* row = report.find(std::to_string(process), c, 6, 30, 2.5, metric::correct_split_count);
            ASSERT_NE(row, nullptr);
            EXPECT_LE(row->value, 10.0);
        }
    exp.effects = {0, 1};
    EXPECT_THROW((void)run_power(exp, 5, 1), Error);
}
