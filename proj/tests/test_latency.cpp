#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "synqec/latency.hpp"

using namespace synqec;

TEST(ScalingModel, AffineTotalsMatchBreakdown) {
    for (int dim : {25, 49, 81, 121, 144}) {
        const auto s = dist::latency_single(dim);
        EXPECT_NEAR(s.total_ms(), 0.35 + 0.02 * dim, 1e-12);
        EXPECT_DOUBLE_EQ(s.comm_ms, 0.0);
        EXPECT_NEAR(s.total_ms(), s.encode_ms + s.synergy_ms + s.comm_ms + s.agent_exec_ms,
                    1e-12);

        const auto d = dist::latency_dist(dim);
        EXPECT_NEAR(d.total_ms(), 0.35 + 0.02 * dim / 2.0 + 0.05, 1e-12);
        EXPECT_DOUBLE_EQ(d.comm_ms, 0.05);
        EXPECT_LT(d.total_ms(), s.total_ms());
    }
}

TEST(ScalingTable, PublishedRowsBitExact) {
    const auto rows = dist::speedup_table();
    ASSERT_EQ(rows.size(), 4u);

    const int ds[] = {5, 7, 9, 11};
    const int dims[] = {25, 49, 81, 121};
    const double single[] = {0.85, 1.33, 1.97, 2.77};
    const double two[] = {0.65, 0.89, 1.21, 1.61};
    const double speedup[] = {1.31, 1.49, 1.63, 1.72};
    const double overhead[] = {7.7, 5.6, 4.1, 3.1};
    const int64_t params[] = {12800, 25088, 41472, 61952};
    const char* display[] = {"12.8K", "25.1K", "41.5K", "61.9K"};

    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(rows[i].d, ds[i]);
        EXPECT_EQ(rows[i].dim, dims[i]);
        EXPECT_DOUBLE_EQ(rows[i].single_ms, single[i]);
        EXPECT_DOUBLE_EQ(rows[i].dist_ms, two[i]);
        EXPECT_DOUBLE_EQ(rows[i].speedup, speedup[i]);
        EXPECT_DOUBLE_EQ(rows[i].comm_overhead_pct, overhead[i]);
        EXPECT_EQ(rows[i].params_reported, params[i]);
        EXPECT_EQ(rows[i].params_display, display[i]);
    }
    EXPECT_DOUBLE_EQ(dist::mean_speedup(rows), 1.54);
}

TEST(ScalingTable, ParamDisplayRounding) {
    EXPECT_EQ(dist::format_params_k(12800), "12.8K");
    EXPECT_EQ(dist::format_params_k(25088), "25.1K");  // hundredths row rounds up
    EXPECT_EQ(dist::format_params_k(41472), "41.5K");
    EXPECT_EQ(dist::format_params_k(61952), "61.9K");  // exact .x5 drops toward zero
    EXPECT_EQ(dist::format_params_k(10000), "10.0K");
    EXPECT_EQ(dist::format_params_k(10060), "10.1K");
    EXPECT_EQ(dist::format_params_k(10050), "10.0K");
    for (int dim : {25, 49, 81, 121}) EXPECT_EQ(dist::param_count(dim), 512LL * dim);
}

TEST(ScalingTable, CsvGolden) {
    const std::string expected =
        "d,dim,single_ms,dist_ms,speedup,comm_overhead_pct,params\n"
        "5,25,0.85,0.65,1.31,7.7,12.8K\n"
        "7,49,1.33,0.89,1.49,5.6,25.1K\n"
        "9,81,1.97,1.21,1.63,4.1,41.5K\n"
        "11,121,2.77,1.61,1.72,3.1,61.9K\n";
    EXPECT_EQ(dist::table_csv(dist::speedup_table()), expected);
}

TEST(WallClock, PipelineTimesRealCallables) {
    auto spin = [](double ms) {
        return [ms] { std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms)); };
    };
    const auto b = dist::measure_pipeline(spin(1.0), spin(0.5), spin(2.0), spin(2.0));
    EXPECT_GE(b.encode_ms, 0.9);
    EXPECT_GE(b.synergy_ms, 0.4);
    EXPECT_GE(b.agent_exec_ms, 1.8);  // slower panel dominates
    EXPECT_DOUBLE_EQ(b.comm_ms, 0.05);
    EXPECT_GT(b.total_ms(), 0.0);
}
