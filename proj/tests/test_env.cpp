#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "synqec/env.hpp"
#include "synqec/refdec.hpp"

using namespace synqec;
using code::PauliError;
using code::Syndrome;

namespace {

// plays a fixed correction one qubit per step: the X agent walks the
// z-component support, the Z agent the x-component support
bool scripted_decode(const code::CodeInstance& c, const PauliError& truth,
                     const PauliError& correction, env::EpisodeState* out = nullptr) {
    std::vector<int> xs, zs;
    for (int q = 0; q < c.n; ++q) {
        if (correction.z.get(q)) xs.push_back(q);
        if (correction.x.get(q)) zs.push_back(q);
    }
    auto st = env::make_episode_state(c, truth, env::default_step_cap(c));
    size_t ix = 0, iz = 0;
    while (!st.terminal) {
        const int ax = ix < xs.size() ? xs[ix++] : c.n;
        const int az = iz < zs.size() ? zs[iz++] : c.n;
        env::step(st, ax, az);
    }
    const bool ok = env::episode_success(st);
    if (out) *out = st;
    return ok;
}

}  // namespace

TEST(Reward, FrozenBreakdown) {
    const auto b = env::reward_terms(true, 3, 0.5, 0.9);
    EXPECT_DOUBLE_EQ(b.r_decode, 1.0);
    EXPECT_DOUBLE_EQ(b.f_trans, 0.9);
    EXPECT_NEAR(b.e_cost, 0.125, 1e-15);
    EXPECT_NEAR(b.step_cost, 0.03, 1e-15);
    EXPECT_NEAR(b.total, 1.1375, 1e-12);

    const auto fail = env::reward_terms(false, 3, 0.5, 0.9);
    EXPECT_DOUBLE_EQ(fail.r_decode, -1.0);
    EXPECT_NEAR(fail.total, 1.1375 - 2.0, 1e-12);
}

TEST(Episode, ImmediateHaltTerminates) {
    const auto c = code::build_toy_css(3);
    PauliError truth(c.n);
    truth.x.set(0, true);
    auto st = env::make_episode_state(c, truth, env::default_step_cap(c));
    EXPECT_FALSE(st.terminal);
    const bool done = env::step(st, c.n, c.n);
    EXPECT_TRUE(done);
    EXPECT_TRUE(st.terminal);
    EXPECT_EQ(st.steps, 1);
    EXPECT_EQ(st.correction.weight(), 0);
    EXPECT_FALSE(env::episode_success(st));  // syndrome still visible
}

TEST(Episode, SingleErrorClearedByMatchingFlip) {
    const auto c = code::build_toy_css(3);
    PauliError truth(c.n);
    truth.x.set(4, true);  // center
    auto st = env::make_episode_state(c, truth, env::default_step_cap(c));
    env::step(st, c.n, 4);  // Z agent repairs the X flip
    EXPECT_TRUE(st.terminal);
    EXPECT_TRUE(st.cleared());
    EXPECT_TRUE(env::episode_success(st));
    EXPECT_EQ(st.residual().weight(), 0);
}

TEST(Episode, StepCapStopsRunaway) {
    const auto c = code::build_toy_css(3);
    PauliError truth(c.n);
    truth.x.set(0, true);
    auto st = env::make_episode_state(c, truth, 5);
    // toggling the same data qubit never clears the syndrome for long
    int guard = 0;
    while (!st.terminal && guard++ < 100) env::step(st, 1, c.n);
    EXPECT_TRUE(st.terminal);
    EXPECT_LE(st.steps, 5);
}

TEST(Episode, IncrementalSyndromeTracksRecomputation) {
    const auto c = code::build_toy_css(5);
    Rng rng(149, 100, 20);
    for (int trial = 0; trial < 30; ++trial) {
        const auto truth = code::sample_error(c, 0.05, rng);
        auto st = env::make_episode_state(c, truth, 8);
        while (!st.terminal) {
            const int ax = static_cast<int>(rng.below(c.n + 1));
            const int az = static_cast<int>(rng.below(c.n + 1));
            env::step(st, ax, az);  // step() asserts incremental == recomputed
            EXPECT_EQ(st.syndrome, code::syndrome_of(c, st.residual()));
        }
    }
}

TEST(Complexity, FrozenValuesAndMonotonicity) {
    const auto c = code::build_toy_css(3);
    PauliError none(c.n);
    EXPECT_DOUBLE_EQ(env::complexity(c, code::syndrome_of(c, none), none), 0.0);

    PauliError y(c.n);
    y.x.set(4, true);
    y.z.set(4, true);
    const auto sy = code::syndrome_of(c, y);
    ASSERT_EQ(sy.weight(), 4);
    EXPECT_NEAR(env::complexity(c, sy, y), 0.5 * 4.0 / 8.0 + 0.5 * 1.0 / 9.0, 1e-15);

    PauliError x(c.n);
    x.x.set(4, true);
    const auto sx = code::syndrome_of(c, x);
    EXPECT_LT(env::complexity(c, sx, x), env::complexity(c, sy, y));
}

TEST(Decoding, ScriptedOracleClearsLowNoise) {
    const auto c = code::build_toy_css(3);
    Rng rng = make_stream(7, StreamPurpose::test_misc, 60);
    const int episodes = 10000;
    int ok = 0;
    for (int i = 0; i < episodes; ++i) {
        const auto truth = code::sample_error(c, 0.005, rng);
        const auto s = code::syndrome_of(c, truth);
        const auto orc = refdec::ml_oracle_decode(c, s, 4);
        if (!orc.found) continue;  // counts as failure
        if (scripted_decode(c, truth, orc.correction)) ++ok;
    }
    EXPECT_GE(static_cast<double>(ok) / episodes, 0.99);
}

TEST(Decoding, DecodeTermSignMatchesSuccess) {
    const auto c = code::build_toy_css(3);
    Rng rng = make_stream(7, StreamPurpose::test_misc, 61);
    int seen_fail = 0, seen_ok = 0;
    for (int i = 0; i < 300; ++i) {
        const auto truth = code::sample_error(c, 0.15, rng);
        const auto s = code::syndrome_of(c, truth);
        const auto orc = refdec::ml_oracle_decode(c, s, 4);
        if (!orc.found) continue;
        env::EpisodeState st;
        const bool ok = scripted_decode(c, truth, orc.correction, &st);
        const auto b = env::reward(st, 0.4, hw::hardware_feedback(hw::channel_setting(0.4, 0.05)));
        EXPECT_DOUBLE_EQ(b.r_decode, ok ? 1.0 : -1.0);
        (ok ? seen_ok : seen_fail) += 1;
    }
    EXPECT_GT(seen_ok, 0);
    EXPECT_GT(seen_fail, 0);  // p=15% must produce some logical failures
}

TEST(Rollout, RecordAndTransitionsConsistent) {
    const auto c = code::build_toy_css(3);
    const auto p = policy::make_policy(c, 55);
    Rng rng = make_stream(9, StreamPurpose::rollout, 0);
    std::vector<env::Transition> trans;
    env::EpisodeOptions opt;
    opt.transitions = &trans;
    const auto rec = env::run_episode(p, c, 0.02, hw::ideal_config(), 0.5, rng, opt);

    EXPECT_DOUBLE_EQ(rec.latency_ms, 0.05);
    EXPECT_DOUBLE_EQ(rec.lambda, rec.lambda_raw);  // no budget, no adaptation
    EXPECT_GT(rec.lambda, 0.0);
    EXPECT_LT(rec.lambda, 1.0);
    EXPECT_EQ(rec.steps, static_cast<int>(rec.actions_x.size()));
    EXPECT_EQ(rec.steps, static_cast<int>(rec.actions_z.size()));
    EXPECT_TRUE(std::isinf(rec.budget_ms));

    ASSERT_EQ(trans.size(), static_cast<size_t>(rec.steps));
    for (size_t i = 0; i + 1 < trans.size(); ++i) {
        EXPECT_FALSE(trans[i].terminal);
        EXPECT_DOUBLE_EQ(trans[i].reward, 0.0);
        EXPECT_EQ(trans[i].after, trans[i + 1].before);
    }
    EXPECT_TRUE(trans.back().terminal);
    EXPECT_DOUBLE_EQ(trans.back().reward, rec.breakdown.total);
    EXPECT_EQ(trans.front().before, rec.initial);
    for (const auto& t : trans) {
        EXPECT_EQ(t.gated, rec.gated);
        EXPECT_DOUBLE_EQ(t.lambda, rec.lambda);
    }
}

TEST(Rollout, DeadlineBudgetThrottlesChannel) {
    const auto c = code::build_toy_css(3);
    const auto p = policy::make_policy(c, 55);
    Rng rng = make_stream(9, StreamPurpose::rollout, 1);
    env::EpisodeOptions opt;
    opt.budget_ms = 0.5;
    const auto rec = env::run_episode(p, c, 0.02, hw::distributed_config(), 0.2, rng, opt);
    EXPECT_DOUBLE_EQ(rec.budget_ms, 0.5);
    EXPECT_GE(rec.latency_ms, 5.0);  // distributed band, always over budget
    EXPECT_LT(rec.lambda, rec.lambda_raw);
    EXPECT_NEAR(rec.lambda, rec.lambda_raw * 0.5 / rec.latency_ms, 1e-12);
    // cap floor: ceil(2n * 0.25)
    EXPECT_LE(rec.steps, static_cast<int>(std::ceil(2.0 * c.n * 0.25)));
}

TEST(Rollout, JsonlLogRoundTrips) {
    const auto c = code::build_toy_css(3);
    const auto p = policy::make_policy(c, 55);
    Rng rng = make_stream(9, StreamPurpose::rollout, 2);
    std::vector<env::EpisodeRecord> recs;
    for (int i = 0; i < 3; ++i) recs.push_back(env::run_episode(p, c, 0.05, hw::cryostat_config(), 0.3, rng));
    const std::string path = "episodes_test.jsonl";
    env::write_episode_jsonl(path, recs);
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("reward"));
        EXPECT_TRUE(j.contains("complexity"));
        EXPECT_EQ(j.at("initial_sx").get<std::string>().size(), 4u);
        EXPECT_TRUE(j.at("budget_ms").is_null());
        ++lines;
    }
    in.close();
    std::remove(path.c_str());
    EXPECT_EQ(lines, 3);
}
