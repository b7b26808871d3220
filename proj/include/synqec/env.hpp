#pragma once

#include <cassert>
#include <limits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/code.hpp"
#include "synqec/hardware.hpp"
#include "synqec/policy.hpp"
#include "synqec/rng.hpp"

// Decoding MDP. Both agents act simultaneously each step: a non-HALT action
// flips one correction bit (X agent flips z bits, Z agent flips x bits) and
// the running syndrome is updated by the corresponding check-matrix column.
// Terminal when both agents HALT, the syndrome clears, or the step cap hits.
// The synergy score is queried once per episode from the initial syndrome;
// it prices the flying-qubit channel for the whole episode.

namespace synqec::env {

using code::CodeInstance;
using code::PauliError;
using code::Syndrome;
using json = nlohmann::json;

struct RewardWeights {
    double alpha = 1.0;
    double beta = 0.2;
    double gamma = 0.1;
    double c_energy = 0.5;
    double step_penalty = 0.01;
};

struct RewardBreakdown {
    double r_decode = 0.0;   // +1 clean decode, -1 otherwise (at terminal)
    double f_trans = 0.0;    // raw transmission fidelity
    double e_cost = 0.0;     // lambda^2 * c_energy
    double step_cost = 0.0;  // step_penalty * steps
    double total = 0.0;
};

inline RewardBreakdown reward_terms(bool success, int steps, double lambda, double f_trans,
                                    const RewardWeights& w = {}) {
    RewardBreakdown b;
    b.r_decode = success ? 1.0 : -1.0;
    b.f_trans = f_trans;
    b.e_cost = lambda * lambda * w.c_energy;
    b.step_cost = w.step_penalty * steps;
    b.total = w.alpha * b.r_decode + w.beta * b.f_trans - w.gamma * b.e_cost - b.step_cost;
    return b;
}

struct EpisodeState {
    const CodeInstance* c = nullptr;
    PauliError truth;       // hidden from the policy
    PauliError correction;  // accumulated agent output
    Syndrome syndrome;      // of truth ^ correction, maintained incrementally
    int steps = 0;
    int step_cap = 0;
    bool terminal = false;

    PauliError residual() const {
        PauliError r = truth;
        r ^= correction;
        return r;
    }
    bool cleared() const { return !syndrome.any(); }
};

inline EpisodeState make_episode_state(const CodeInstance& c, const PauliError& truth,
                                       int step_cap) {
    EpisodeState st;
    st.c = &c;
    st.truth = truth;
    st.correction = PauliError(c.n);
    st.syndrome = code::syndrome_of(c, truth);
    st.step_cap = step_cap;
    return st;
}

// default step cap before any deadline scaling
inline int default_step_cap(const CodeInstance& c) { return 2 * c.n; }

inline bool step(EpisodeState& st, int a_x, int a_z) {
    assert(!st.terminal);
    const CodeInstance& c = *st.c;
    const int halt = c.n;
    assert(a_x >= 0 && a_x <= halt && a_z >= 0 && a_z <= halt);
    if (a_x != halt) {
        st.correction.z.flip(a_x);
        st.syndrome.sx ^= c.hx_col[a_x];
    }
    if (a_z != halt) {
        st.correction.x.flip(a_z);
        st.syndrome.sz ^= c.hz_col[a_z];
    }
    st.steps += 1;
    assert(st.syndrome == code::syndrome_of(c, st.residual()));
    st.terminal = (a_x == halt && a_z == halt) || st.cleared() || st.steps >= st.step_cap;
    return st.terminal;
}

inline bool episode_success(const EpisodeState& st) {
    return st.cleared() && !code::is_logical_failure(*st.c, st.residual());
}

inline RewardBreakdown reward(const EpisodeState& st, double lambda,
                              const hw::HardwareFeedback& fb,
                              const RewardWeights& w = {}) {
    assert(st.terminal);
    return reward_terms(episode_success(st), st.steps, lambda, fb.transmission_fidelity, w);
}

// c = 0.5*(syndrome weight / checks) + 0.5*(Y count / n)
inline double complexity(const CodeInstance& c, const Syndrome& s, const PauliError& truth) {
    return 0.5 * (static_cast<double>(s.weight()) / c.total_checks()) +
           0.5 * (static_cast<double>(truth.y_count()) / c.n);
}

struct Transition {
    Syndrome before;
    int a_x = 0, a_z = 0;
    Syndrome after;
    double reward = 0.0;  // nonzero only at terminal
    bool terminal = false;
    bool gated = false;
    double lambda = 0.0;  // effective episode score
};

struct EpisodeRecord {
    Syndrome initial;
    double lambda = 0.0;      // effective (post-adaptation) score the channel ran at
    double lambda_raw = 0.0;  // synergy output before any deadline adaptation
    bool gated = false;
    std::vector<int> actions_x, actions_z;
    RewardBreakdown breakdown;
    bool success = false;
    hw::HardwareFeedback feedback;
    double latency_ms = 0.0;
    double budget_ms = std::numeric_limits<double>::infinity();
    int steps = 0;
    double complexity_score = 0.0;
};

struct EpisodeOptions {
    RewardWeights weights;
    std::optional<double> budget_ms;            // deadline; absent = unconstrained
    std::vector<Transition>* transitions = nullptr;  // replay sink
};

// rolls one episode on a fixed hidden error; rng still feeds the latency
// draw and any epsilon-greedy exploration
inline EpisodeRecord run_episode_given(const policy::DecoderPolicy& pol, const CodeInstance& c,
                                       const PauliError& truth, const hw::HardwareConfig& hwc,
                                       double eps, Rng& rng, const EpisodeOptions& opt = {}) {
    EpisodeRecord rec;
    const double tau = hw::sample_latency(hwc, rng);
    rec.latency_ms = tau;

    EpisodeState st = make_episode_state(c, truth, default_step_cap(c));
    rec.initial = st.syndrome;
    rec.complexity_score = complexity(c, st.syndrome, truth);

    rec.lambda_raw = policy::synergy_score(pol, st.syndrome);
    double lambda = rec.lambda_raw;
    if (opt.budget_ms) {
        rec.budget_ms = *opt.budget_ms;
        // predicted transfer time = the latency drawn for this episode
        const auto ad = hw::deadline_adapt(lambda, tau, *opt.budget_ms);
        lambda = ad.lambda;
        st.step_cap = static_cast<int>(std::ceil(default_step_cap(c) * ad.step_cap_scale));
    }
    rec.lambda = lambda;
    const hw::ChannelSetting ch = hw::channel_setting(lambda, tau);
    rec.gated = ch.gated;
    rec.feedback = hw::hardware_feedback(ch);

    while (!st.terminal) {
        const Syndrome before = st.syndrome;
        const auto obs = code::factor_observation(c, st.syndrome);
        const auto act = policy::select_actions(pol, obs, rec.gated, eps, rng);
        rec.actions_x.push_back(act.ax);
        rec.actions_z.push_back(act.az);
        step(st, act.ax, act.az);
        if (opt.transitions) {
            Transition t;
            t.before = before;
            t.a_x = act.ax;
            t.a_z = act.az;
            t.after = st.syndrome;
            t.terminal = st.terminal;
            t.gated = rec.gated;
            t.lambda = lambda;
            opt.transitions->push_back(t);
        }
    }
    rec.steps = st.steps;
    rec.success = episode_success(st);
    rec.breakdown = reward(st, lambda, rec.feedback, opt.weights);
    if (opt.transitions && !opt.transitions->empty())
        opt.transitions->back().reward = rec.breakdown.total;
    return rec;
}

inline EpisodeRecord run_episode(const policy::DecoderPolicy& pol, const CodeInstance& c,
                                 double p, const hw::HardwareConfig& hwc, double eps, Rng& rng,
                                 const EpisodeOptions& opt = {}) {
    const PauliError truth = code::sample_error(c, p, rng);
    return run_episode_given(pol, c, truth, hwc, eps, rng, opt);
}

// ---- JSON-lines episode log ----

inline json record_to_json(const EpisodeRecord& r) {
    return json{{"initial_sx", r.initial.sx.to_string()},
                {"initial_sz", r.initial.sz.to_string()},
                {"lambda", r.lambda},
                {"lambda_raw", r.lambda_raw},
                {"gated", r.gated},
                {"actions_x", r.actions_x},
                {"actions_z", r.actions_z},
                {"r_decode", r.breakdown.r_decode},
                {"f_trans", r.breakdown.f_trans},
                {"e_cost", r.breakdown.e_cost},
                {"step_cost", r.breakdown.step_cost},
                {"reward", r.breakdown.total},
                {"success", r.success},
                {"transmission_fidelity", r.feedback.transmission_fidelity},
                {"entanglement_rate", r.feedback.entanglement_rate},
                {"phase_noise_rad", r.feedback.phase_noise_rad},
                {"latency_ms", r.latency_ms},
                {"budget_ms", std::isinf(r.budget_ms) ? json(nullptr) : json(r.budget_ms)},
                {"steps", r.steps},
                {"complexity", r.complexity_score}};
}

inline void write_episode_jsonl(const std::string& path, const std::vector<EpisodeRecord>& recs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (const auto& r : recs) out << record_to_json(r).dump() << "\n";
}

}  // namespace synqec::env
