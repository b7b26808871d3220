#pragma once

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/code.hpp"
#include "synqec/env.hpp"
#include "synqec/hardware.hpp"
#include "synqec/policy.hpp"
#include "synqec/refdec.hpp"
#include "synqec/rng.hpp"

// Two-phase training: supervised imitation of reference decoders (agents
// only), then TD learning on Q_tot with a target network, uniform replay,
// double-Q bootstrapping, and a synergy regularizer pulling lambda(s) toward
// a normalized syndrome weight. Fine-tuning rolls episodes under
// domain-randomized channel latency so the reward's hardware terms vary.
// The loop returns the fine-tuned policy only when it clearly beats the
// pretrained one on a fixed selection stream; otherwise the pretrained
// policy is the result.

namespace synqec::trainer {

using code::CodeInstance;
using code::Syndrome;
using env::Transition;
using json = nlohmann::json;
using policy::DecoderPolicy;

struct TrainConfig {
    int batch = 96;
    double lr_agents = 8e-4;
    double lr_synergy = 1.5e-3;
    double reg_weight = 0.02;
    double gamma_rl = 0.95;
    int target_sync = 200;  // updates between target-network syncs
    double eps_start = 0.3;
    double eps_end = 0.02;
    int fine_tune_episodes = 3000;
    int episodes_per_epoch = 32;
    int updates_per_epoch = 16;
    size_t replay_capacity = 50000;
    int pretrain_samples = 4000;
    int pretrain_epochs = 10;
    double pretrain_p = 0.01;  // error rate the imitation dataset is drawn at
    double train_p = 0.01;
    std::string hardware = "randomized";
    int select_every = 4;          // epochs between selection evaluations
    int select_episodes = 3000;    // fixed-stream episodes per selection evaluation
    double select_margin = 0.015;  // fine-tuned must beat pretrain by this to be kept
    int checkpoint_interval = 20;  // epochs between periodic checkpoints (out_dir only)
    uint64_t seed = 1;
    std::optional<double> lambda_pin;  // 1.0 = always-mix ablation baseline
    int oracle_wmax = 4;
};

inline json train_config_to_json(const TrainConfig& c) {
    json j{{"batch", c.batch},
           {"lr_agents", c.lr_agents},
           {"lr_synergy", c.lr_synergy},
           {"reg_weight", c.reg_weight},
           {"gamma_rl", c.gamma_rl},
           {"target_sync", c.target_sync},
           {"eps_start", c.eps_start},
           {"eps_end", c.eps_end},
           {"fine_tune_episodes", c.fine_tune_episodes},
           {"episodes_per_epoch", c.episodes_per_epoch},
           {"updates_per_epoch", c.updates_per_epoch},
           {"replay_capacity", c.replay_capacity},
           {"pretrain_samples", c.pretrain_samples},
           {"pretrain_epochs", c.pretrain_epochs},
           {"pretrain_p", c.pretrain_p},
           {"train_p", c.train_p},
           {"hardware", c.hardware},
           {"select_every", c.select_every},
           {"select_episodes", c.select_episodes},
           {"select_margin", c.select_margin},
           {"checkpoint_interval", c.checkpoint_interval},
           {"seed", c.seed},
           {"oracle_wmax", c.oracle_wmax}};
    j["lambda_pin"] = c.lambda_pin ? json(*c.lambda_pin) : json(nullptr);
    return j;
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j.at(k).get<std::remove_reference_t<decltype(field)>>();
    };
    get("batch", c.batch);
    get("lr_agents", c.lr_agents);
    get("lr_synergy", c.lr_synergy);
    get("reg_weight", c.reg_weight);
    get("gamma_rl", c.gamma_rl);
    get("target_sync", c.target_sync);
    get("eps_start", c.eps_start);
    get("eps_end", c.eps_end);
    get("fine_tune_episodes", c.fine_tune_episodes);
    get("episodes_per_epoch", c.episodes_per_epoch);
    get("updates_per_epoch", c.updates_per_epoch);
    get("replay_capacity", c.replay_capacity);
    get("pretrain_samples", c.pretrain_samples);
    get("pretrain_epochs", c.pretrain_epochs);
    get("pretrain_p", c.pretrain_p);
    get("train_p", c.train_p);
    get("hardware", c.hardware);
    get("select_every", c.select_every);
    get("select_episodes", c.select_episodes);
    get("select_margin", c.select_margin);
    get("checkpoint_interval", c.checkpoint_interval);
    get("seed", c.seed);
    get("oracle_wmax", c.oracle_wmax);
    if (j.contains("lambda_pin") && !j.at("lambda_pin").is_null())
        c.lambda_pin = j.at("lambda_pin").get<double>();
    return c;
}

// epsilon for epoch e of n (linear start -> end)
inline double eps_at(const TrainConfig& c, int epoch, int epochs) {
    if (epochs <= 1) return c.eps_end;
    const double f = static_cast<double>(epoch) / (epochs - 1);
    return c.eps_start + (c.eps_end - c.eps_start) * f;
}

class ReplayStore {
  public:
    explicit ReplayStore(size_t capacity) : cap_(capacity) {}

    void push(const Transition& t) {
        if (buf_.size() < cap_) {
            buf_.push_back(t);
        } else {
            buf_[total_ % cap_] = t;
        }
        ++total_;
    }
    size_t size() const { return buf_.size(); }
    size_t capacity() const { return cap_; }
    const Transition& at(size_t i) const { return buf_[i]; }

    // uniform without replacement within a batch
    std::vector<const Transition*> sample(size_t batch, Rng& rng) const {
        const size_t m = buf_.size();
        const size_t k = std::min(batch, m);
        std::vector<uint32_t> idx(m);
        for (size_t i = 0; i < m; ++i) idx[i] = static_cast<uint32_t>(i);
        std::vector<const Transition*> out(k);
        for (size_t i = 0; i < k; ++i) {
            const size_t j = i + static_cast<size_t>(rng.below(static_cast<uint64_t>(m - i)));
            std::swap(idx[i], idx[j]);
            out[i] = &buf_[idx[i]];
        }
        return out;
    }

  private:
    size_t cap_;
    uint64_t total_ = 0;
    std::vector<Transition> buf_;
};

struct PolicyAdam {
    std::vector<nn::AdamState> states;

    static PolicyAdam zeros_like(const DecoderPolicy& p) {
        PolicyAdam a;
        policy::for_each_mlp(p, [&](const nn::Mlp& m, policy::ParamGroup) {
            a.states.push_back(nn::AdamState::zeros_like(m));
        });
        return a;
    }
};

// step every sub-network with its group's learning rate
inline void apply_gradients(DecoderPolicy& p, const policy::PolicyGrads& g, PolicyAdam& adam,
                            const TrainConfig& cfg) {
    size_t i = 0;
    std::vector<const nn::Grads*> order;
    policy::for_each_grads(g, [&](const nn::Grads& gr, policy::ParamGroup) { order.push_back(&gr); });
    policy::for_each_mlp(p, [&](nn::Mlp& m, policy::ParamGroup grp) {
        const double lr = grp == policy::ParamGroup::synergy ? cfg.lr_synergy : cfg.lr_agents;
        nn::adam_step(m, *order[i], adam.states[i], lr);
        ++i;
    });
}

// ---- supervised pretraining ----

// A reference correction unrolls into simultaneous per-step actions: the X
// agent plays the z-support in ascending qubit order, the Z agent the
// x-support, both HALT once their list is exhausted; the final item is the
// double-HALT on the cleared syndrome. The channel gate is drawn 50/50 per
// record so agents see both gated and ungated inputs.
struct ImitationItem {
    Syndrome syndrome;
    bool gated = false;
    int a_x = 0;
    int a_z = 0;
};

inline std::vector<ImitationItem> decompose_labels(const CodeInstance& c,
                                                   const refdec::PretrainDataset& ds,
                                                   Rng& gate_rng) {
    std::vector<ImitationItem> items;
    const int halt = c.n;
    for (const auto& rec : ds.records) {
        if (rec.syndrome.sx.n != c.hx.rows || rec.syndrome.sz.n != c.hz.rows)
            throw std::invalid_argument("decompose_labels: record does not match code");
        const bool gated = gate_rng.u01() < 0.5;
        std::vector<int> xs, zs;
        for (int q = 0; q < c.n; ++q) {
            if (rec.target.x.get(q)) xs.push_back(q);
            if (rec.target.z.get(q)) zs.push_back(q);
        }
        Syndrome s = rec.syndrome;
        const size_t steps = std::max(xs.size(), zs.size()) + 1;
        for (size_t t = 0; t < steps; ++t) {
            ImitationItem it;
            it.syndrome = s;
            it.gated = gated;
            it.a_x = t < zs.size() ? zs[t] : halt;
            it.a_z = t < xs.size() ? xs[t] : halt;
            items.push_back(it);
            if (it.a_x != halt) s.sx ^= c.hx_col[it.a_x];
            if (it.a_z != halt) s.sz ^= c.hz_col[it.a_z];
        }
        assert(!s.any());
    }
    return items;
}

// alignment target for the synergy score: syndrome weight normalized by half
// the check count, clamped to 1, so mid-weight syndromes already ask for full
// coupling
inline double synergy_target(const CodeInstance& c, const Syndrome& s) {
    return std::min(1.0, s.weight() / (0.5 * c.total_checks()));
}

struct PretrainMetrics {
    double accuracy = 0.0;  // greedy action match over agent decisions, post-training
    double ce_loss = 0.0;   // mean cross-entropy over the last epoch
    double synergy_loss = 0.0;  // mean squared alignment deviation, post-training
    size_t items = 0;
};

namespace detail {

// cross-entropy on Q treated as logits; returns loss, writes dL/dq
inline double ce_grad(const nn::Vec& q, int label, double scale, nn::Vec& dq) {
    const double mx = *std::max_element(q.begin(), q.end());
    double z = 0.0;
    for (double v : q) z += std::exp(v - mx);
    const double logz = std::log(z) + mx;
    dq.assign(q.size(), 0.0);
    for (size_t i = 0; i < q.size(); ++i) dq[i] = std::exp(q[i] - logz) * scale;
    dq[label] -= scale;
    return logz - q[label];
}

}  // namespace detail

// imitation training of the two agents, with the synergy score regressed on
// its alignment target over the same syndromes; the mixer is not touched
inline PretrainMetrics pretrain(DecoderPolicy& p, const CodeInstance& c,
                                const std::vector<ImitationItem>& items, const TrainConfig& cfg) {
    if (items.empty()) throw std::invalid_argument("pretrain: empty dataset");
    PretrainMetrics m;
    m.items = items.size();
    PolicyAdam adam = PolicyAdam::zeros_like(p);
    Rng shuffle_rng = make_stream(cfg.seed, StreamPurpose::pretrain_shuffle, 0);
    std::vector<uint32_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            const size_t end = std::min(order.size(), start + cfg.batch);
            const double scale = 1.0 / (2.0 * (end - start));
            policy::PolicyGrads g = policy::PolicyGrads::zeros_like(p);
            for (size_t k = start; k < end; ++k) {
                const ImitationItem& it = items[order[k]];
                const auto obs = code::factor_observation(c, it.syndrome);
                nn::Vec dq;
                policy::AgentTrace tx, tz;
                const nn::Vec qx =
                    policy::agent_forward(p, policy::Agent::x, obs, it.gated, &tx);
                detail::ce_grad(qx, it.a_x, scale, dq);
                policy::agent_backward(p, policy::Agent::x, tx, dq, g.agent_x);
                const nn::Vec qz =
                    policy::agent_forward(p, policy::Agent::z, obs, it.gated, &tz);
                detail::ce_grad(qz, it.a_z, scale, dq);
                policy::agent_backward(p, policy::Agent::z, tz, dq, g.agent_z);
                if (!p.lambda_pin) {
                    // same alignment objective the score keeps in the value phase
                    const auto sev = policy::synergy_eval(p, policy::syndrome_input(it.syndrome));
                    const double dev = sev.lambda - synergy_target(c, it.syndrome);
                    const double dlam = cfg.reg_weight * 2.0 * dev * (2.0 * scale);
                    nn::dense_backward(p.synergy, sev.trace, nn::Vec{dlam}, g.synergy);
                }
            }
            // the mixer keeps its bits until the value phase
            size_t mi = 0;
            std::vector<const nn::Grads*> go;
            policy::for_each_grads(g, [&](nn::Grads& gr, policy::ParamGroup) { go.push_back(&gr); });
            policy::for_each_mlp(p, [&](nn::Mlp& mlp, policy::ParamGroup grp) {
                if (grp == policy::ParamGroup::agents)
                    nn::adam_step(mlp, *go[mi], adam.states[mi], cfg.lr_agents);
                else if (grp == policy::ParamGroup::synergy && !p.lambda_pin)
                    nn::adam_step(mlp, *go[mi], adam.states[mi], cfg.lr_synergy);
                ++mi;
            });
        }
    }
    {
        double ce = 0.0, syn = 0.0;
        size_t hits = 0;
        nn::Vec dq;
        for (const auto& it : items) {
            const auto obs = code::factor_observation(c, it.syndrome);
            const nn::Vec qx = policy::agent_q_values(p, policy::Agent::x, obs, it.gated);
            const nn::Vec qz = policy::agent_q_values(p, policy::Agent::z, obs, it.gated);
            ce += detail::ce_grad(qx, it.a_x, 0.0, dq);
            ce += detail::ce_grad(qz, it.a_z, 0.0, dq);
            hits += policy::argmax_lowest(qx) == it.a_x ? 1 : 0;
            hits += policy::argmax_lowest(qz) == it.a_z ? 1 : 0;
            if (!p.lambda_pin) {
                const double lam = policy::synergy_score(p, it.syndrome);
                const double dev = lam - synergy_target(c, it.syndrome);
                syn += dev * dev;
            }
        }
        m.ce_loss = ce / (2.0 * items.size());
        m.accuracy = static_cast<double>(hits) / (2.0 * items.size());
        m.synergy_loss = syn / static_cast<double>(items.size());
    }
    return m;
}

// Imitation leaves the Q heads at logit scale, an order of magnitude above
// the discounted returns the value phase regresses. The identity branch of
// Q_tot adds the raw heads, and regressing that sum onto returns erases the
// pretrained action ordering before anything else can adapt. Mapping each
// head affinely into reward units at the handoff keeps every argmax
// unchanged while giving the value phase outputs it can fit in place: the
// spread shrinks to a per-head share of the terminal reward swing and the
// greedy value lands near a successful episode's per-head return share.
// Returns the scale factor (averaged over the agents).
inline double calibrate_value_scale(DecoderPolicy& p, const CodeInstance& c,
                                    const std::vector<ImitationItem>& items,
                                    double target_span = 1.0, double target_top = 0.5) {
    double k_used = 0.0;
    for (const auto agent : {policy::Agent::x, policy::Agent::z}) {
        double spread = 0.0, top = 0.0;
        size_t n = 0;
        for (const auto& it : items) {
            const auto obs = code::factor_observation(c, it.syndrome);
            const auto q = policy::agent_q_values(p, agent, obs, it.gated);
            const auto mm = std::minmax_element(q.begin(), q.end());
            spread += *mm.second - *mm.first;
            top += *mm.second;
            ++n;
        }
        if (n == 0) return 1.0;
        const double mean_spread = spread / static_cast<double>(n);
        const double k = mean_spread > target_span ? target_span / mean_spread : 1.0;
        const double shift = target_top - k * (top / static_cast<double>(n));
        auto& head = (agent == policy::Agent::x ? p.agent_x : p.agent_z).trunk.layers.back();
        for (double& w : head.w.data) w *= k;
        for (double& b : head.b) b *= k;
        for (double& b : head.b) b += shift;
        k_used += 0.5 * k;
    }
    return k_used;
}

// ---- TD learning ----

struct TdStats {
    double loss = 0.0;      // td + weighted regularizer
    double td_loss = 0.0;   // mean squared TD error
    double reg_loss = 0.0;  // mean squared synergy deviation (unweighted)
    bool applied = false;
};

// greedy joint value of the target network at s' with online action choice
inline double double_q_target(const DecoderPolicy& online, const DecoderPolicy& target,
                              const CodeInstance& c, const Transition& t) {
    const auto obs = code::factor_observation(c, t.after);
    const int ax = policy::argmax_lowest(policy::agent_q_values(online, policy::Agent::x, obs, t.gated));
    const int az = policy::argmax_lowest(policy::agent_q_values(online, policy::Agent::z, obs, t.gated));
    const double qx = policy::agent_q_values(target, policy::Agent::x, obs, t.gated)[ax];
    const double qz = policy::agent_q_values(target, policy::Agent::z, obs, t.gated)[az];
    return policy::mix_qtot(target, t.after, qx, qz);
}

// loss + full gradient for one batch; shared by td_update and the
// finite-difference suite
inline TdStats td_compute(const DecoderPolicy& p, const DecoderPolicy& target,
                          const CodeInstance& c, const std::vector<const Transition*>& batch,
                          const TrainConfig& cfg, policy::PolicyGrads& g) {
    TdStats st;
    if (batch.empty()) return st;
    const double inv = 1.0 / batch.size();
    for (const Transition* tp : batch) {
        const Transition& t = *tp;
        const auto obs = code::factor_observation(c, t.before);
        policy::AgentTrace tx, tz;
        const nn::Vec qxv = policy::agent_forward(p, policy::Agent::x, obs, t.gated, &tx);
        const nn::Vec qzv = policy::agent_forward(p, policy::Agent::z, obs, t.gated, &tz);
        const double qx = qxv[t.a_x];
        const double qz = qzv[t.a_z];
        const nn::Vec sbits = policy::syndrome_input(t.before);
        policy::QtotEval ev;
        const double qtot = policy::mix_qtot_value(p, sbits, qx, qz, &ev);
        const double y =
            t.terminal ? t.reward : t.reward + cfg.gamma_rl * double_q_target(p, target, c, t);
        const double diff = qtot - y;
        st.td_loss += diff * diff * inv;

        double dlam_extra = 0.0;
        if (!p.lambda_pin) {
            const double tgt = synergy_target(c, t.before);
            const double dev = ev.syn.lambda - tgt;
            st.reg_loss += dev * dev * inv;
            dlam_extra = cfg.reg_weight * 2.0 * dev * inv;
        }
        double dqx = 0.0, dqz = 0.0;
        // value loss takes the score as given; the score trains on alignment
        policy::qtot_backward(p, ev, 2.0 * diff * inv, dlam_extra, g, dqx, dqz, false);
        nn::Vec dq(qxv.size(), 0.0);
        dq[t.a_x] = dqx;
        policy::agent_backward(p, policy::Agent::x, tx, dq, g.agent_x);
        std::fill(dq.begin(), dq.end(), 0.0);
        dq[t.a_z] = dqz;
        policy::agent_backward(p, policy::Agent::z, tz, dq, g.agent_z);
    }
    st.loss = st.td_loss + cfg.reg_weight * st.reg_loss;
    return st;
}

inline TdStats td_update(DecoderPolicy& p, const DecoderPolicy& target, const CodeInstance& c,
                         const std::vector<const Transition*>& batch, const TrainConfig& cfg,
                         PolicyAdam& adam, int* skipped = nullptr) {
    policy::PolicyGrads g = policy::PolicyGrads::zeros_like(p);
    TdStats st = td_compute(p, target, c, batch, cfg, g);
    if (!std::isfinite(st.loss)) {
        if (skipped) ++*skipped;
        return st;
    }
    apply_gradients(p, g, adam, cfg);
    st.applied = true;
    return st;
}

// ---- evaluation ----

struct EvalSummary {
    double success = 0.0;
    double mean_lambda = 0.0;
    double mean_f_trans = 0.0;
    double mean_reward = 0.0;
    int episodes = 0;
};

inline EvalSummary evaluate_policy(const DecoderPolicy& p, const CodeInstance& c, double err_p,
                                   const hw::HardwareConfig& hwc, int episodes, Rng& rng,
                                   std::optional<double> budget = {},
                                   std::vector<env::EpisodeRecord>* records = nullptr) {
    EvalSummary s;
    s.episodes = episodes;
    env::EpisodeOptions opt;
    opt.budget_ms = budget;
    for (int i = 0; i < episodes; ++i) {
        const auto rec = env::run_episode(p, c, err_p, hwc, 0.0, rng, opt);
        s.success += rec.success ? 1.0 : 0.0;
        s.mean_lambda += rec.lambda;
        s.mean_f_trans += rec.feedback.transmission_fidelity;
        s.mean_reward += rec.breakdown.total;
        if (records) records->push_back(rec);
    }
    if (episodes > 0) {
        s.success /= episodes;
        s.mean_lambda /= episodes;
        s.mean_f_trans /= episodes;
        s.mean_reward /= episodes;
    }
    return s;
}

// ---- full loop ----

struct CurveRow {
    int epoch = 0;
    double success = 0.0;  // epsilon-greedy rollout success within the epoch
    double mean_lambda = 0.0;
    double loss = 0.0;
    double mean_f_trans = 0.0;
};

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
    std::string out = "epoch,success,mean_lambda,loss,mean_f_trans\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.success,
                      r.mean_lambda, r.loss, r.mean_f_trans);
        out += buf;
    }
    return out;
}

struct TrainResult {
    DecoderPolicy policy;           // selected result
    DecoderPolicy pretrain_policy;  // phase-1 snapshot
    std::vector<CurveRow> curve;
    PretrainMetrics pretrain;
    double head_scale = 1.0;        // Q-head rescale applied at the phase handoff
    double pretrain_select = 0.0;   // selection-stream success of the snapshot
    double fine_tuned_select = 0.0;  // best selection score seen during fine-tuning
    double best_select = 0.0;       // selection-stream success of the result
    int best_epoch = -1;            // -1 when the pretrained policy won
    std::string picked;             // "pretrain" or "fine_tuned"
    int updates = 0;
    int skipped_updates = 0;
    double wall_seconds = 0.0;
};

inline double selection_success(const DecoderPolicy& p, const CodeInstance& c,
                                const TrainConfig& cfg, const hw::HardwareConfig& hwc) {
    Rng rng = make_stream(cfg.seed, StreamPurpose::select_eval, 0);
    return evaluate_policy(p, c, cfg.train_p, hwc, cfg.select_episodes, rng).success;
}

inline TrainResult train_loop(const CodeInstance& c, const TrainConfig& cfg,
                              const std::string& out_dir = "") {
    const auto t0 = std::chrono::steady_clock::now();
    const hw::HardwareConfig hwc = cfg.hardware == "randomized"
                                       ? hw::randomized_training_config()
                                       : hw::config_by_name(cfg.hardware);
    TrainResult res;

    // phase 1: imitation
    Rng data_rng = make_stream(cfg.seed, StreamPurpose::pretrain_data, 0);
    const auto ds = refdec::make_pretrain_dataset(c, cfg.pretrain_p, cfg.pretrain_samples,
                                                  data_rng, cfg.oracle_wmax);
    const auto items = decompose_labels(c, ds, data_rng);
    DecoderPolicy pol = policy::make_policy(c, cfg.seed);
    pol.lambda_pin = cfg.lambda_pin;
    res.pretrain = pretrain(pol, c, items, cfg);
    res.head_scale = calibrate_value_scale(pol, c, items);
    res.pretrain_policy = pol;
    res.pretrain_select = selection_success(pol, c, cfg, hwc);

    // phase 2: TD fine-tuning
    DecoderPolicy target = pol;
    PolicyAdam adam = PolicyAdam::zeros_like(pol);
    ReplayStore replay(cfg.replay_capacity);
    Rng roll_rng = make_stream(cfg.seed, StreamPurpose::rollout, 0);
    Rng replay_rng = make_stream(cfg.seed, StreamPurpose::replay_sample, 0);
    const int epochs =
        (cfg.fine_tune_episodes + cfg.episodes_per_epoch - 1) / cfg.episodes_per_epoch;

    DecoderPolicy best_ft = pol;
    double best_ft_select = -1.0;
    int best_ft_epoch = -1;

    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    auto dump = [&](const DecoderPolicy& p, const std::string& name) {
        if (out_dir.empty()) return;
        std::ofstream f(out_dir + "/" + name);
        f << policy::policy_to_json(p).dump(2) << "\n";
    };
    dump(pol, "checkpoint_pretrain.json");

    std::vector<Transition> sink;
    for (int e = 0; e < epochs; ++e) {
        const double eps = eps_at(cfg, e, epochs);
        CurveRow row;
        row.epoch = e;
        env::EpisodeOptions opt;
        opt.transitions = &sink;
        for (int k = 0; k < cfg.episodes_per_epoch; ++k) {
            sink.clear();
            const auto rec = env::run_episode(pol, c, cfg.train_p, hwc, eps, roll_rng, opt);
            for (const auto& t : sink) replay.push(t);
            row.success += rec.success ? 1.0 : 0.0;
            row.mean_lambda += rec.lambda;
            row.mean_f_trans += rec.feedback.transmission_fidelity;
        }
        row.success /= cfg.episodes_per_epoch;
        row.mean_lambda /= cfg.episodes_per_epoch;
        row.mean_f_trans /= cfg.episodes_per_epoch;

        double loss_sum = 0.0;
        int loss_cnt = 0;
        for (int u = 0; u < cfg.updates_per_epoch; ++u) {
            if (replay.size() < static_cast<size_t>(cfg.batch)) break;
            const auto batch = replay.sample(cfg.batch, replay_rng);
            const TdStats st = td_update(pol, target, c, batch, cfg, adam, &res.skipped_updates);
            loss_sum += st.loss;
            ++loss_cnt;
            ++res.updates;
            pol.epoch = e;
            if (res.updates % cfg.target_sync == 0) target = pol;
        }
        row.loss = loss_cnt > 0 ? loss_sum / loss_cnt : 0.0;
        res.curve.push_back(row);

        if ((e + 1) % cfg.select_every == 0 || e == epochs - 1) {
            const double s = selection_success(pol, c, cfg, hwc);
            if (s > best_ft_select) {
                best_ft_select = s;
                best_ft = pol;
                best_ft_epoch = e;
            }
        }
        if (!out_dir.empty() && cfg.checkpoint_interval > 0 &&
            (e + 1) % cfg.checkpoint_interval == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.json", e);
            dump(pol, name);
        }
    }

    res.fine_tuned_select = best_ft_select;
    if (best_ft_select >= res.pretrain_select + cfg.select_margin) {
        res.policy = best_ft;
        res.best_select = best_ft_select;
        res.best_epoch = best_ft_epoch;
        res.picked = "fine_tuned";
    } else {
        res.policy = res.pretrain_policy;
        res.best_select = res.pretrain_select;
        res.best_epoch = -1;
        res.picked = "pretrain";
    }
    if (!out_dir.empty()) {
        dump(res.policy, "checkpoint_best.json");
        std::ofstream f(out_dir + "/curve.csv");
        f << curve_csv(res.curve);
    }
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace synqec::trainer
