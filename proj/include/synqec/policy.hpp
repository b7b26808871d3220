#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/code.hpp"
#include "synqec/nn.hpp"
#include "synqec/rng.hpp"

// Two cooperating Q-agents over the factored syndrome, coupled through a
// learned synergy score:
//   lambda(s) = sigmoid(head(phi(s)))                       (synergy net)
//   Q_tot = (1-lambda)*(qx+qz) + lambda*f(qx,qz; w(s))      (mixer)
// The mixer weights come from hypernetworks on s and pass through abs(), so
// dQ_tot/dq_agent >= 0 holds for every state: per-agent argmax equals joint
// argmax. Agents embed syndrome checks in fixed groups (4 local / 2 remote)
// with a static per-group tag, sum within a group, average across groups;
// output is invariant under permuting checks inside a group by construction.
// The X agent watches X checks and emits Z corrections; the Z agent the
// reverse. Cross-panel channels are visible only while the flying-qubit link
// is gated open.

namespace synqec::policy {

using code::CodeInstance;
using code::ObservationChannels;
using code::Syndrome;
using nn::Vec;
using json = nlohmann::json;

struct Arch {
    int embed_dim = 32;
    int trunk_hidden = 256;  // first agent layer; also the param-convention anchor
    int trunk_feat = 64;
    int synergy_h1 = 64;
    int synergy_h2 = 32;
    int mixer_hidden = 32;
    int group_local = 4;
    int group_remote = 2;

    bool operator==(const Arch& o) const {
        return embed_dim == o.embed_dim && trunk_hidden == o.trunk_hidden &&
               trunk_feat == o.trunk_feat && synergy_h1 == o.synergy_h1 &&
               synergy_h2 == o.synergy_h2 && mixer_hidden == o.mixer_hidden &&
               group_local == o.group_local && group_remote == o.group_remote;
    }
};

struct ChannelLayout {
    int checks = 0;
    int group_size = 4;
    int groups = 0;

    void init(int check_count, int gsize) {
        checks = check_count;
        group_size = gsize;
        groups = (check_count + gsize - 1) / gsize;
    }
    // static tag identifying the group, strictly inside (0,1)
    double tag(int g) const { return (g + 1.0) / (groups + 1.0); }
};

enum class Agent { x, z };

// embed order per agent: own_local, own_remote, cross_local, cross_remote
struct AgentNet {
    nn::Mlp embed[4];
    nn::Mlp trunk;  // hidden layers + Q head as final layer (one value per action)
};

struct MixerNet {
    nn::Mlp hyper_w1;  // S -> hidden*2, identity
    nn::Mlp hyper_b1;  // S -> hidden
    nn::Mlp hyper_w2;  // S -> hidden
    nn::Mlp hyper_b2;  // S -> 1
};

struct CodeBinding {
    code::CodeFamily family = code::CodeFamily::toycss;
    int distance = 0;
    int bb_l = 0, bb_m = 0;
    std::vector<code::Monomial> poly_a, poly_b;

    static CodeBinding of(const CodeInstance& c) {
        CodeBinding b;
        b.family = c.family;
        b.distance = c.distance;
        b.bb_l = c.bb_l;
        b.bb_m = c.bb_m;
        b.poly_a = c.bb_poly_a;
        b.poly_b = c.bb_poly_b;
        return b;
    }
    CodeInstance build() const {
        return family == code::CodeFamily::toycss ? code::build_toy_css(distance)
                                                  : code::build_true_bb(bb_l, bb_m, poly_a, poly_b);
    }
};

struct DecoderPolicy {
    Arch arch;
    CodeBinding binding;
    int n = 0;          // qubits; actions per agent = n + 1 (HALT last)
    int sx_checks = 0;  // X-check count
    int sz_checks = 0;
    ChannelLayout lay_x_local, lay_x_remote, lay_z_local, lay_z_remote;

    AgentNet agent_x, agent_z;
    nn::Mlp synergy;  // S -> h1 relu -> h2 relu -> 1 sigmoid
    MixerNet mixer;

    std::optional<double> lambda_pin;  // architectural pin (1.0 = plain value mixing baseline)

    uint64_t seed = 0;
    int epoch = 0;

    int syndrome_dim() const { return sx_checks + sz_checks; }
    int actions() const { return n + 1; }
    int halt_action() const { return n; }

    const AgentNet& net(Agent a) const { return a == Agent::x ? agent_x : agent_z; }
    AgentNet& net(Agent a) { return a == Agent::x ? agent_x
                                                  : agent_z; }

    // channel layouts in the agent's embed order
    std::array<const ChannelLayout*, 4> layouts(Agent a) const {
        if (a == Agent::x)
            return {&lay_x_local, &lay_x_remote, &lay_z_local, &lay_z_remote};
        return {&lay_z_local, &lay_z_remote, &lay_x_local, &lay_x_remote};
    }

    size_t actual_param_count() const {
        size_t t = synergy.param_count();
        for (const AgentNet* a : {&agent_x, &agent_z}) {
            for (const auto& e : a->embed) t += e.param_count();
            t += a->trunk.param_count();
        }
        t += mixer.hyper_w1.param_count() + mixer.hyper_b1.param_count() +
             mixer.hyper_w2.param_count() + mixer.hyper_b2.param_count();
        return t;
    }
};

inline DecoderPolicy make_policy(const CodeInstance& c, uint64_t seed, Arch arch = {}) {
    DecoderPolicy p;
    p.arch = arch;
    p.binding = CodeBinding::of(c);
    p.n = c.n;
    p.sx_checks = c.hx.rows;
    p.sz_checks = c.hz.rows;
    p.lay_x_local.init(static_cast<int>(c.x_local_checks.size()), arch.group_local);
    p.lay_x_remote.init(static_cast<int>(c.x_remote_checks.size()), arch.group_remote);
    p.lay_z_local.init(static_cast<int>(c.z_local_checks.size()), arch.group_local);
    p.lay_z_remote.init(static_cast<int>(c.z_remote_checks.size()), arch.group_remote);
    p.seed = seed;

    Rng rng = make_stream(seed, StreamPurpose::init_weights, 0);
    auto one_layer = [&](int in, int out, nn::Activation act, double scale) {
        nn::Mlp m;
        m.layers.emplace_back(in, out, act);
        nn::init_layer(m.layers.back(), rng, scale);
        return m;
    };
    auto make_agent = [&]() {
        AgentNet a;
        for (auto& e : a.embed) e = one_layer(2, arch.embed_dim, nn::Activation::relu, 1.0);
        a.trunk.layers.emplace_back(4 * arch.embed_dim, arch.trunk_hidden, nn::Activation::relu);
        a.trunk.layers.emplace_back(arch.trunk_hidden, arch.trunk_feat, nn::Activation::relu);
        a.trunk.layers.emplace_back(arch.trunk_feat, p.actions(), nn::Activation::identity);
        nn::init_layer(a.trunk.layers[0], rng, 1.0);
        nn::init_layer(a.trunk.layers[1], rng, 1.0);
        nn::init_layer(a.trunk.layers[2], rng, 0.1);
        return a;
    };
    p.agent_x = make_agent();
    p.agent_z = make_agent();

    const int S = p.syndrome_dim();
    p.synergy.layers.emplace_back(S, arch.synergy_h1, nn::Activation::relu);
    p.synergy.layers.emplace_back(arch.synergy_h1, arch.synergy_h2, nn::Activation::relu);
    p.synergy.layers.emplace_back(arch.synergy_h2, 1, nn::Activation::sigmoid);
    nn::init_layer(p.synergy.layers[0], rng, 1.0);
    nn::init_layer(p.synergy.layers[1], rng, 1.0);
    nn::init_layer(p.synergy.layers[2], rng, 0.5);

    p.mixer.hyper_w1 = one_layer(S, arch.mixer_hidden * 2, nn::Activation::identity, 0.1);
    p.mixer.hyper_b1 = one_layer(S, arch.mixer_hidden, nn::Activation::identity, 0.1);
    p.mixer.hyper_w2 = one_layer(S, arch.mixer_hidden, nn::Activation::identity, 0.1);
    p.mixer.hyper_b2 = one_layer(S, 1, nn::Activation::identity, 0.1);
    return p;
}

inline Vec syndrome_input(const Syndrome& s) {
    Vec v(static_cast<size_t>(s.sx.n + s.sz.n), 0.0);
    for (int i = 0; i < s.sx.n; ++i) v[i] = s.sx.get(i) ? 1.0 : 0.0;
    for (int i = 0; i < s.sz.n; ++i) v[static_cast<size_t>(s.sx.n) + i] = s.sz.get(i) ? 1.0 : 0.0;
    return v;
}

// ---- synergy ----

struct SynergyEval {
    double lambda = 0.0;
    bool pinned = false;
    nn::Trace trace;  // valid only when !pinned
};

inline SynergyEval synergy_eval(const DecoderPolicy& p, const Vec& sbits) {
    SynergyEval e;
    if (p.lambda_pin) {
        e.lambda = *p.lambda_pin;
        e.pinned = true;
        return e;
    }
    const Vec out = nn::dense_forward(p.synergy, sbits, &e.trace);
    e.lambda = out[0];
    return e;
}

inline double synergy_score(const DecoderPolicy& p, const Syndrome& s) {
    return synergy_eval(p, syndrome_input(s)).lambda;
}

// ---- agent forward/backward ----

// Within a group only the multiplicity of each bit value matters (all checks
// in a group share one tag), so the trace stores per-group counts and the two
// possible embeddings.
struct GroupTrace {
    int n0 = 0, n1 = 0;
    Vec pre0, post0, pre1, post1;
};

struct ChannelTrace {
    std::vector<GroupTrace> groups;
    Vec pooled;  // mean over groups of within-group sums; zeros when skipped
};

struct AgentTrace {
    ChannelTrace ch[4];
    bool gated = true;
    nn::Trace trunk;
    Vec q;
};

namespace detail {

inline void embed_channel(const nn::Mlp& embed, const ChannelLayout& lay,
                          const std::vector<uint8_t>& bits, int embed_dim, ChannelTrace& out) {
    out.pooled.assign(embed_dim, 0.0);
    out.groups.assign(lay.groups, GroupTrace{});
    if (lay.groups == 0) return;
    assert(static_cast<int>(bits.size()) == lay.checks);
    const nn::DenseLayer& l = embed.layers[0];
    Vec in(2);
    for (int g = 0; g < lay.groups; ++g) {
        GroupTrace& gt = out.groups[g];
        const int begin = g * lay.group_size;
        const int end = std::min(begin + lay.group_size, lay.checks);
        int ones = 0;
        for (int i = begin; i < end; ++i) ones += bits[i] ? 1 : 0;
        // zero padding counts as bit=0 entries
        gt.n1 = ones;
        gt.n0 = lay.group_size - ones;
        in[1] = lay.tag(g);
        in[0] = 0.0;
        nn::dense_forward_layer(l, in, gt.pre0, gt.post0);
        if (gt.n1 > 0) {
            in[0] = 1.0;
            nn::dense_forward_layer(l, in, gt.pre1, gt.post1);
        }
        for (int e = 0; e < embed_dim; ++e) {
            double acc = gt.n0 * gt.post0[e];
            if (gt.n1 > 0) acc += gt.n1 * gt.post1[e];
            out.pooled[e] += acc;
        }
    }
    const double inv = 1.0 / lay.groups;
    for (auto& v : out.pooled) v *= inv;
}

// upstream is dJ/d(pooled); accumulates embedder grads
inline void embed_channel_backward(const nn::Mlp& embed, const ChannelLayout& lay,
                                   const ChannelTrace& tr, const Vec& upstream, nn::Grads& g) {
    if (lay.groups == 0) return;
    const nn::DenseLayer& l = embed.layers[0];
    const int E = l.out_dim();
    const double inv = 1.0 / lay.groups;
    nn::Matrix& dw = g.dw[0];
    Vec& db = g.db[0];
    for (int gi = 0; gi < lay.groups; ++gi) {
        const GroupTrace& gt = tr.groups[gi];
        const double tag = lay.tag(gi);
        auto backprop_value = [&](int count, const Vec& pre, const Vec& post, double bit) {
            if (count == 0) return;
            for (int e = 0; e < E; ++e) {
                const double delta =
                    upstream[e] * inv * count * nn::act_deriv(l.act, pre[e], post[e]);
                dw.at(e, 0) += delta * bit;
                dw.at(e, 1) += delta * tag;
                db[e] += delta;
            }
        };
        backprop_value(gt.n0, gt.pre0, gt.post0, 0.0);
        backprop_value(gt.n1, gt.pre1, gt.post1, 1.0);
    }
}

}  // namespace detail

inline const std::vector<uint8_t>& channel_bits(const ObservationChannels& o, Agent a, int slot) {
    if (a == Agent::x) {
        switch (slot) {
            case 0: return o.x_local;
            case 1: return o.x_remote;
            case 2: return o.z_local;
            default: return o.z_remote;
        }
    }
    switch (slot) {
        case 0: return o.z_local;
        case 1: return o.z_remote;
        case 2: return o.x_local;
        default: return o.x_remote;
    }
}

inline Vec agent_forward(const DecoderPolicy& p, Agent a, const ObservationChannels& obs,
                         bool gated, AgentTrace* trace) {
    const AgentNet& net = p.net(a);
    const auto lays = p.layouts(a);
    const int E = p.arch.embed_dim;
    AgentTrace local;
    AgentTrace& t = trace ? *trace : local;
    t.gated = gated;
    Vec trunk_in(4 * static_cast<size_t>(E), 0.0);
    for (int slot = 0; slot < 4; ++slot) {
        const bool active = (slot < 2) || gated;
        if (active) {
            detail::embed_channel(net.embed[slot], *lays[slot], channel_bits(obs, a, slot), E,
                                  t.ch[slot]);
            std::copy(t.ch[slot].pooled.begin(), t.ch[slot].pooled.end(),
                      trunk_in.begin() + slot * E);
        } else {
            t.ch[slot].groups.clear();
            t.ch[slot].pooled.assign(E, 0.0);
        }
    }
    t.q = nn::dense_forward(net.trunk, trunk_in, &t.trunk);
    return t.q;
}

// Q-vector for one agent; length = actions(). Cross-panel channels are part
// of the input only when the channel is gated open.
inline Vec agent_q_values(const DecoderPolicy& p, Agent a, const ObservationChannels& obs,
                          bool gated = true) {
    return agent_forward(p, a, obs, gated, nullptr);
}

struct AgentGrads {
    nn::Grads embed[4];
    nn::Grads trunk;

    static AgentGrads zeros_like(const AgentNet& n) {
        AgentGrads g;
        for (int i = 0; i < 4; ++i) g.embed[i] = nn::Grads::zeros_like(n.embed[i]);
        g.trunk = nn::Grads::zeros_like(n.trunk);
        return g;
    }
    void add(const AgentGrads& o) {
        for (int i = 0; i < 4; ++i) embed[i].add(o.embed[i]);
        trunk.add(o.trunk);
    }
    void scale(double s) {
        for (int i = 0; i < 4; ++i) embed[i].scale(s);
        trunk.scale(s);
    }
};

inline void agent_backward(const DecoderPolicy& p, Agent a, const AgentTrace& t,
                           const Vec& dq, AgentGrads& g) {
    const AgentNet& net = p.net(a);
    const auto lays = p.layouts(a);
    const int E = p.arch.embed_dim;
    nn::dense_backward(net.trunk, t.trunk, dq, g.trunk);
    for (int slot = 0; slot < 4; ++slot) {
        const bool active = (slot < 2) || t.gated;
        if (!active) continue;
        Vec up(E);
        std::copy(g.trunk.dinput.begin() + slot * E, g.trunk.dinput.begin() + (slot + 1) * E,
                  up.begin());
        detail::embed_channel_backward(net.embed[slot], *lays[slot], t.ch[slot], up,
                                       g.embed[slot]);
    }
}

// ---- mixer ----

struct MixerEval {
    Vec w1_raw, b1, w2_raw, b2;  // hypernet outputs
    nn::Trace tr_w1, tr_b1, tr_w2, tr_b2;
    Vec pre, h;  // hidden layer
    double f = 0.0;
    double qx = 0.0, qz = 0.0;
};

// f(qx,qz; w(s)): one sigmoid hidden layer whose weights are abs() of
// hypernetwork outputs, making f monotone nondecreasing in qx and qz.
inline void mixer_forward(const DecoderPolicy& p, const Vec& sbits, double qx, double qz,
                          MixerEval& ev) {
    const int M = p.arch.mixer_hidden;
    ev.w1_raw = nn::dense_forward(p.mixer.hyper_w1, sbits, &ev.tr_w1);
    ev.b1 = nn::dense_forward(p.mixer.hyper_b1, sbits, &ev.tr_b1);
    ev.w2_raw = nn::dense_forward(p.mixer.hyper_w2, sbits, &ev.tr_w2);
    ev.b2 = nn::dense_forward(p.mixer.hyper_b2, sbits, &ev.tr_b2);
    ev.qx = qx;
    ev.qz = qz;
    ev.pre.resize(M);
    ev.h.resize(M);
    double f = ev.b2[0];
    for (int i = 0; i < M; ++i) {
        const double w_qx = std::abs(ev.w1_raw[2 * i]);
        const double w_qz = std::abs(ev.w1_raw[2 * i + 1]);
        ev.pre[i] = w_qx * qx + w_qz * qz + ev.b1[i];
        ev.h[i] = 1.0 / (1.0 + std::exp(-ev.pre[i]));
        f += std::abs(ev.w2_raw[i]) * ev.h[i];
    }
    ev.f = f;
}

struct MixerGrads {
    nn::Grads hyper_w1, hyper_b1, hyper_w2, hyper_b2;

    static MixerGrads zeros_like(const MixerNet& m) {
        return {nn::Grads::zeros_like(m.hyper_w1), nn::Grads::zeros_like(m.hyper_b1),
                nn::Grads::zeros_like(m.hyper_w2), nn::Grads::zeros_like(m.hyper_b2)};
    }
    void add(const MixerGrads& o) {
        hyper_w1.add(o.hyper_w1);
        hyper_b1.add(o.hyper_b1);
        hyper_w2.add(o.hyper_w2);
        hyper_b2.add(o.hyper_b2);
    }
    void scale(double s) {
        hyper_w1.scale(s);
        hyper_b1.scale(s);
        hyper_w2.scale(s);
        hyper_b2.scale(s);
    }
};

// df = dJ/df. Returns dJ/dqx, dJ/dqz through the mixer path and accumulates
// hypernetwork gradients.
inline void mixer_backward(const DecoderPolicy& p, const MixerEval& ev, double df,
                           MixerGrads& g, double& dqx, double& dqz) {
    const int M = p.arch.mixer_hidden;
    const auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    Vec d_w1(2 * static_cast<size_t>(M), 0.0), d_b1(M, 0.0), d_w2(M, 0.0), d_b2(1, df);
    dqx = 0.0;
    dqz = 0.0;
    for (int i = 0; i < M; ++i) {
        const double w2 = std::abs(ev.w2_raw[i]);
        const double dh = df * w2;
        const double dpre = dh * ev.h[i] * (1.0 - ev.h[i]);
        const double w_qx = std::abs(ev.w1_raw[2 * i]);
        const double w_qz = std::abs(ev.w1_raw[2 * i + 1]);
        dqx += dpre * w_qx;
        dqz += dpre * w_qz;
        d_w2[i] = df * ev.h[i] * sign(ev.w2_raw[i]);
        d_b1[i] = dpre;
        d_w1[2 * i] = dpre * ev.qx * sign(ev.w1_raw[2 * i]);
        d_w1[2 * i + 1] = dpre * ev.qz * sign(ev.w1_raw[2 * i + 1]);
    }
    nn::dense_backward(p.mixer.hyper_w1, ev.tr_w1, d_w1, g.hyper_w1);
    nn::dense_backward(p.mixer.hyper_b1, ev.tr_b1, d_b1, g.hyper_b1);
    nn::dense_backward(p.mixer.hyper_w2, ev.tr_w2, d_w2, g.hyper_w2);
    nn::dense_backward(p.mixer.hyper_b2, ev.tr_b2, d_b2, g.hyper_b2);
}

// ---- joint value ----

struct QtotEval {
    SynergyEval syn;
    MixerEval mix;
    double qtot = 0.0;
};

inline double mix_qtot_value(const DecoderPolicy& p, const Vec& sbits, double qx, double qz,
                             QtotEval* ev_out = nullptr) {
    QtotEval local;
    QtotEval& ev = ev_out ? *ev_out : local;
    ev.syn = synergy_eval(p, sbits);
    mixer_forward(p, sbits, qx, qz, ev.mix);
    const double lam = ev.syn.lambda;
    ev.qtot = (1.0 - lam) * (qx + qz) + lam * ev.mix.f;
    return ev.qtot;
}

inline double mix_qtot(const DecoderPolicy& p, const Syndrome& s, double qx, double qz) {
    return mix_qtot_value(p, syndrome_input(s), qx, qz);
}

struct PolicyGrads {
    AgentGrads agent_x, agent_z;
    nn::Grads synergy;
    MixerGrads mixer;

    static PolicyGrads zeros_like(const DecoderPolicy& p) {
        return {AgentGrads::zeros_like(p.agent_x), AgentGrads::zeros_like(p.agent_z),
                nn::Grads::zeros_like(p.synergy), MixerGrads::zeros_like(p.mixer)};
    }
    void add(const PolicyGrads& o) {
        agent_x.add(o.agent_x);
        agent_z.add(o.agent_z);
        synergy.add(o.synergy);
        mixer.add(o.mixer);
    }
    void scale(double s) {
        agent_x.scale(s);
        agent_z.scale(s);
        synergy.scale(s);
        mixer.scale(s);
    }
};

// Backward through Q_tot. dqtot = dJ/dQ_tot; dlambda_extra adds a direct
// dJ/dlambda term (synergy regularizer). Outputs dJ/dqx, dJ/dqz for the
// agent backward passes and accumulates synergy + mixer grads.
// lambda_from_value=false treats the synergy score as a fixed input of the
// value: only dlambda_extra reaches the synergy network then, which is how
// the TD loss is trained (the score itself learns from the alignment target,
// not from whichever mixing ratio happens to fit Q_tot best).
inline void qtot_backward(const DecoderPolicy& p, const QtotEval& ev, double dqtot,
                          double dlambda_extra, PolicyGrads& g, double& dqx, double& dqz,
                          bool lambda_from_value = true) {
    const double lam = ev.syn.lambda;
    const double qx = ev.mix.qx, qz = ev.mix.qz;
    double mix_dqx = 0.0, mix_dqz = 0.0;
    mixer_backward(p, ev.mix, dqtot * lam, g.mixer, mix_dqx, mix_dqz);
    dqx = dqtot * (1.0 - lam) + mix_dqx;
    dqz = dqtot * (1.0 - lam) + mix_dqz;
    const double dlam =
        (lambda_from_value ? dqtot * (ev.mix.f - (qx + qz)) : 0.0) + dlambda_extra;
    if (!ev.syn.pinned && dlam != 0.0)
        nn::dense_backward(p.synergy, ev.syn.trace, Vec{dlam}, g.synergy);
}

// ---- parameter traversal ----

enum class ParamGroup { agents, synergy, mixer };

// fixed traversal order shared by optimizer state, gradient containers, and
// finite-difference sweeps: agent_x (4 embedders, trunk), agent_z likewise,
// synergy, mixer hypernets (w1, b1, w2, b2)
template <class P, class F>
void for_each_mlp(P& p, F&& f) {
    auto agent = [&](auto& a) {
        for (auto& e : a.embed) f(e, ParamGroup::agents);
        f(a.trunk, ParamGroup::agents);
    };
    agent(p.agent_x);
    agent(p.agent_z);
    f(p.synergy, ParamGroup::synergy);
    f(p.mixer.hyper_w1, ParamGroup::mixer);
    f(p.mixer.hyper_b1, ParamGroup::mixer);
    f(p.mixer.hyper_w2, ParamGroup::mixer);
    f(p.mixer.hyper_b2, ParamGroup::mixer);
}

template <class G, class F>
void for_each_grads(G& g, F&& f) {
    auto agent = [&](auto& a) {
        for (auto& e : a.embed) f(e, ParamGroup::agents);
        f(a.trunk, ParamGroup::agents);
    };
    agent(g.agent_x);
    agent(g.agent_z);
    f(g.synergy, ParamGroup::synergy);
    f(g.mixer.hyper_w1, ParamGroup::mixer);
    f(g.mixer.hyper_b1, ParamGroup::mixer);
    f(g.mixer.hyper_w2, ParamGroup::mixer);
    f(g.mixer.hyper_b2, ParamGroup::mixer);
}

// ---- action selection ----

inline int argmax_lowest(const Vec& q) {
    int best = 0;
    for (size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = static_cast<int>(i);
    return best;
}

struct JointAction {
    int ax = 0;
    int az = 0;
};

// Epsilon-greedy per agent; the X agent consumes randomness first. Greedy
// ties resolve to the lowest action index.
inline JointAction select_actions(const DecoderPolicy& p, const ObservationChannels& obs,
                                  bool gated, double eps, Rng& rng) {
    JointAction act;
    const auto pick = [&](Agent a) {
        const double u = rng.u01();
        if (u < eps) return static_cast<int>(rng.below(p.actions()));
        return argmax_lowest(agent_q_values(p, a, obs, gated));
    };
    act.ax = pick(Agent::x);
    act.az = pick(Agent::z);
    return act;
}

// ---- transfer across code distances ----

namespace detail {

// column-wise transfer of an input layer split into (sx | sz) sections
inline nn::DenseLayer transfer_input_layer(const nn::DenseLayer& src, int src_sx, int src_sz,
                                           int tgt_sx, int tgt_sz, double noise_std, Rng& rng) {
    assert(src.in_dim() == src_sx + src_sz);
    nn::DenseLayer out(tgt_sx + tgt_sz, src.out_dim(), src.act);
    out.b = src.b;
    const int R = src.out_dim();
    for (int r = 0; r < R; ++r) {
        // section means over source columns
        double mean_sx = 0.0, mean_sz = 0.0;
        for (int c = 0; c < src_sx; ++c) mean_sx += src.w.at(r, c);
        for (int c = 0; c < src_sz; ++c) mean_sz += src.w.at(r, src_sx + c);
        if (src_sx > 0) mean_sx /= src_sx;
        if (src_sz > 0) mean_sz /= src_sz;
        for (int c = 0; c < tgt_sx; ++c)
            out.w.at(r, c) = c < src_sx ? src.w.at(r, c) : mean_sx + noise_std * rng.normal();
        for (int c = 0; c < tgt_sz; ++c)
            out.w.at(r, tgt_sx + c) = c < src_sz ? src.w.at(r, src_sx + c)
                                                 : mean_sz + noise_std * rng.normal();
    }
    return out;
}

// row-wise transfer of a Q head: flip rows copied by index, new flip rows
// tiled from the mean source flip row, HALT row mapped to the HALT slot
inline nn::DenseLayer transfer_q_head(const nn::DenseLayer& src, int src_n, int tgt_n,
                                      double noise_std, Rng& rng) {
    assert(src.out_dim() == src_n + 1);
    nn::DenseLayer out(src.in_dim(), tgt_n + 1, src.act);
    const int in = src.in_dim();
    Vec mean_row(in, 0.0);
    double mean_bias = 0.0;
    for (int r = 0; r < src_n; ++r) {
        for (int c = 0; c < in; ++c) mean_row[c] += src.w.at(r, c);
        mean_bias += src.b[r];
    }
    for (auto& v : mean_row) v /= src_n;
    mean_bias /= src_n;
    for (int r = 0; r < tgt_n; ++r) {
        if (r < src_n) {
            for (int c = 0; c < in; ++c) out.w.at(r, c) = src.w.at(r, c);
            out.b[r] = src.b[r];
        } else {
            for (int c = 0; c < in; ++c) out.w.at(r, c) = mean_row[c] + noise_std * rng.normal();
            out.b[r] = mean_bias + noise_std * rng.normal();
        }
    }
    for (int c = 0; c < in; ++c) out.w.at(tgt_n, c) = src.w.at(src_n, c);
    out.b[tgt_n] = src.b[src_n];
    return out;
}

}  // namespace detail

// Initialize a policy for tgt from one trained on another distance of the
// same family: group embedders and size-independent trunk layers are copied
// verbatim; size-dependent pieces (Q-head rows for new actions, the
// syndrome-facing input columns of the synergy and mixer hypernetworks) are
// tiled from source section means plus N(0, 1e-3) noise. Identical source
// and target shapes transfer without noise and reproduce the source policy
// exactly.
inline DecoderPolicy transfer_init(const DecoderPolicy& src, const CodeInstance& tgt,
                                   uint64_t seed) {
    if (tgt.family != src.binding.family)
        throw std::invalid_argument("transfer_init: code family mismatch");
    DecoderPolicy p = make_policy(tgt, seed, src.arch);
    const bool same_shape = p.n == src.n && p.sx_checks == src.sx_checks &&
                            p.sz_checks == src.sz_checks &&
                            p.lay_x_local.checks == src.lay_x_local.checks &&
                            p.lay_x_remote.checks == src.lay_x_remote.checks &&
                            p.lay_z_local.checks == src.lay_z_local.checks &&
                            p.lay_z_remote.checks == src.lay_z_remote.checks;
    const double noise = same_shape ? 0.0 : 1e-3;
    Rng rng = make_stream(seed, StreamPurpose::transfer_noise, 0);

    auto move_agent = [&](const AgentNet& s, AgentNet& d) {
        for (int i = 0; i < 4; ++i) d.embed[i] = s.embed[i];
        d.trunk.layers[0] = s.trunk.layers[0];
        d.trunk.layers[1] = s.trunk.layers[1];
        d.trunk.layers[2] = detail::transfer_q_head(s.trunk.layers[2], src.n, p.n, noise, rng);
    };
    move_agent(src.agent_x, p.agent_x);
    move_agent(src.agent_z, p.agent_z);

    p.synergy.layers[0] = detail::transfer_input_layer(
        src.synergy.layers[0], src.sx_checks, src.sz_checks, p.sx_checks, p.sz_checks, noise, rng);
    p.synergy.layers[1] = src.synergy.layers[1];
    p.synergy.layers[2] = src.synergy.layers[2];

    auto move_hyper = [&](const nn::Mlp& s, nn::Mlp& d) {
        d.layers[0] = detail::transfer_input_layer(s.layers[0], src.sx_checks, src.sz_checks,
                                                   p.sx_checks, p.sz_checks, noise, rng);
    };
    move_hyper(src.mixer.hyper_w1, p.mixer.hyper_w1);
    move_hyper(src.mixer.hyper_b1, p.mixer.hyper_b1);
    move_hyper(src.mixer.hyper_w2, p.mixer.hyper_w2);
    move_hyper(src.mixer.hyper_b2, p.mixer.hyper_b2);

    p.lambda_pin = src.lambda_pin;
    p.seed = seed;
    p.epoch = 0;
    return p;
}

// ---- checkpoint io ----

inline json policy_to_json(const DecoderPolicy& p) {
    json meta{{"code_family", code::family_name(p.binding.family)},
              {"code_distance", p.binding.distance},
              {"seed", p.seed},
              {"epoch", p.epoch}};
    if (p.binding.family == code::CodeFamily::truebb) {
        meta["bb_l"] = p.binding.bb_l;
        meta["bb_m"] = p.binding.bb_m;
        auto poly = [](const std::vector<code::Monomial>& v) {
            json a = json::array();
            for (const auto& t : v) a.push_back(json::array({t.i, t.j}));
            return a;
        };
        meta["poly_a"] = poly(p.binding.poly_a);
        meta["poly_b"] = poly(p.binding.poly_b);
    }
    json arch{{"embed_dim", p.arch.embed_dim},
              {"trunk_hidden", p.arch.trunk_hidden},
              {"trunk_feat", p.arch.trunk_feat},
              {"synergy_h1", p.arch.synergy_h1},
              {"synergy_h2", p.arch.synergy_h2},
              {"mixer_hidden", p.arch.mixer_hidden},
              {"group_local", p.arch.group_local},
              {"group_remote", p.arch.group_remote},
              {"n", p.n},
              {"sx_checks", p.sx_checks},
              {"sz_checks", p.sz_checks}};
    if (p.lambda_pin)
        arch["lambda_pin"] = *p.lambda_pin;
    else
        arch["lambda_pin"] = nullptr;
    auto agent = [](const AgentNet& a) {
        return json{{"embed_own_local", nn::mlp_to_json(a.embed[0])},
                    {"embed_own_remote", nn::mlp_to_json(a.embed[1])},
                    {"embed_cross_local", nn::mlp_to_json(a.embed[2])},
                    {"embed_cross_remote", nn::mlp_to_json(a.embed[3])},
                    {"trunk", nn::mlp_to_json(a.trunk)}};
    };
    return json{{"format", "synqec-policy-v1"},
                {"metadata", meta},
                {"architecture", arch},
                {"networks",
                 json{{"agent_x", agent(p.agent_x)},
                      {"agent_z", agent(p.agent_z)},
                      {"synergy", nn::mlp_to_json(p.synergy)},
                      {"mixer",
                       json{{"hyper_w1", nn::mlp_to_json(p.mixer.hyper_w1)},
                            {"hyper_b1", nn::mlp_to_json(p.mixer.hyper_b1)},
                            {"hyper_w2", nn::mlp_to_json(p.mixer.hyper_w2)},
                            {"hyper_b2", nn::mlp_to_json(p.mixer.hyper_b2)}}}}}};
}

inline DecoderPolicy policy_from_json(const json& j) {
    if (j.at("format").get<std::string>() != "synqec-policy-v1")
        throw std::invalid_argument("unknown checkpoint format");
    const json& meta = j.at("metadata");
    CodeBinding b;
    const std::string fam = meta.at("code_family").get<std::string>();
    b.family = fam == "truebb" ? code::CodeFamily::truebb : code::CodeFamily::toycss;
    b.distance = meta.at("code_distance").get<int>();
    if (b.family == code::CodeFamily::truebb) {
        b.bb_l = meta.at("bb_l").get<int>();
        b.bb_m = meta.at("bb_m").get<int>();
        for (const auto& t : meta.at("poly_a")) b.poly_a.push_back({t[0].get<int>(), t[1].get<int>()});
        for (const auto& t : meta.at("poly_b")) b.poly_b.push_back({t[0].get<int>(), t[1].get<int>()});
    }
    const CodeInstance c = b.build();

    const json& arch = j.at("architecture");
    Arch a;
    a.embed_dim = arch.at("embed_dim").get<int>();
    a.trunk_hidden = arch.at("trunk_hidden").get<int>();
    a.trunk_feat = arch.at("trunk_feat").get<int>();
    a.synergy_h1 = arch.at("synergy_h1").get<int>();
    a.synergy_h2 = arch.at("synergy_h2").get<int>();
    a.mixer_hidden = arch.at("mixer_hidden").get<int>();
    a.group_local = arch.at("group_local").get<int>();
    a.group_remote = arch.at("group_remote").get<int>();

    DecoderPolicy p = make_policy(c, meta.at("seed").get<uint64_t>(), a);
    p.epoch = meta.at("epoch").get<int>();
    if (arch.at("n").get<int>() != p.n || arch.at("sx_checks").get<int>() != p.sx_checks ||
        arch.at("sz_checks").get<int>() != p.sz_checks)
        throw std::invalid_argument("checkpoint shape does not match rebuilt code");
    if (!arch.at("lambda_pin").is_null()) p.lambda_pin = arch.at("lambda_pin").get<double>();

    const json& nets = j.at("networks");
    auto load_agent = [](const json& aj, AgentNet& out) {
        out.embed[0] = nn::mlp_from_json(aj.at("embed_own_local"));
        out.embed[1] = nn::mlp_from_json(aj.at("embed_own_remote"));
        out.embed[2] = nn::mlp_from_json(aj.at("embed_cross_local"));
        out.embed[3] = nn::mlp_from_json(aj.at("embed_cross_remote"));
        out.trunk = nn::mlp_from_json(aj.at("trunk"));
    };
    load_agent(nets.at("agent_x"), p.agent_x);
    load_agent(nets.at("agent_z"), p.agent_z);
    p.synergy = nn::mlp_from_json(nets.at("synergy"));
    p.mixer.hyper_w1 = nn::mlp_from_json(nets.at("mixer").at("hyper_w1"));
    p.mixer.hyper_b1 = nn::mlp_from_json(nets.at("mixer").at("hyper_b1"));
    p.mixer.hyper_w2 = nn::mlp_from_json(nets.at("mixer").at("hyper_w2"));
    p.mixer.hyper_b2 = nn::mlp_from_json(nets.at("mixer").at("hyper_b2"));
    return p;
}

}  // namespace synqec::policy
