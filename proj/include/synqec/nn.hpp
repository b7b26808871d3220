#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/rng.hpp"

// Minimal dense-network kernel: f64 everywhere, row-major weights,
// activations restricted to {identity, relu, sigmoid}. Training is plain
// backprop + Adam. A finite-difference harness cross-checks every analytic
// gradient; callers must filter inputs that sit on a relu kink before
// trusting the comparison.

namespace synqec::nn {

using json = nlohmann::json;
using Vec = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data;  // row-major, rows*cols

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

enum class Activation { identity, relu, sigmoid };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

inline double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

// derivative expressed through the post-activation value where convenient
inline double act_deriv(Activation a, double pre, double post) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return post * (1.0 - post);
    }
    return 1.0;
}

struct DenseLayer {
    Matrix w;  // out x in
    Vec b;     // out
    Activation act = Activation::identity;

    DenseLayer() = default;
    DenseLayer(int in, int out, Activation a) : w(out, in), b(out, 0.0), act(a) {}

    int in_dim() const { return w.cols; }
    int out_dim() const { return w.rows; }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    int in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    int out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
    size_t param_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.w.data.size() + l.b.size();
        return n;
    }
};

// He-style init for relu trunks, scaled uniform otherwise.
inline void init_layer(DenseLayer& l, Rng& rng, double scale = 1.0) {
    const double std = scale * std::sqrt(2.0 / std::max(1, l.in_dim()));
    for (auto& v : l.w.data) v = std * rng.normal();
    for (auto& v : l.b) v = 0.0;
}

struct Trace {
    Vec input;
    std::vector<Vec> pre;   // per layer
    std::vector<Vec> post;  // per layer
};

inline void dense_forward_layer(const DenseLayer& l, const Vec& x, Vec& pre, Vec& post) {
    assert(static_cast<int>(x.size()) == l.in_dim());
    const int out = l.out_dim(), in = l.in_dim();
    pre.resize(out);
    post.resize(out);
    for (int r = 0; r < out; ++r) {
        const double* wr = &l.w.data[static_cast<size_t>(r) * in];
        double acc = l.b[r];
        for (int c = 0; c < in; ++c) acc += wr[c] * x[c];
        pre[r] = acc;
        post[r] = apply_act(l.act, acc);
    }
}

inline Vec dense_forward(const Mlp& m, const Vec& x, Trace* trace = nullptr) {
    Vec cur = x;
    if (trace) {
        trace->input = x;
        trace->pre.resize(m.layers.size());
        trace->post.resize(m.layers.size());
    }
    Vec pre, post;
    for (size_t i = 0; i < m.layers.size(); ++i) {
        dense_forward_layer(m.layers[i], cur, pre, post);
        if (trace) {
            trace->pre[i] = pre;
            trace->post[i] = post;
        }
        cur = post;
    }
    return cur;
}

struct Grads {
    std::vector<Matrix> dw;
    std::vector<Vec> db;
    Vec dinput;

    static Grads zeros_like(const Mlp& m) {
        Grads g;
        g.dw.reserve(m.layers.size());
        g.db.reserve(m.layers.size());
        for (const auto& l : m.layers) {
            g.dw.emplace_back(l.w.rows, l.w.cols);
            g.db.emplace_back(l.b.size(), 0.0);
        }
        g.dinput.assign(m.in_dim(), 0.0);
        return g;
    }

    void add(const Grads& o) {
        for (size_t i = 0; i < dw.size(); ++i) {
            for (size_t j = 0; j < dw[i].data.size(); ++j) dw[i].data[j] += o.dw[i].data[j];
            for (size_t j = 0; j < db[i].size(); ++j) db[i][j] += o.db[i][j];
        }
    }

    void scale(double s) {
        for (auto& m : dw)
            for (auto& v : m.data) v *= s;
        for (auto& b : db)
            for (auto& v : b) v *= s;
    }
};

// upstream = dJ/d(output). Accumulates into g (which must be zeros_like or a
// previous accumulation); returns dJ/d(input) in g.dinput (overwritten).
inline void dense_backward(const Mlp& m, const Trace& t, const Vec& upstream, Grads& g) {
    assert(static_cast<int>(upstream.size()) == m.out_dim());
    Vec delta = upstream;
    for (int li = static_cast<int>(m.layers.size()) - 1; li >= 0; --li) {
        const DenseLayer& l = m.layers[li];
        const Vec& x = (li == 0) ? t.input : t.post[li - 1];
        const int out = l.out_dim(), in = l.in_dim();
        // delta through activation
        for (int r = 0; r < out; ++r) delta[r] *= act_deriv(l.act, t.pre[li][r], t.post[li][r]);
        Matrix& dw = g.dw[li];
        Vec& db = g.db[li];
        for (int r = 0; r < out; ++r) {
            const double d = delta[r];
            db[r] += d;
            double* dwr = &dw.data[static_cast<size_t>(r) * in];
            for (int c = 0; c < in; ++c) dwr[c] += d * x[c];
        }
        Vec next(in, 0.0);
        for (int r = 0; r < out; ++r) {
            const double d = delta[r];
            const double* wr = &l.w.data[static_cast<size_t>(r) * in];
            for (int c = 0; c < in; ++c) next[c] += d * wr[c];
        }
        delta = std::move(next);
    }
    g.dinput = delta;
}

struct AdamState {
    std::vector<Matrix> mw, vw;
    std::vector<Vec> mb, vb;
    int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 0.0;  // rate this state is driven at; recorded on every step

    static AdamState zeros_like(const Mlp& m) {
        AdamState s;
        for (const auto& l : m.layers) {
            s.mw.emplace_back(l.w.rows, l.w.cols);
            s.vw.emplace_back(l.w.rows, l.w.cols);
            s.mb.emplace_back(l.b.size(), 0.0);
            s.vb.emplace_back(l.b.size(), 0.0);
        }
        return s;
    }
};

inline bool grads_finite(const Grads& g) {
    for (const auto& m : g.dw)
        for (double v : m.data)
            if (!std::isfinite(v)) return false;
    for (const auto& b : g.db)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

// One Adam update. Returns false (and leaves everything untouched) if any
// gradient entry is non-finite.
inline bool adam_step(Mlp& m, const Grads& g, AdamState& s, double lr) {
    if (!grads_finite(g)) return false;
    s.t += 1;
    s.lr = lr;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    auto update = [&](double& p, double grad, double& mo, double& vo) {
        mo = s.beta1 * mo + (1.0 - s.beta1) * grad;
        vo = s.beta2 * vo + (1.0 - s.beta2) * grad * grad;
        const double mhat = mo / bc1;
        const double vhat = vo / bc2;
        p -= lr * mhat / (std::sqrt(vhat) + s.eps);
    };
    for (size_t li = 0; li < m.layers.size(); ++li) {
        DenseLayer& l = m.layers[li];
        for (size_t j = 0; j < l.w.data.size(); ++j)
            update(l.w.data[j], g.dw[li].data[j], s.mw[li].data[j], s.vw[li].data[j]);
        for (size_t j = 0; j < l.b.size(); ++j)
            update(l.b[j], g.db[li][j], s.mb[li][j], s.vb[li][j]);
    }
    return true;
}

// True if any relu preactivation sits within eps of its kink; finite
// differences are unreliable for such samples and the caller should redraw.
inline bool near_relu_kink(const Mlp& m, const Trace& t, double eps = 1e-3) {
    for (size_t li = 0; li < m.layers.size(); ++li) {
        if (m.layers[li].act != Activation::relu) continue;
        for (double p : t.pre[li])
            if (std::abs(p) < eps) return true;
    }
    return false;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    bool kink_excluded = false;  // sample rejected by the kink filter
};

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

// Central finite differences over every parameter of m against the analytic
// gradient of J = sum(upstream[i] * output[i]).
inline GradCheckResult grad_check(Mlp& m, const Vec& x, const Vec& upstream, double h = 1e-5,
                                  double kink_eps = 1e-3) {
    GradCheckResult result;
    Trace t;
    dense_forward(m, x, &t);
    if (near_relu_kink(m, t, kink_eps)) {
        result.kink_excluded = true;
        return result;
    }
    Grads g = Grads::zeros_like(m);
    dense_backward(m, t, upstream, g);

    auto eval = [&]() {
        const Vec y = dense_forward(m, x);
        double j = 0.0;
        for (size_t i = 0; i < y.size(); ++i) j += upstream[i] * y[i];
        return j;
    };
    auto probe = [&](double& p, double analytic) {
        const double save = p;
        p = save + h;
        const double jp = eval();
        p = save - h;
        const double jm = eval();
        p = save;
        const double fd = (jp - jm) / (2.0 * h);
        result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd));
    };
    for (size_t li = 0; li < m.layers.size(); ++li) {
        DenseLayer& l = m.layers[li];
        for (size_t j = 0; j < l.w.data.size(); ++j) probe(l.w.data[j], g.dw[li].data[j]);
        for (size_t j = 0; j < l.b.size(); ++j) probe(l.b[j], g.db[li][j]);
    }
    return result;
}

// ---- checkpoint serialization ----
// Layout: {"layers": [{"rows", "cols", "weights", "bias", "activation"}, ...]}
// Doubles survive the JSON round trip bit-exactly (shortest decimal encoding
// that reparses to the identical f64).

inline json layer_to_json(const DenseLayer& l) {
    return json{{"rows", l.w.rows},
                {"cols", l.w.cols},
                {"weights", l.w.data},
                {"bias", l.b},
                {"activation", activation_name(l.act)}};
}

inline DenseLayer layer_from_json(const json& j) {
    DenseLayer l;
    l.w.rows = j.at("rows").get<int>();
    l.w.cols = j.at("cols").get<int>();
    l.w.data = j.at("weights").get<Vec>();
    l.b = j.at("bias").get<Vec>();
    l.act = activation_from_name(j.at("activation").get<std::string>());
    if (l.w.data.size() != static_cast<size_t>(l.w.rows) * l.w.cols)
        throw std::invalid_argument("layer weight size mismatch");
    if (l.b.size() != static_cast<size_t>(l.w.rows))
        throw std::invalid_argument("layer bias size mismatch");
    return l;
}

inline json mlp_to_json(const Mlp& m) {
    json layers = json::array();
    for (const auto& l : m.layers) layers.push_back(layer_to_json(l));
    return json{{"layers", layers}};
}

inline Mlp mlp_from_json(const json& j) {
    Mlp m;
    for (const auto& lj : j.at("layers")) m.layers.push_back(layer_from_json(lj));
    for (size_t i = 1; i < m.layers.size(); ++i)
        if (m.layers[i].in_dim() != m.layers[i - 1].out_dim())
            throw std::invalid_argument("layer dimension chain mismatch");
    return m;
}

}  // namespace synqec::nn
