// End-to-end acceptance run. Each numbered block prints one [PASS]/[FAIL]
// line; the process exits nonzero if any block fails. Blocks 7-9 share the
// two desk-scale training runs, so the whole binary takes a few minutes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "synqec/evalharness.hpp"
#include "synqec/refdec.hpp"

using namespace synqec;
using code::CodeInstance;
using policy::Agent;
using policy::DecoderPolicy;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& text) {
    std::printf("[%s] %02d %s\n", ok ? "PASS" : "FAIL", idx, text.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

policy::Arch small_arch() {
    policy::Arch a;
    a.embed_dim = 4;
    a.trunk_hidden = 8;
    a.trunk_feat = 6;
    a.synergy_h1 = 4;
    a.synergy_h2 = 3;
    a.mixer_hidden = 3;
    return a;
}

template <class P, class F>
void walk_params(P& p, F&& f) {
    policy::for_each_mlp(p, [&](auto& m, policy::ParamGroup) {
        for (auto& l : m.layers) {
            for (auto& v : l.w.data) f(v);
            for (auto& v : l.b) f(v);
        }
    });
}

std::vector<double> flatten_grads(policy::PolicyGrads& g) {
    std::vector<double> out;
    policy::for_each_grads(g, [&](nn::Grads& gr, policy::ParamGroup) {
        for (size_t li = 0; li < gr.dw.size(); ++li) {
            out.insert(out.end(), gr.dw[li].data.begin(), gr.dw[li].data.end());
            out.insert(out.end(), gr.db[li].begin(), gr.db[li].end());
        }
    });
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return "<missing:" + path + ">";
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

char buf[512];

// ---- 1: analytic scaling table ----

bool scaling_table_exact() {
    const auto rows = dist::speedup_table();
    if (rows.size() != 4) return false;
    const int ds[] = {5, 7, 9, 11};
    const int dims[] = {25, 49, 81, 121};
    const double single[] = {0.85, 1.33, 1.97, 2.77};
    const double two[] = {0.65, 0.89, 1.21, 1.61};
    const double speedup[] = {1.31, 1.49, 1.63, 1.72};
    const double overhead[] = {7.7, 5.6, 4.1, 3.1};
    const char* display[] = {"12.8K", "25.1K", "41.5K", "61.9K"};
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
        ok = ok && rows[i].d == ds[i] && rows[i].dim == dims[i];
        ok = ok && rows[i].single_ms == single[i] && rows[i].dist_ms == two[i];
        ok = ok && rows[i].speedup == speedup[i];
        ok = ok && rows[i].comm_overhead_pct == overhead[i];
        ok = ok && rows[i].params_display == display[i];
    }
    return ok && dist::mean_speedup(rows) == 1.54;
}

// ---- 2: transmission fidelity ----

bool fidelity_surface_ok() {
    bool ok = std::abs(hw::fidelity(1.0, 10.0) - 0.94) <= 1e-12 &&
              std::abs(hw::fidelity(0.0, 0.0) - 0.50) <= 1e-12 &&
              std::abs(hw::fidelity(0.5, 5.0) - 0.72) <= 1e-12;
    std::vector<double> prev_row;
    for (int li = 0; li <= 100 && ok; ++li) {
        const double lam = li / 100.0;
        std::vector<double> row(101);
        for (int ti = 0; ti <= 100; ++ti) {
            const double tau = ti / 10.0;
            const double f = hw::fidelity(lam, tau);
            row[ti] = f;
            ok = ok && f >= 0.45 - 1e-12 && f <= 0.99 + 1e-12;
            if (ti > 0) ok = ok && row[ti] <= row[ti - 1] + 1e-12;       // worse with delay
            if (li > 0) ok = ok && f >= prev_row[ti] - 1e-12;            // better with coupling
        }
        prev_row = std::move(row);
    }
    return ok;
}

// ---- 3: mixer endpoints and monotonicity ----

bool mixer_value_ok() {
    const auto c = code::build_toy_css(3);
    bool ok = true;
    Rng rng = make_stream(7, StreamPurpose::test_misc, 90);
    for (int trial = 0; trial < 25 && ok; ++trial) {
        auto p = policy::make_policy(c, 200 + trial, small_arch());
        code::PauliError e = code::sample_error(c, 0.25, rng);
        const auto s = code::syndrome_of(c, e);
        const nn::Vec sbits = policy::syndrome_input(s);
        const double qx = rng.uniform(-2.0, 2.0), qz = rng.uniform(-2.0, 2.0);
        policy::MixerEval mev;
        policy::mixer_forward(p, sbits, qx, qz, mev);
        p.lambda_pin = 0.0;
        ok = ok && std::abs(policy::mix_qtot(p, s, qx, qz) - (qx + qz)) <= 1e-12;
        p.lambda_pin = 1.0;
        ok = ok && std::abs(policy::mix_qtot(p, s, qx, qz) - mev.f) <= 1e-12;
    }
    // finite-difference slope in each agent utility, free-running score
    const double h = 1e-3;
    for (int probe = 0; probe < 1000 && ok; ++probe) {
        auto p = policy::make_policy(c, 300 + probe % 10, small_arch());
        code::PauliError e = code::sample_error(c, 0.3, rng);
        const auto s = code::syndrome_of(c, e);
        const double qx = rng.uniform(-2.0, 2.0), qz = rng.uniform(-2.0, 2.0);
        const double base = policy::mix_qtot(p, s, qx, qz);
        ok = ok && policy::mix_qtot(p, s, qx + h, qz) - base >= -1e-9;
        ok = ok && policy::mix_qtot(p, s, qx, qz + h) - base >= -1e-9;
    }
    return ok;
}

// ---- 4: gradient checks ----

bool random_network_gradients_ok() {
    Rng rng = make_stream(7, StreamPurpose::test_misc, 91);
    const nn::Activation acts[] = {nn::Activation::relu, nn::Activation::sigmoid,
                                   nn::Activation::identity};
    int checked = 0;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int in = 2 + static_cast<int>(rng.below(4));
        const int mid = 2 + static_cast<int>(rng.below(5));
        const int out = 1 + static_cast<int>(rng.below(3));
        nn::Mlp m;
        m.layers.push_back(nn::DenseLayer(in, mid, acts[i % 3]));
        m.layers.push_back(nn::DenseLayer(mid, out, acts[(i + 1) % 3]));
        for (auto& l : m.layers) {
            nn::init_layer(l, rng);
            for (auto& b : l.b) b += 0.1 * rng.normal();
        }
        nn::Vec x(in), up(out);
        for (auto& v : x) v = rng.normal();
        for (auto& v : up) v = rng.normal();
        const auto res = nn::grad_check(m, x, up);
        if (res.kink_excluded) continue;
        ++checked;
        worst = std::max(worst, res.max_rel_err);
    }
    return checked >= 60 && worst < 1e-4;
}

bool td_composite_gradient_ok() {
    const auto c = code::build_toy_css(3);
    trainer::TrainConfig cfg;
    double best = 1e9;
    for (uint64_t seed = 61; seed <= 68; ++seed) {
        auto p = policy::make_policy(c, seed, small_arch());
        auto target = policy::make_policy(c, seed + 40, small_arch());
        std::vector<env::Transition> trans, sink;
        Rng rng = make_stream(7, StreamPurpose::test_misc, 92 + seed);
        env::EpisodeOptions opt;
        opt.transitions = &sink;
        for (int i = 0; i < 4; ++i) {
            sink.clear();
            env::run_episode(p, c, 0.08, hw::ideal_config(), 0.4, rng, opt);
            trans.insert(trans.end(), sink.begin(), sink.end());
        }
        if (trans.size() < 4) continue;
        trans.resize(4);
        std::vector<const env::Transition*> batch;
        for (const auto& t : trans) batch.push_back(&t);

        auto g = policy::PolicyGrads::zeros_like(p);
        trainer::td_compute(p, target, c, batch, cfg, g);
        const auto analytic = flatten_grads(g);

        // synergy parameters train on the alignment term only, so difference
        // them against that; everything else against the full loss
        auto loss_at = [&](bool alignment) {
            auto scratch = policy::PolicyGrads::zeros_like(p);
            const auto s = trainer::td_compute(p, target, c, batch, cfg, scratch);
            return alignment ? cfg.reg_weight * s.reg_loss : s.loss;
        };
        const double h = 1e-5;
        double max_err = 0.0;
        size_t idx = 0;
        policy::for_each_mlp(p, [&](nn::Mlp& m, policy::ParamGroup grp) {
            const bool alignment = grp == policy::ParamGroup::synergy;
            for (auto& l : m.layers) {
                auto probe = [&](double& v) {
                    const double keep = v;
                    v = keep + h;
                    const double up = loss_at(alignment);
                    v = keep - h;
                    const double dn = loss_at(alignment);
                    v = keep;
                    max_err =
                        std::max(max_err, nn::rel_err(analytic[idx], (up - dn) / (2.0 * h)));
                    ++idx;
                };
                for (auto& v : l.w.data) probe(v);
                for (auto& v : l.b) probe(v);
            }
        });
        best = std::min(best, max_err);
        if (best < 1e-4) break;
    }
    return best < 1e-4;
}

// ---- 5: code algebra ----

bool code_algebra_ok() {
    bool ok = true;
    const auto tiny = code::build_true_bb(2, 2, {{0, 0}, {1, 0}}, {{0, 0}, {0, 1}});
    const auto big = code::build_true_bb(12, 6, {{3, 0}, {0, 1}, {0, 2}}, {{0, 3}, {1, 0}, {2, 0}});
    const auto t3 = code::build_toy_css(3);
    const auto t5 = code::build_toy_css(5);

    for (const CodeInstance* c : {&tiny, &big, &t3, &t5}) {
        // every X check commutes with every Z check
        for (int r = 0; r < c->hx.rows && ok; ++r)
            for (int q = 0; q < c->hz.rows; ++q)
                ok = ok && !c->hx.row[r].dot(c->hz.row[q]);
        // paired logical bases
        for (size_t i = 0; i < c->logical_x.size() && ok; ++i)
            for (size_t j = 0; j < c->logical_z.size(); ++j)
                ok = ok && c->logical_x[i].dot(c->logical_z[j]) == (i == j);
    }

    ok = ok && big.n == 144 && big.k == 12;
    ok = ok && gf2::rank(big.hx) == 66 && gf2::rank(big.hz) == 66;
    for (int r = 0; r < big.hx.rows && ok; ++r)
        ok = ok && big.hx.row[r].popcount() == 6 && big.hz.row[r].popcount() == 6;
    for (int q = 0; q < big.n && ok; ++q)
        ok = ok && big.hx_col[q].popcount() == 3 && big.hz_col[q].popcount() == 3;

    ok = ok && tiny.n == 8 && tiny.k >= 1;
    for (const auto& lx : tiny.logical_x) {
        code::PauliError e(tiny.n);
        e.x = lx;
        ok = ok && !code::syndrome_of(tiny, e).any() && code::is_logical_failure(tiny, e);
    }
    for (int r = 0; r < tiny.hx.rows && ok; ++r) {
        code::PauliError e(tiny.n);
        e.x = tiny.hx.row[r];
        ok = ok && !code::syndrome_of(tiny, e).any() && !code::is_logical_failure(tiny, e);
    }

    for (const CodeInstance* c : {&t3, &t5}) {
        const int d = c->distance;
        ok = ok && c->n == d * d && c->k == 1;
        ok = ok && c->hx.rows == (d * d - 1) / 2 && c->hz.rows == (d * d - 1) / 2;
        for (int r = 0; r < c->hx.rows && ok; ++r) {
            const int w = c->hx.row[r].popcount();
            ok = ok && (w == 2 || w == 4);
        }
    }
    return ok;
}

// ---- 6: reference decoders ----

bool reference_decoder_ordering_ok() {
    const auto c = code::build_toy_css(3);
    bool ok = true;
    for (double p : {0.005, 0.01, 0.02}) {
        Rng rng = make_stream(7, StreamPurpose::test_misc, 93);
        int oracle_fail = 0, bp_fail = 0;
        for (int i = 0; i < 10000; ++i) {
            const auto truth = code::sample_error(c, p, rng);
            const auto s = code::syndrome_of(c, truth);

            const auto mw = refdec::ml_oracle_decode(c, s, 4);
            if (!mw.found) {
                ++oracle_fail;
            } else {
                code::PauliError res = truth;
                res.x ^= mw.correction.x;
                res.z ^= mw.correction.z;
                ok = ok && !code::syndrome_of(c, res).any();
                oracle_fail += code::is_logical_failure(c, res) ? 1 : 0;
            }

            const auto bp = refdec::bp_decode(c, s, p);
            if (!bp.converged_x || !bp.converged_z) {
                ++bp_fail;
            } else {
                code::PauliError r2 = truth;
                r2.x ^= bp.correction.x;
                r2.z ^= bp.correction.z;
                ok = ok && !code::syndrome_of(c, r2).any();
                bp_fail += code::is_logical_failure(c, r2) ? 1 : 0;
            }
        }
        ok = ok && oracle_fail <= bp_fail;
    }
    return ok;
}

}  // namespace

int main() {
    const auto c3 = code::build_toy_css(3);

    {
        const auto t0 = std::chrono::steady_clock::now();
        const bool ok = scaling_table_exact();
        const double el = seconds_since(t0);
        std::snprintf(buf, sizeof(buf),
                      "two-QPU scaling table matches the published rows bit for bit (%.2fs)", el);
        report(1, ok && el < 1.0, buf);
    }
    {
        const bool ok = fidelity_surface_ok();
        report(2, ok, "transmission fidelity hits frozen points and is monotone on the grid");
    }
    {
        const bool ok = mixer_value_ok();
        report(3, ok, "joint value matches its endpoints and never decreases in agent utility");
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const bool ok = random_network_gradients_ok() && td_composite_gradient_ok();
        const double el = seconds_since(t0);
        std::snprintf(buf, sizeof(buf),
                      "analytic gradients match finite differences at 1e-4 (%.1fs)", el);
        report(4, ok && el < 30.0, buf);
    }
    {
        const auto t0 = std::chrono::steady_clock::now();
        const bool ok = code_algebra_ok();
        const double el = seconds_since(t0);
        std::snprintf(buf, sizeof(buf),
                      "code algebra holds for bicycle and lattice families (%.1fs)", el);
        report(5, ok && el < 10.0, buf);
    }
    {
        const bool ok = reference_decoder_ordering_ok();
        report(6, ok, "exact oracle never loses to belief propagation on failure rate");
    }

    // desk-scale training, shared by the three blocks that follow
    trainer::TrainConfig cfg;
    cfg.seed = 1;
    const auto t_train = std::chrono::steady_clock::now();
    const auto spa = trainer::train_loop(c3, cfg);
    auto qcfg = cfg;
    qcfg.lambda_pin = 1.0;
    const auto qmix = trainer::train_loop(c3, qcfg);
    const double train_s = seconds_since(t_train);

    {
        Rng r_spa = make_stream(cfg.seed, StreamPurpose::final_eval, 0);
        const double spa_s =
            trainer::evaluate_policy(spa.policy, c3, 0.01, hw::ideal_config(), 10000, r_spa)
                .success;
        Rng r_qmix = make_stream(cfg.seed, StreamPurpose::final_eval, 0);
        const double qmix_s =
            trainer::evaluate_policy(qmix.policy, c3, 0.01, hw::ideal_config(), 10000, r_qmix)
                .success;
        const bool ok = spa.best_select >= spa.pretrain_select && spa_s >= 0.80 &&
                        spa_s >= qmix_s - 0.01 && train_s < 600.0;
        std::snprintf(buf, sizeof(buf),
                      "trained decoder reaches targets and coupling is not worse than the "
                      "always-mix ablation (spa=%.4f qmix=%.4f, train %.0fs)",
                      spa_s, qmix_s, train_s);
        report(7, ok, buf);
    }

    eval::StageReports stage_out;
    {
        const auto rep = eval::run_stage1(spa.policy, qmix.policy, c3, 10000, cfg.seed);
        stage_out.s1 = rep;
        const bool spread = rep.hist[0] > 0 && rep.hist[1] > 0 && rep.hist[2] > 0;
        const bool ok = rep.r2.value > 0.5 && spread;
        std::snprintf(buf, sizeof(buf),
                      "synergy score tracks syndrome complexity and uses all buckets "
                      "(r2=%.3f low/mid/high=%.3f/%.3f/%.3f)",
                      rep.r2.value, rep.frac_low, rep.frac_mid, rep.frac_high);
        report(8, ok, buf);
    }
    {
        const auto rep = eval::run_stage2(spa.policy, c3, 10000, cfg.seed);
        stage_out.s2 = rep;
        const bool ok = rep.max_increase_pp <= 2.0 && rep.floor_at_tightest >= 0.5;
        std::snprintf(buf, sizeof(buf),
                      "success degrades gracefully under deadlines "
                      "(worst rise %.2fpp, floor %.3f at 0.5ms)",
                      rep.max_increase_pp, rep.floor_at_tightest);
        report(9, ok, buf);
    }

    {
        trainer::TrainConfig small;
        small.seed = 3;
        small.pretrain_samples = 150;
        small.pretrain_epochs = 3;
        small.batch = 32;
        small.fine_tune_episodes = 48;
        small.episodes_per_epoch = 16;
        small.updates_per_epoch = 4;
        small.select_every = 2;
        small.select_episodes = 60;
        small.hardware = "ideal";

        const std::string da = "acceptance_run_a", db = "acceptance_run_b";
        const auto ra = trainer::train_loop(c3, small, da);
        const auto rb = trainer::train_loop(c3, small, db);
        bool ok = true;
        for (const char* f : {"checkpoint_pretrain.json", "checkpoint_best.json", "curve.csv"})
            ok = ok && slurp(da + "/" + f) == slurp(db + "/" + f);
        ok = ok && policy::policy_to_json(ra.policy).dump() ==
                       policy::policy_to_json(rb.policy).dump();
        const auto repa = eval::run_stage1(ra.policy, ra.policy, c3, 500, small.seed);
        const auto repb = eval::run_stage1(rb.policy, rb.policy, c3, 500, small.seed);
        ok = ok && eval::stage1_to_json(repa).dump() == eval::stage1_to_json(repb).dump();
        std::filesystem::remove_all(da);
        std::filesystem::remove_all(db);
        report(10, ok, "same seed reproduces checkpoints and reports byte for byte");
    }

    if (g_failures == 0) {
        std::printf("all acceptance checks passed\n");
        return 0;
    }
    std::printf("%d acceptance check(s) failed\n", g_failures);
    return 1;
}
