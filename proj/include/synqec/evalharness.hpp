#pragma once

#include <array>
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
#include "synqec/latency.hpp"
#include "synqec/policy.hpp"
#include "synqec/rng.hpp"
#include "synqec/trainer.hpp"

// Three-stage validation harness.
//   Stage 1: decode success of the synergy policy against the always-mix
//            ablation, the synergy-score histogram, and the correlation
//            between lambda and syndrome complexity.
//   Stage 2: success under deadline budgets across the hardware presets,
//            aggregated into a severity-weighted robustness score.
//   Stage 3: the analytic two-QPU scaling table plus zero-shot transfer of a
//            d=5 policy to larger distances against the identity-correction
//            baseline.
// Full-scale reference numbers are carried in the reports for comparison
// only; desk-scale runs are not expected to match them.

namespace synqec::eval {

using code::CodeInstance;
using json = nlohmann::json;
using policy::DecoderPolicy;

// RNG stream counters, one per harness cell
namespace stream_counter {
constexpr uint64_t stage1_spa = 1;
constexpr uint64_t stage1_qmix = 2;
constexpr uint64_t stage2_base = 100;  // + config_index*10 + budget_index
constexpr uint64_t stage3_base = 300;  // + target distance
}  // namespace stream_counter

// ---- correlation ----

struct R2Result {
    double direct = 0.0;        // Sxy^2 / (Sxx*Syy)
    double standardized = 0.0;  // squared mean product of z-scores
    double value = 0.0;
};

// Pearson R^2 computed along two independent routes; both return 0 for a
// zero-variance input
inline R2Result r2_two_ways(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("r2_two_ways: length mismatch");
    R2Result r;
    const size_t n = xs.size();
    if (n < 2) return r;
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return r;
    r.direct = (sxy * sxy) / (sxx * syy);
    const double sdx = std::sqrt(sxx / n), sdy = std::sqrt(syy / n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += ((xs[i] - mx) / sdx) * ((ys[i] - my) / sdy);
    acc /= n;
    r.standardized = acc * acc;
    r.value = r.direct;
    return r;
}

// ---- stage 1 ----

struct Stage1Report {
    double spa_success = 0.0;
    double qmix_success = 0.0;
    std::array<int, 3> hist = {0, 0, 0};  // lambda < 0.2, intermediate, > 0.8
    double frac_low = 0.0, frac_mid = 0.0, frac_high = 0.0;
    R2Result r2;
    int episodes_per_policy = 0;
    std::vector<double> error_rates;
    std::string hardware;
};

inline trainer::EvalSummary pooled_eval(const DecoderPolicy& p, const CodeInstance& c,
                                        const std::vector<double>& rates,
                                        const hw::HardwareConfig& hwc, int n_eval, Rng& rng,
                                        std::vector<env::EpisodeRecord>* records) {
    trainer::EvalSummary total;
    int done = 0;
    for (size_t i = 0; i < rates.size(); ++i) {
        const int quota = i == 0 ? n_eval - static_cast<int>(n_eval / rates.size()) *
                                              (static_cast<int>(rates.size()) - 1)
                                 : static_cast<int>(n_eval / rates.size());
        const auto s = trainer::evaluate_policy(p, c, rates[i], hwc, quota, rng, {}, records);
        total.success += s.success * quota;
        total.mean_lambda += s.mean_lambda * quota;
        total.mean_f_trans += s.mean_f_trans * quota;
        total.mean_reward += s.mean_reward * quota;
        done += quota;
    }
    total.success /= done;
    total.mean_lambda /= done;
    total.mean_f_trans /= done;
    total.mean_reward /= done;
    total.episodes = done;
    return total;
}

inline Stage1Report run_stage1(const DecoderPolicy& spa, const DecoderPolicy& qmix,
                               const CodeInstance& c, int n_eval, uint64_t seed,
                               std::vector<double> rates = {0.005, 0.01, 0.02}) {
    Stage1Report rep;
    rep.error_rates = rates;
    rep.episodes_per_policy = n_eval;
    const hw::HardwareConfig hwc = hw::config_by_name("ideal");
    rep.hardware = hwc.name;

    std::vector<env::EpisodeRecord> recs;
    recs.reserve(n_eval);
    Rng rng_spa = make_stream(seed, StreamPurpose::stage_eval, stream_counter::stage1_spa);
    rep.spa_success = pooled_eval(spa, c, rates, hwc, n_eval, rng_spa, &recs).success;
    Rng rng_qmix = make_stream(seed, StreamPurpose::stage_eval, stream_counter::stage1_qmix);
    rep.qmix_success = pooled_eval(qmix, c, rates, hwc, n_eval, rng_qmix, nullptr).success;

    std::vector<double> lambdas, complexities;
    lambdas.reserve(recs.size());
    for (const auto& r : recs) {
        lambdas.push_back(r.lambda);
        complexities.push_back(r.complexity_score);
        if (r.lambda < 0.2)
            ++rep.hist[0];
        else if (r.lambda > 0.8)
            ++rep.hist[2];
        else
            ++rep.hist[1];
    }
    const double tot = static_cast<double>(recs.size());
    rep.frac_low = rep.hist[0] / tot;
    rep.frac_mid = rep.hist[1] / tot;
    rep.frac_high = rep.hist[2] / tot;
    rep.r2 = r2_two_ways(lambdas, complexities);
    return rep;
}

inline json stage1_to_json(const Stage1Report& r) {
    return json{{"spa_success", r.spa_success},
                {"qmix_success", r.qmix_success},
                {"hist_low", r.hist[0]},
                {"hist_mid", r.hist[1]},
                {"hist_high", r.hist[2]},
                {"frac_low", r.frac_low},
                {"frac_mid", r.frac_mid},
                {"frac_high", r.frac_high},
                {"r2", r.r2.value},
                {"r2_direct", r.r2.direct},
                {"r2_standardized", r.r2.standardized},
                {"episodes_per_policy", r.episodes_per_policy},
                {"error_rates", r.error_rates},
                {"hardware", r.hardware},
                {"full_scale_reference",
                 json{{"spa_success", 0.958},
                      {"qmix_success", 0.892},
                      {"frac_low", 0.285},
                      {"frac_high", 0.243},
                      {"frac_mid", 0.472},
                      {"r2", 0.95}}}};
}

inline std::string stage1_csv(const Stage1Report& r) {
    char buf[512];
    std::string out = "metric,value\n";
    auto add = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g\n", k, v);
        out += buf;
    };
    add("spa_success", r.spa_success);
    add("qmix_success", r.qmix_success);
    add("frac_low", r.frac_low);
    add("frac_mid", r.frac_mid);
    add("frac_high", r.frac_high);
    add("r2", r.r2.value);
    return out;
}

// ---- stage 2 ----

struct Stage2Cell {
    std::string config;
    double severity = 0.0;
    double budget_ms = 0.0;
    double success = 0.0;
};

struct Stage2Report {
    std::vector<Stage2Cell> cells;  // config-major, budgets descending
    std::vector<double> budgets;
    double robustness = 0.0;  // severity-weighted mean of per-config mean success
    double max_increase_pp = 0.0;  // worst monotonicity violation along a sweep
    double floor_at_tightest = 1.0;
    int episodes_per_cell = 0;
    double error_rate = 0.0;
};

inline Stage2Report run_stage2(const DecoderPolicy& pol, const CodeInstance& c, int n_eval,
                               uint64_t seed, std::vector<double> budgets = {10, 5, 2, 1, 0.5},
                               double err_p = 0.01) {
    for (size_t i = 1; i < budgets.size(); ++i)
        if (budgets[i] >= budgets[i - 1])
            throw std::invalid_argument("run_stage2: budgets must descend");
    Stage2Report rep;
    rep.budgets = budgets;
    rep.episodes_per_cell = n_eval;
    rep.error_rate = err_p;
    const auto configs = hw::all_configs();
    double wsum = 0.0, wacc = 0.0;
    for (size_t ci = 0; ci < configs.size(); ++ci) {
        double prev = 1.0;
        double config_mean = 0.0;
        for (size_t bi = 0; bi < budgets.size(); ++bi) {
            Rng rng = make_stream(seed, StreamPurpose::stage_eval,
                                  stream_counter::stage2_base + ci * 10 + bi);
            const auto s =
                trainer::evaluate_policy(pol, c, err_p, configs[ci], n_eval, rng, budgets[bi]);
            Stage2Cell cell{configs[ci].name, configs[ci].severity_weight, budgets[bi],
                            s.success};
            rep.cells.push_back(cell);
            config_mean += s.success;
            if (bi > 0) rep.max_increase_pp = std::max(rep.max_increase_pp,
                                                       (cell.success - prev) * 100.0);
            prev = cell.success;
            if (bi + 1 == budgets.size())
                rep.floor_at_tightest = std::min(rep.floor_at_tightest, cell.success);
        }
        config_mean /= budgets.size();
        wacc += configs[ci].severity_weight * config_mean;
        wsum += configs[ci].severity_weight;
    }
    rep.robustness = wacc / wsum;
    return rep;
}

inline json stage2_to_json(const Stage2Report& r) {
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back(json{{"config", c.config},
                             {"severity", c.severity},
                             {"budget_ms", c.budget_ms},
                             {"success", c.success}});
    return json{{"cells", cells},
                {"budgets_ms", r.budgets},
                {"robustness", r.robustness},
                {"max_increase_pp", r.max_increase_pp},
                {"floor_at_tightest", r.floor_at_tightest},
                {"episodes_per_cell", r.episodes_per_cell},
                {"error_rate", r.error_rate},
                {"full_scale_reference",
                 json{{"ideal_success", 0.985},
                      {"distributed_success", 0.876},
                      {"floor", 0.65},
                      {"robustness", 0.769}}}};
}

inline std::string stage2_csv(const Stage2Report& r) {
    std::string out = "config,budget_ms,success\n";
    char buf[256];
    for (const auto& c : r.cells) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g\n", c.config.c_str(), c.budget_ms,
                      c.success);
        out += buf;
    }
    return out;
}

// ---- stage 3 ----

struct TransferResult {
    int d = 0;
    double zero_shot = 0.0;  // transferred policy, no fine-tuning
    double identity = 0.0;   // apply-nothing baseline on the same errors
    int episodes = 0;
};

struct Stage3Report {
    std::vector<dist::ScalingRow> table;
    std::vector<TransferResult> transfers;
    double error_rate = 0.0;
};

inline Stage3Report run_stage3(const DecoderPolicy& src, std::vector<int> distances, int n_eval,
                               uint64_t seed, double err_p = 0.005) {
    if (src.binding.family != code::CodeFamily::toycss)
        throw std::invalid_argument("run_stage3: source policy must be a toycss policy");
    Stage3Report rep;
    rep.table = dist::speedup_table({5, 7, 9, 11});
    rep.error_rate = err_p;
    const hw::HardwareConfig hwc = hw::config_by_name("ideal");
    for (int d : distances) {
        const CodeInstance tgt = code::build_toy_css(d);
        const DecoderPolicy moved = policy::transfer_init(src, tgt, seed);
        TransferResult tr;
        tr.d = d;
        tr.episodes = n_eval;
        Rng rng =
            make_stream(seed, StreamPurpose::stage_eval, stream_counter::stage3_base + d);
        for (int i = 0; i < n_eval; ++i) {
            const auto truth = code::sample_error(tgt, err_p, rng);
            const auto s = code::syndrome_of(tgt, truth);
            const bool id_ok = !s.any() && !code::is_logical_failure(tgt, truth);
            tr.identity += id_ok ? 1.0 : 0.0;
            const auto rec = env::run_episode_given(moved, tgt, truth, hwc, 0.0, rng);
            tr.zero_shot += rec.success ? 1.0 : 0.0;
        }
        tr.identity /= n_eval;
        tr.zero_shot /= n_eval;
        rep.transfers.push_back(tr);
    }
    return rep;
}

inline json stage3_to_json(const Stage3Report& r) {
    json table = json::array();
    for (const auto& row : r.table)
        table.push_back(json{{"d", row.d},
                             {"dim", row.dim},
                             {"single_ms", row.single_ms},
                             {"dist_ms", row.dist_ms},
                             {"speedup", row.speedup},
                             {"comm_overhead_pct", row.comm_overhead_pct},
                             {"params", row.params_display}});
    json transfers = json::array();
    for (const auto& t : r.transfers)
        transfers.push_back(json{{"d", t.d},
                                 {"zero_shot_success", t.zero_shot},
                                 {"identity_success", t.identity},
                                 {"episodes", t.episodes}});
    return json{{"table", table},
                {"mean_speedup", dist::mean_speedup(r.table)},
                {"transfers", transfers},
                {"error_rate", r.error_rate}};
}

// identical to the standalone scaling-table export, byte for byte
inline std::string stage3_csv(const Stage3Report& r) { return dist::table_csv(r.table); }

// ---- report emission ----

struct StageReports {
    std::optional<Stage1Report> s1;
    std::optional<Stage2Report> s2;
    std::optional<Stage3Report> s3;
};

struct SummaryThresholds {
    double stage1_min_r2 = 0.5;
    double stage2_slack_pp = 2.0;
    double stage2_floor = 0.5;
};

inline json summary_json(const StageReports& r, const SummaryThresholds& th = {}) {
    json stages = json::array();
    json checks = json::object();
    bool pass = true;
    if (r.s1) {
        stages.push_back("stage1");
        const bool r2_ok = r.s1->r2.value > th.stage1_min_r2;
        const bool hist_ok = r.s1->hist[0] > 0 && r.s1->hist[1] > 0 && r.s1->hist[2] > 0;
        checks["stage1_r2_above_threshold"] = r2_ok;
        checks["stage1_histogram_nondegenerate"] = hist_ok;
        pass = pass && r2_ok && hist_ok;
    }
    if (r.s2) {
        stages.push_back("stage2");
        const bool mono_ok = r.s2->max_increase_pp <= th.stage2_slack_pp;
        const bool floor_ok = r.s2->floor_at_tightest >= th.stage2_floor;
        checks["stage2_monotone_within_slack"] = mono_ok;
        checks["stage2_floor_met"] = floor_ok;
        pass = pass && mono_ok && floor_ok;
    }
    if (r.s3) {
        stages.push_back("stage3");
        bool transfer_ok = true;
        for (const auto& t : r.s3->transfers) transfer_ok = transfer_ok && t.zero_shot > t.identity;
        checks["stage3_transfer_beats_identity"] = transfer_ok;
        pass = pass && transfer_ok;
    }
    return json{{"stages", stages}, {"checks", checks}, {"pass", pass}};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

// one CSV + one JSON per present stage, plus summary.json with pass/fail
inline json emit_reports(const StageReports& r, const std::string& out_dir,
                         const SummaryThresholds& th = {}) {
    std::filesystem::create_directories(out_dir);
    if (r.s1) {
        write_file(out_dir + "/stage1.json", stage1_to_json(*r.s1).dump(2) + "\n");
        write_file(out_dir + "/stage1.csv", stage1_csv(*r.s1));
    }
    if (r.s2) {
        write_file(out_dir + "/stage2.json", stage2_to_json(*r.s2).dump(2) + "\n");
        write_file(out_dir + "/stage2.csv", stage2_csv(*r.s2));
    }
    if (r.s3) {
        write_file(out_dir + "/stage3.json", stage3_to_json(*r.s3).dump(2) + "\n");
        write_file(out_dir + "/stage3.csv", stage3_csv(*r.s3));
    }
    const json summary = summary_json(r, th);
    write_file(out_dir + "/summary.json", summary.dump(2) + "\n");
    return summary;
}

}  // namespace synqec::eval
