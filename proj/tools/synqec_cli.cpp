// Command-line front end: training, staged evaluation, the scaling table,
// and code inspection. Exit codes: 0 = success / thresholds met, 1 = a
// validation threshold failed, 2 = usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "synqec/code.hpp"
#include "synqec/evalharness.hpp"
#include "synqec/latency.hpp"
#include "synqec/policy.hpp"
#include "synqec/trainer.hpp"

namespace {

using json = nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

synqec::policy::DecoderPolicy load_checkpoint(const std::string& path) {
    return synqec::policy::policy_from_json(read_json_file(path));
}

int cmd_train(const std::string& config_path, const std::string& out_dir, int d,
              uint64_t seed, bool seed_set) {
    synqec::trainer::TrainConfig cfg;
    if (!config_path.empty()) cfg = synqec::trainer::train_config_from_json(read_json_file(config_path));
    if (seed_set) cfg.seed = seed;
    const auto code = synqec::code::build_toy_css(d);
    std::cout << "training d=" << d << " seed=" << cfg.seed << " episodes="
              << cfg.fine_tune_episodes << "\n";
    const auto res = synqec::trainer::train_loop(code, cfg, out_dir);
    std::cout << "pretrain accuracy " << res.pretrain.accuracy << ", selection success "
              << res.pretrain_select << "\n";
    std::cout << "result: " << res.picked << " (selection success " << res.best_select
              << ", epoch " << res.best_epoch << ", " << res.updates << " updates, "
              << res.wall_seconds << " s)\n";
    std::cout << "checkpoints in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& stage, const std::string& checkpoint,
             const std::string& qmix_checkpoint, uint64_t seed, int n_eval,
             const std::string& out_dir) {
    const auto pol = load_checkpoint(checkpoint);
    const auto code = pol.binding.build();
    synqec::eval::StageReports reports;
    if (stage == "stage1") {
        synqec::policy::DecoderPolicy qmix =
            qmix_checkpoint.empty() ? pol : load_checkpoint(qmix_checkpoint);
        if (qmix_checkpoint.empty()) qmix.lambda_pin = 1.0;  // always-mix ablation
        reports.s1 = synqec::eval::run_stage1(pol, qmix, code, n_eval, seed);
    } else if (stage == "stage2") {
        reports.s2 = synqec::eval::run_stage2(pol, code, n_eval, seed);
    } else {
        if (pol.binding.distance != 5)
            std::cout << "note: transfer source is d=" << pol.binding.distance
                      << " (the published protocol transfers from d=5)\n";
        reports.s3 = synqec::eval::run_stage3(pol, {7, 9, 11}, n_eval, seed);
    }
    const json summary = synqec::eval::emit_reports(reports, out_dir);
    std::cout << summary.dump(2) << "\n";
    return summary.at("pass").get<bool>() ? 0 : 1;
}

int cmd_table1(const std::string& out_path) {
    const auto rows = synqec::dist::speedup_table({5, 7, 9, 11});
    const std::string csv = synqec::dist::table_csv(rows);
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + out_path);
        f << csv;
    }
    std::cout << csv;
    std::cout << "mean_speedup," << synqec::dist::format_fixed(synqec::dist::mean_speedup(rows), 2)
              << "\n";
    return 0;
}

int cmd_codeinfo(const std::string& family, int d, const std::string& out_path) {
    synqec::code::CodeInstance c;
    if (family == "toycss") {
        c = synqec::code::build_toy_css(d);
    } else if (family == "truebb") {
        // the [[144,12,12]] instance: l=12, m=6, a = x^3 + y + y^2, b = y^3 + x + x^2
        c = synqec::code::build_true_bb(
            12, 6, {{3, 0}, {0, 1}, {0, 2}}, {{0, 3}, {1, 0}, {2, 0}});
    } else {
        throw CLI::ValidationError("--family must be truebb or toycss");
    }
    const json j = synqec::code::code_to_json(c);
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << j.dump(2) << "\n";
    }
    std::cout << "family=" << synqec::code::family_name(c.family) << " n=" << c.n
              << " k=" << c.k << " checks=" << c.total_checks() << " syndrome_dim="
              << c.nominal_syndrome_dim << "\n";
    if (out_path.empty()) std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-agent decoder for distributed CSS codes"};
    app.require_subcommand(1);

    // train
    std::string train_config, train_out = "runs/train";
    int train_d = 3;
    uint64_t train_seed = 1;
    auto* train = app.add_subcommand("train", "pretrain + fine-tune a policy");
    train->add_option("--config", train_config, "training config JSON");
    train->add_option("--out", train_out, "output directory");
    train->add_option("--d", train_d, "code distance (odd, 3..11)");
    auto* seed_opt = train->add_option("--seed", train_seed, "master seed");

    // eval
    std::string eval_stage, eval_ckpt, eval_qmix, eval_out = "runs/eval";
    uint64_t eval_seed = 1;
    int eval_n = 10000;
    auto* eval = app.add_subcommand("eval", "run a validation stage");
    eval->add_option("stage", eval_stage, "stage1|stage2|stage3")
        ->required()
        ->check(CLI::IsMember({"stage1", "stage2", "stage3"}));
    eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint JSON")->required();
    eval->add_option("--qmix-checkpoint", eval_qmix,
                     "separately trained always-mix baseline (stage1; default: pin the main "
                     "checkpoint)");
    eval->add_option("--seed", eval_seed, "master seed");
    eval->add_option("--n-eval", eval_n, "episodes per policy/cell");
    eval->add_option("--out", eval_out, "report directory");

    // table1
    std::string table_out;
    auto* table = app.add_subcommand("table1", "emit the two-QPU scaling table");
    table->add_option("--out", table_out, "CSV path (also printed to stdout)");

    // codeinfo
    std::string ci_family = "toycss", ci_out;
    int ci_d = 3;
    auto* ci = app.add_subcommand("codeinfo", "print a code instance as JSON");
    ci->add_option("--family", ci_family, "truebb|toycss")
        ->check(CLI::IsMember({"truebb", "toycss"}));
    ci->add_option("--d", ci_d, "distance (toycss)");
    ci->add_option("--out", ci_out, "JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed())
            return cmd_train(train_config, train_out, train_d, train_seed, seed_opt->count() > 0);
        if (eval->parsed())
            return cmd_eval(eval_stage, eval_ckpt, eval_qmix, eval_seed, eval_n, eval_out);
        if (table->parsed()) return cmd_table1(table_out);
        if (ci->parsed()) return cmd_codeinfo(ci_family, ci_d, ci_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
