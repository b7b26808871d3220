#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/code.hpp"

// Reference decoders used as ground truth and as pretraining label sources.
// The oracle does exhaustive minimum-weight search (small codes only); BP is
// plain normalized min-sum on the two Tanner graphs independently, no
// post-processing, so it inherits the usual degeneracy blind spots.

namespace synqec::refdec {

using code::CodeInstance;
using code::PauliError;
using code::Syndrome;
using gf2::BitVec;
using json = nlohmann::json;

struct OracleResult {
    bool found = false;
    PauliError correction;
    int weight = 0;
};

// Exhaustive search for the minimum-weight error consistent with the
// syndrome, scanning weights upward. Within a weight, qubit subsets are
// visited in lexicographic order and Pauli assignments in X<Y<Z order, so
// ties resolve to the lexicographically first candidate. Feasible for
// n <= ~30, w_max <= 4.
inline OracleResult ml_oracle_decode(const CodeInstance& c, const Syndrome& target,
                                     int w_max = 4) {
    const int sx_n = c.hx.rows, sz_n = c.hz.rows, S = sx_n + sz_n;
    // combined-space syndrome contribution of each (qubit, pauli)
    auto contrib = [&](int q, int pauli) {
        BitVec v(S);
        const bool has_x = pauli != 2;  // X or Y flips the X component
        const bool has_z = pauli != 0;  // Z or Y flips the Z component
        if (has_z)
            for (int r = 0; r < sx_n; ++r)
                if (c.hx_col[q].get(r)) v.set(r, true);
        if (has_x)
            for (int r = 0; r < sz_n; ++r)
                if (c.hz_col[q].get(r)) v.set(sx_n + r, true);
        return v;
    };
    static thread_local std::unordered_map<const CodeInstance*, std::vector<BitVec>> cache;
    auto& table = cache[&c];
    if (table.empty()) {
        table.reserve(static_cast<size_t>(c.n) * 3);
        for (int q = 0; q < c.n; ++q)
            for (int p = 0; p < 3; ++p) table.push_back(contrib(q, p));
    }

    BitVec want = target.concat();
    OracleResult res;
    if (!want.any()) {
        res.found = true;
        res.correction = PauliError(c.n);
        return res;
    }

    std::vector<std::pair<int, int>> chosen;  // (qubit, pauli)
    BitVec acc(S);

    std::function<bool(int, int)> dfs = [&](int start, int remaining) -> bool {
        if (remaining == 0) return acc == want;
        for (int q = start; q <= c.n - remaining; ++q) {
            for (int p = 0; p < 3; ++p) {
                const BitVec& d = table[static_cast<size_t>(q) * 3 + p];
                acc ^= d;
                chosen.emplace_back(q, p);
                if (dfs(q + 1, remaining - 1)) return true;
                chosen.pop_back();
                acc ^= d;
            }
        }
        return false;
    };
    for (int w = 1; w <= w_max; ++w) {
        if (dfs(0, w)) {
            res.found = true;
            res.weight = w;
            res.correction = PauliError(c.n);
            for (auto [q, p] : chosen) {
                if (p != 2) res.correction.x.set(q, true);
                if (p != 0) res.correction.z.set(q, true);
            }
            assert(code::syndrome_of(c, res.correction) == target);
            return res;
        }
    }
    return res;
}

struct BpSideResult {
    BitVec hard;  // decoded bits
    bool converged = false;
    int iterations = 0;
};

// Normalized min-sum on one binary Tanner graph, flooding schedule.
// converged means the hard decision reproduces the syndrome exactly.
inline BpSideResult bp_side(const gf2::BitMatrix& h, const BitVec& syndrome, double prior_llr,
                            int max_iters, double norm) {
    const int checks = h.rows, vars = h.cols;
    BpSideResult res;
    res.hard = BitVec(vars);
    if (!syndrome.any()) {
        res.converged = true;
        return res;
    }
    // adjacency
    std::vector<std::vector<int>> cv(checks), vc(vars);
    for (int r = 0; r < checks; ++r)
        for (int q = 0; q < vars; ++q)
            if (h.get(r, q)) {
                cv[r].push_back(q);
                vc[q].push_back(r);
            }
    // messages indexed by (check, position in cv[check])
    std::vector<std::vector<double>> v2c(checks), c2v(checks);
    for (int r = 0; r < checks; ++r) {
        v2c[r].assign(cv[r].size(), prior_llr);
        c2v[r].assign(cv[r].size(), 0.0);
    }
    for (int it = 1; it <= max_iters; ++it) {
        // check update: normalized min-sum with syndrome sign
        for (int r = 0; r < checks; ++r) {
            const auto& nb = cv[r];
            double min1 = 1e300, min2 = 1e300;
            int arg1 = -1;
            int sign_all = syndrome.get(r) ? -1 : 1;
            for (size_t t = 0; t < nb.size(); ++t) {
                const double m = v2c[r][t];
                const double a = std::abs(m);
                if (m < 0.0) sign_all = -sign_all;
                if (a < min1) {
                    min2 = min1;
                    min1 = a;
                    arg1 = static_cast<int>(t);
                } else if (a < min2) {
                    min2 = a;
                }
            }
            for (size_t t = 0; t < nb.size(); ++t) {
                const double m = v2c[r][t];
                const int sign_rest = (m < 0.0) ? -sign_all : sign_all;
                const double mag = (static_cast<int>(t) == arg1) ? min2 : min1;
                c2v[r][t] = norm * sign_rest * mag;
            }
        }
        // variable update + posterior
        std::vector<double> post(vars, prior_llr);
        for (int r = 0; r < checks; ++r)
            for (size_t t = 0; t < cv[r].size(); ++t) post[cv[r][t]] += c2v[r][t];
        for (int r = 0; r < checks; ++r)
            for (size_t t = 0; t < cv[r].size(); ++t)
                v2c[r][t] = post[cv[r][t]] - c2v[r][t];
        for (int q = 0; q < vars; ++q) res.hard.set(q, post[q] < 0.0);
        res.iterations = it;
        if (h.mul(res.hard) == syndrome) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

struct BpResult {
    PauliError correction;
    bool converged_x = false;  // x-bit side (Hz graph)
    bool converged_z = false;  // z-bit side (Hx graph)
    int iterations_x = 0;
    int iterations_z = 0;

    bool converged() const { return converged_x && converged_z; }
};

// Independent X/Z decoding under a depolarizing channel of strength p: each
// binary side sees marginal flip probability 2p/3.
inline BpResult bp_decode(const CodeInstance& c, const Syndrome& s, double p, int max_iters = 30,
                          double norm = 0.625) {
    double q = 2.0 * p / 3.0;
    q = std::min(std::max(q, 1e-12), 0.5 - 1e-12);
    const double prior = std::log((1.0 - q) / q);
    BpResult r;
    r.correction = PauliError(c.n);
    BpSideResult xs = bp_side(c.hz, s.sz, prior, max_iters, norm);
    BpSideResult zs = bp_side(c.hx, s.sx, prior, max_iters, norm);
    r.correction.x = xs.hard;
    r.correction.z = zs.hard;
    r.converged_x = xs.converged;
    r.converged_z = zs.converged;
    r.iterations_x = xs.iterations;
    r.iterations_z = zs.iterations;
    return r;
}

enum class LabelSource { oracle, bp };

struct PretrainRecord {
    Syndrome syndrome;
    PauliError target;
    LabelSource source = LabelSource::oracle;
};

struct PretrainDataset {
    std::vector<PretrainRecord> records;
    int64_t oracle_labels = 0;
    int64_t bp_labels = 0;
    int64_t dropped = 0;  // samples with no syndrome-consistent label
};

// Samples errors, labels each syndrome with a syndrome-consistent correction:
// the oracle where exhaustive search is feasible (n <= 30), BP otherwise.
// Samples that neither labeler can explain are dropped and redrawn so every
// stored target reproduces its record's syndrome.
inline PretrainDataset make_pretrain_dataset(const CodeInstance& c, double p, int count,
                                             Rng& rng, int w_max = 4) {
    PretrainDataset ds;
    ds.records.reserve(count);
    const bool oracle_ok = c.n <= 30;
    std::unordered_map<BitVec, PauliError, gf2::BitVecHash> memo;
    int64_t attempts = 0;
    const int64_t max_attempts = static_cast<int64_t>(count) * 10 + 1000;
    while (static_cast<int>(ds.records.size()) < count && attempts < max_attempts) {
        ++attempts;
        const PauliError e = code::sample_error(c, p, rng);
        const Syndrome s = code::syndrome_of(c, e);
        PretrainRecord rec;
        rec.syndrome = s;
        bool labeled = false;
        if (oracle_ok) {
            const BitVec key = s.concat();
            auto it = memo.find(key);
            if (it != memo.end()) {
                rec.target = it->second;
                rec.source = LabelSource::oracle;
                labeled = true;
            } else {
                OracleResult o = ml_oracle_decode(c, s, w_max);
                if (o.found) {
                    memo.emplace(key, o.correction);
                    rec.target = o.correction;
                    rec.source = LabelSource::oracle;
                    labeled = true;
                }
            }
        }
        if (!labeled) {
            BpResult b = bp_decode(c, s, p);
            if (b.converged()) {
                rec.target = b.correction;
                rec.source = LabelSource::bp;
                labeled = true;
            }
        }
        if (!labeled) {
            ++ds.dropped;
            continue;
        }
        assert(code::syndrome_of(c, rec.target) == s);
        (rec.source == LabelSource::oracle ? ds.oracle_labels : ds.bp_labels) += 1;
        ds.records.push_back(std::move(rec));
    }
    if (static_cast<int>(ds.records.size()) < count)
        throw std::runtime_error("make_pretrain_dataset: could not label enough samples");
    return ds;
}

// JSONL: one record per line, bit fields as 0/1 strings.
inline void write_pretrain_jsonl(const PretrainDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (const auto& r : ds.records) {
        json j{{"sx", r.syndrome.sx.to_string()},
               {"sz", r.syndrome.sz.to_string()},
               {"target_x", r.target.x.to_string()},
               {"target_z", r.target.z.to_string()},
               {"source", r.source == LabelSource::oracle ? "oracle" : "bp"}};
        out << j.dump() << "\n";
    }
}

inline PretrainDataset read_pretrain_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    PretrainDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        PretrainRecord r;
        r.syndrome.sx = BitVec::from_string(j.at("sx").get<std::string>());
        r.syndrome.sz = BitVec::from_string(j.at("sz").get<std::string>());
        r.target.x = BitVec::from_string(j.at("target_x").get<std::string>());
        r.target.z = BitVec::from_string(j.at("target_z").get<std::string>());
        r.source = j.at("source").get<std::string>() == "bp" ? LabelSource::bp
                                                             : LabelSource::oracle;
        (r.source == LabelSource::oracle ? ds.oracle_labels : ds.bp_labels) += 1;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace synqec::refdec
