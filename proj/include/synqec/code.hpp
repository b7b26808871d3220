#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "synqec/gf2.hpp"
#include "synqec/rng.hpp"

// CSS code model. Two constructions:
//  - true bivariate-bicycle codes Hx=[A|B], Hz=[B^T|A^T] from two bivariate
//    polynomials over cyclic shifts (panels = the two circulant blocks);
//  - a rotated-surface-layout toy lattice (odd d, n=d^2, d^2-1 checks,
//    panels = left/right column halves, middle column goes left).
// Logical operators are computed generically: ker/rowspace quotients over
// GF(2), then symplectically paired so logical_x[i] anticommutes with
// logical_z[i] only.

namespace synqec::code {

using gf2::BitMatrix;
using gf2::BitVec;
using json = nlohmann::json;

enum class CodeFamily { truebb, toycss };

inline const char* family_name(CodeFamily f) {
    return f == CodeFamily::truebb ? "truebb" : "toycss";
}

struct PauliError {
    BitVec x;  // X component, n bits
    BitVec z;  // Z component, n bits

    PauliError() = default;
    explicit PauliError(int n) : x(n), z(n) {}

    int weight() const {
        int w = 0;
        for (size_t i = 0; i < x.w.size(); ++i) w += __builtin_popcountll(x.w[i] | z.w[i]);
        return w;
    }
    int y_count() const {
        int w = 0;
        for (size_t i = 0; i < x.w.size(); ++i) w += __builtin_popcountll(x.w[i] & z.w[i]);
        return w;
    }
    void operator^=(const PauliError& o) {
        x ^= o.x;
        z ^= o.z;
    }
    bool operator==(const PauliError& o) const { return x == o.x && z == o.z; }
};

struct Syndrome {
    BitVec sx;  // X-check outcomes (detect Z errors)
    BitVec sz;  // Z-check outcomes (detect X errors)

    bool any() const { return sx.any() || sz.any(); }
    int weight() const { return sx.popcount() + sz.popcount(); }
    bool operator==(const Syndrome& o) const { return sx == o.sx && sz == o.sz; }

    BitVec concat() const {
        BitVec v(sx.n + sz.n);
        for (int i = 0; i < sx.n; ++i) v.set(i, sx.get(i));
        for (int i = 0; i < sz.n; ++i) v.set(sx.n + i, sz.get(i));
        return v;
    }
};

// Syndrome bits split by check type and locality, each channel in ascending
// check-index order.
struct ObservationChannels {
    std::vector<uint8_t> x_local, x_remote, z_local, z_remote;
};

enum class Locality { local, remote };

struct Monomial {
    int i = 0;  // x exponent
    int j = 0;  // y exponent
};

struct CodeInstance {
    CodeFamily family = CodeFamily::toycss;
    int n = 0;
    int k = 0;
    int distance = 0;             // toycss: lattice distance d; truebb: 0 (not computed)
    int nominal_syndrome_dim = 0; // reporting convention for latency/param accounting
    int bb_l = 0, bb_m = 0;
    std::vector<Monomial> bb_poly_a, bb_poly_b;

    BitMatrix hx;  // X checks (detect Z errors)
    BitMatrix hz;  // Z checks (detect X errors)
    std::vector<uint8_t> panel;  // per qubit: 0 = left, 1 = right

    std::vector<Locality> x_locality, z_locality;      // per check row
    std::vector<int> x_local_checks, x_remote_checks;  // row indices, ascending
    std::vector<int> z_local_checks, z_remote_checks;

    std::vector<BitVec> logical_x, logical_z;  // paired bases, k rows each

    // column views for incremental syndrome updates
    std::vector<BitVec> hx_col, hz_col;

    int total_checks() const { return hx.rows + hz.rows; }

    std::string spec_string() const {
        if (family == CodeFamily::toycss) return "toycss(d=" + std::to_string(distance) + ")";
        auto poly = [](const std::vector<Monomial>& p) {
            std::string s;
            for (size_t t = 0; t < p.size(); ++t) {
                if (t) s += "+";
                if (p[t].i == 0 && p[t].j == 0) {
                    s += "1";
                    continue;
                }
                if (p[t].i > 0) s += "x" + (p[t].i > 1 ? std::to_string(p[t].i) : "");
                if (p[t].j > 0) s += "y" + (p[t].j > 1 ? std::to_string(p[t].j) : "");
            }
            return s;
        };
        return "truebb(l=" + std::to_string(bb_l) + ",m=" + std::to_string(bb_m) +
               ",a=" + poly(bb_poly_a) + ",b=" + poly(bb_poly_b) + ")";
    }
};

namespace detail {

inline void finalize(CodeInstance& c) {
    // CSS condition: every X check commutes with every Z check.
    for (int r = 0; r < c.hx.rows; ++r)
        for (int s = 0; s < c.hz.rows; ++s)
            if (c.hx.row[r].dot(c.hz.row[s]))
                throw std::logic_error("construction violates Hx Hz^T = 0");

    // locality routing
    c.x_locality.resize(c.hx.rows);
    c.z_locality.resize(c.hz.rows);
    auto classify = [&](const BitVec& support) {
        bool left = false, right = false;
        for (int q = 0; q < c.n; ++q)
            if (support.get(q)) (c.panel[q] ? right : left) = true;
        return (left && right) ? Locality::remote : Locality::local;
    };
    for (int r = 0; r < c.hx.rows; ++r) {
        c.x_locality[r] = classify(c.hx.row[r]);
        (c.x_locality[r] == Locality::local ? c.x_local_checks : c.x_remote_checks).push_back(r);
    }
    for (int r = 0; r < c.hz.rows; ++r) {
        c.z_locality[r] = classify(c.hz.row[r]);
        (c.z_locality[r] == Locality::local ? c.z_local_checks : c.z_remote_checks).push_back(r);
    }

    // logical operators: ker(Hz)/rowspace(Hx) and ker(Hx)/rowspace(Hz)
    c.k = c.n - gf2::rank(c.hx) - gf2::rank(c.hz);
    auto quotient = [](const BitMatrix& stab_rows, const BitMatrix& commute_with) {
        gf2::RowBasis combined = gf2::row_space(stab_rows);
        const int stab_rank = combined.rank();
        std::vector<BitVec> reps;
        for (const auto& v : gf2::kernel_basis(commute_with)) {
            const BitVec r = combined.reduce(v);
            if (combined.insert(r)) reps.push_back(combined.rows.back());
        }
        (void)stab_rank;
        return reps;
    };
    c.logical_x = quotient(c.hx, c.hz);
    c.logical_z = quotient(c.hz, c.hx);
    if (static_cast<int>(c.logical_x.size()) != c.k ||
        static_cast<int>(c.logical_z.size()) != c.k)
        throw std::logic_error("logical basis dimension mismatch");

    if (c.k > 0) {
        // Symplectic pairing: make Lx * Lz^T the identity.
        BitMatrix m(c.k, c.k);
        for (int i = 0; i < c.k; ++i)
            for (int j = 0; j < c.k; ++j) m.set(i, j, c.logical_x[i].dot(c.logical_z[j]));
        const BitMatrix minv = gf2::inverse(m);
        std::vector<BitVec> lz(c.k, BitVec(c.n));
        for (int i = 0; i < c.k; ++i)
            for (int j = 0; j < c.k; ++j)
                if (minv.get(j, i)) lz[i] ^= c.logical_z[j];
        c.logical_z = std::move(lz);
        for (int i = 0; i < c.k; ++i)
            for (int j = 0; j < c.k; ++j)
                if (c.logical_x[i].dot(c.logical_z[j]) != (i == j))
                    throw std::logic_error("symplectic pairing failed");
    }

    // column views
    c.hx_col.assign(c.n, BitVec(c.hx.rows));
    c.hz_col.assign(c.n, BitVec(c.hz.rows));
    for (int r = 0; r < c.hx.rows; ++r)
        for (int q = 0; q < c.n; ++q)
            if (c.hx.get(r, q)) c.hx_col[q].set(r, true);
    for (int r = 0; r < c.hz.rows; ++r)
        for (int q = 0; q < c.n; ++q)
            if (c.hz.get(r, q)) c.hz_col[q].set(r, true);
}

}  // namespace detail

// Bivariate-bicycle construction. Polynomials are lists of monomials x^i y^j;
// x and y are the cyclic shifts on Z_l and Z_m. Qubit layout: left block
// (cols 0..lm-1) then right block; row/col index within a block is i*m + j.
inline CodeInstance build_true_bb(int l, int m, const std::vector<Monomial>& poly_a,
                                  const std::vector<Monomial>& poly_b) {
    if (l <= 0 || m <= 0) throw std::invalid_argument("build_true_bb: l, m must be positive");
    if (poly_a.empty() || poly_b.empty())
        throw std::invalid_argument("build_true_bb: empty polynomial");
    CodeInstance c;
    c.family = CodeFamily::truebb;
    c.bb_l = l;
    c.bb_m = m;
    c.bb_poly_a = poly_a;
    c.bb_poly_b = poly_b;
    const int lm = l * m;
    c.n = 2 * lm;
    c.nominal_syndrome_dim = 2 * lm;
    c.hx = BitMatrix(lm, c.n);
    c.hz = BitMatrix(lm, c.n);
    auto block_idx = [&](int i, int j) { return ((i % l + l) % l) * m + ((j % m + m) % m); };
    for (int i = 0; i < l; ++i) {
        for (int j = 0; j < m; ++j) {
            const int r = i * m + j;
            // Hx = [A | B]: term x^p y^q of A puts a 1 at column (i-p, j-q).
            for (const auto& t : poly_a) c.hx.row[r].flip(block_idx(i - t.i, j - t.j));
            for (const auto& t : poly_b) c.hx.row[r].flip(lm + block_idx(i - t.i, j - t.j));
            // Hz = [B^T | A^T]: transposing a shift negates its exponents.
            for (const auto& t : poly_b) c.hz.row[r].flip(block_idx(i + t.i, j + t.j));
            for (const auto& t : poly_a) c.hz.row[r].flip(lm + block_idx(i + t.i, j + t.j));
        }
    }
    c.panel.assign(c.n, 0);
    for (int q = lm; q < c.n; ++q) c.panel[q] = 1;
    detail::finalize(c);
    return c;
}

// Rotated-surface-layout toy code: d odd, qubits on a d x d grid (index
// r*d + c), bulk plaquettes of weight 4 plus weight-2 boundary checks,
// (d^2-1)/2 checks of each type. Face at (r,c) covers the qubits of the unit
// square below-right of it; type X iff r+c is even. Top/bottom boundaries
// keep only X faces, left/right only Z faces.
inline CodeInstance build_toy_css(int d) {
    if (d < 3 || d > 11 || d % 2 == 0)
        throw std::invalid_argument("build_toy_css: d must be odd, 3 <= d <= 11");
    CodeInstance c;
    c.family = CodeFamily::toycss;
    c.distance = d;
    c.n = d * d;
    c.nominal_syndrome_dim = d * d;

    std::vector<BitVec> xrows, zrows;
    for (int r = -1; r < d; ++r) {
        for (int col = -1; col < d; ++col) {
            std::vector<int> qs;
            for (int dr = 0; dr <= 1; ++dr)
                for (int dc = 0; dc <= 1; ++dc) {
                    const int qr = r + dr, qc = col + dc;
                    if (qr >= 0 && qr < d && qc >= 0 && qc < d) qs.push_back(qr * d + qc);
                }
            if (static_cast<int>(qs.size()) < 2) continue;
            const bool is_x = ((r + col) % 2 + 2) % 2 == 0;
            const bool top_bottom = (r == -1 || r == d - 1);
            const bool left_right = (col == -1 || col == d - 1);
            if (qs.size() == 2) {
                if (top_bottom && !is_x) continue;
                if (left_right && is_x) continue;
            }
            BitVec row(c.n);
            for (int q : qs) row.set(q, true);
            (is_x ? xrows : zrows).push_back(row);
        }
    }
    if (static_cast<int>(xrows.size() + zrows.size()) != c.n - 1)
        throw std::logic_error("toy lattice check count mismatch");
    c.hx = BitMatrix(static_cast<int>(xrows.size()), c.n);
    c.hz = BitMatrix(static_cast<int>(zrows.size()), c.n);
    c.hx.row = std::move(xrows);
    c.hz.row = std::move(zrows);

    // panel split by column; middle column goes left
    c.panel.assign(c.n, 0);
    for (int q = 0; q < c.n; ++q)
        if (q % d > (d - 1) / 2) c.panel[q] = 1;
    detail::finalize(c);
    return c;
}

// Depolarizing channel: each qubit independently gets X, Y or Z with
// probability p/3 each. One uniform draw per qubit.
inline PauliError sample_error(const CodeInstance& c, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_error: p outside [0,1]");
    PauliError e(c.n);
    for (int q = 0; q < c.n; ++q) {
        const double u = rng.u01();
        if (u >= p) continue;
        if (u < p / 3.0) {
            e.x.set(q, true);  // X
        } else if (u < 2.0 * p / 3.0) {
            e.x.set(q, true);  // Y
            e.z.set(q, true);
        } else {
            e.z.set(q, true);  // Z
        }
    }
    return e;
}

inline Syndrome syndrome_of(const CodeInstance& c, const PauliError& e) {
    Syndrome s;
    s.sx = c.hx.mul(e.z);  // X checks see the Z component
    s.sz = c.hz.mul(e.x);
    return s;
}

// Precondition: residual has zero syndrome. True iff the residual acts
// nontrivially on the logical space (anticommutes with some paired logical).
inline bool is_logical_failure(const CodeInstance& c, const PauliError& residual) {
    const Syndrome s = syndrome_of(c, residual);
    if (s.any())
        throw std::invalid_argument("is_logical_failure: residual has nonzero syndrome");
    for (const auto& lx : c.logical_x)
        if (lx.dot(residual.z)) return true;
    for (const auto& lz : c.logical_z)
        if (lz.dot(residual.x)) return true;
    return false;
}

inline ObservationChannels factor_observation(const CodeInstance& c, const Syndrome& s) {
    ObservationChannels o;
    o.x_local.reserve(c.x_local_checks.size());
    o.x_remote.reserve(c.x_remote_checks.size());
    o.z_local.reserve(c.z_local_checks.size());
    o.z_remote.reserve(c.z_remote_checks.size());
    for (int r : c.x_local_checks) o.x_local.push_back(s.sx.get(r));
    for (int r : c.x_remote_checks) o.x_remote.push_back(s.sx.get(r));
    for (int r : c.z_local_checks) o.z_local.push_back(s.sz.get(r));
    for (int r : c.z_remote_checks) o.z_remote.push_back(s.sz.get(r));
    return o;
}

inline json code_to_json(const CodeInstance& c) {
    json j;
    j["family"] = family_name(c.family);
    j["spec"] = c.spec_string();
    j["n"] = c.n;
    j["k"] = c.k;
    if (c.family == CodeFamily::toycss) j["distance"] = c.distance;
    j["nominal_syndrome_dim"] = c.nominal_syndrome_dim;
    j["checks_x"] = c.hx.rows;
    j["checks_z"] = c.hz.rows;
    auto rows_of = [](const BitMatrix& m) {
        json arr = json::array();
        for (const auto& r : m.row) arr.push_back(r.to_string());
        return arr;
    };
    j["hx"] = rows_of(c.hx);
    j["hz"] = rows_of(c.hz);
    json lx = json::array(), lz = json::array();
    for (const auto& v : c.logical_x) lx.push_back(v.to_string());
    for (const auto& v : c.logical_z) lz.push_back(v.to_string());
    j["logical_x"] = lx;
    j["logical_z"] = lz;
    std::string panels(c.n, '0');
    for (int q = 0; q < c.n; ++q)
        if (c.panel[q]) panels[q] = '1';
    j["panel"] = panels;
    auto loc_of = [](const std::vector<Locality>& v) {
        std::string s(v.size(), 'l');
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i] == Locality::remote) s[i] = 'r';
        return s;
    };
    j["x_locality"] = loc_of(c.x_locality);
    j["z_locality"] = loc_of(c.z_locality);
    return j;
}

}  // namespace synqec::code
