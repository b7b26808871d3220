#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Dense GF(2) linear algebra on 64-bit words. Sizes here are tiny (n <= a few
// hundred), so everything is straightforward Gaussian elimination.

namespace synqec::gf2 {

struct BitVec {
    int n = 0;
    std::vector<uint64_t> w;

    BitVec() = default;
    explicit BitVec(int bits) : n(bits), w((bits + 63) / 64, 0) {}

    bool get(int i) const { return (w[i >> 6] >> (i & 63)) & 1; }
    void set(int i, bool v) {
        if (v)
            w[i >> 6] |= (1ull << (i & 63));
        else
            w[i >> 6] &= ~(1ull << (i & 63));
    }
    void flip(int i) { w[i >> 6] ^= (1ull << (i & 63)); }

    void operator^=(const BitVec& o) {
        assert(n == o.n);
        for (size_t i = 0; i < w.size(); ++i) w[i] ^= o.w[i];
    }

    bool any() const {
        for (uint64_t x : w)
            if (x) return true;
        return false;
    }

    int popcount() const {
        int c = 0;
        for (uint64_t x : w) c += __builtin_popcountll(x);
        return c;
    }

    // parity of <this, o>
    bool dot(const BitVec& o) const {
        assert(n == o.n);
        uint64_t acc = 0;
        for (size_t i = 0; i < w.size(); ++i) acc ^= w[i] & o.w[i];
        return __builtin_parityll(acc);
    }

    bool operator==(const BitVec& o) const { return n == o.n && w == o.w; }

    std::string to_string() const {
        std::string s(n, '0');
        for (int i = 0; i < n; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

    static BitVec from_string(const std::string& s) {
        BitVec v(static_cast<int>(s.size()));
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1')
                v.set(static_cast<int>(i), true);
            else if (s[i] != '0')
                throw std::invalid_argument("bit string must be 0/1");
        }
        return v;
    }
};

struct BitVecHash {
    size_t operator()(const BitVec& v) const {
        uint64_t h = 0xcbf29ce484222325ull ^ static_cast<uint64_t>(v.n);
        for (uint64_t x : v.w) {
            h ^= x;
            h *= 0x100000001b3ull;
        }
        return static_cast<size_t>(h);
    }
};

struct BitMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<BitVec> row;

    BitMatrix() = default;
    BitMatrix(int r, int c) : rows(r), cols(c), row(r, BitVec(c)) {}

    bool get(int r, int c) const { return row[r].get(c); }
    void set(int r, int c, bool v) { row[r].set(c, v); }

    // this (r x c) times v (c) -> r bits
    BitVec mul(const BitVec& v) const {
        assert(v.n == cols);
        BitVec out(rows);
        for (int r = 0; r < rows; ++r) out.set(r, row[r].dot(v));
        return out;
    }

    BitMatrix transposed() const {
        BitMatrix t(cols, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (get(r, c)) t.set(c, r, true);
        return t;
    }

    // this (r x k) times o (k x c)
    BitMatrix mul(const BitMatrix& o) const {
        assert(cols == o.rows);
        BitMatrix out(rows, o.cols);
        for (int r = 0; r < rows; ++r)
            for (int k = 0; k < cols; ++k)
                if (get(r, k)) out.row[r] ^= o.row[k];
        return out;
    }
};

// Row echelon basis with remembered pivot columns; supports rank, membership
// and reduction queries against the spanned row space.
struct RowBasis {
    int cols = 0;
    std::vector<BitVec> rows;   // echelon rows
    std::vector<int> pivots;    // pivot column of each row

    explicit RowBasis(int c) : cols(c) {}

    // Reduce v against the basis; returns the remainder.
    BitVec reduce(const BitVec& v) const {
        BitVec r = v;
        for (size_t i = 0; i < rows.size(); ++i)
            if (r.get(pivots[i])) r ^= rows[i];
        return r;
    }

    // Insert v if independent. Returns true if the basis grew.
    bool insert(const BitVec& v) {
        BitVec r = reduce(v);
        if (!r.any()) return false;
        int p = 0;
        while (!r.get(p)) ++p;
        rows.push_back(r);
        pivots.push_back(p);
        return true;
    }

    bool contains(const BitVec& v) const { return !reduce(v).any(); }
    int rank() const { return static_cast<int>(rows.size()); }
};

inline RowBasis row_space(const BitMatrix& m) {
    RowBasis b(m.cols);
    for (const auto& r : m.row) b.insert(r);
    return b;
}

inline int rank(const BitMatrix& m) { return row_space(m).rank(); }

// Basis of the null space {v : M v = 0}.
inline std::vector<BitVec> kernel_basis(const BitMatrix& m) {
    const int nc = m.cols;
    // Eliminate on a working copy, tracking pivot columns.
    std::vector<BitVec> work;
    work.reserve(m.rows);
    for (const auto& r : m.row) work.push_back(r);
    std::vector<int> pivot_col;
    size_t rr = 0;
    for (int c = 0; c < nc && rr < work.size(); ++c) {
        size_t sel = rr;
        while (sel < work.size() && !work[sel].get(c)) ++sel;
        if (sel == work.size()) continue;
        std::swap(work[rr], work[sel]);
        for (size_t i = 0; i < work.size(); ++i)
            if (i != rr && work[i].get(c)) work[i] ^= work[rr];
        pivot_col.push_back(c);
        ++rr;
    }
    std::vector<bool> is_pivot(nc, false);
    for (int c : pivot_col) is_pivot[c] = true;
    std::vector<BitVec> basis;
    for (int c = 0; c < nc; ++c) {
        if (is_pivot[c]) continue;
        BitVec v(nc);
        v.set(c, true);
        for (size_t i = 0; i < pivot_col.size(); ++i)
            if (work[i].get(c)) v.set(pivot_col[i], true);
        basis.push_back(v);
    }
    return basis;
}

// Inverse of a square invertible matrix; throws if singular.
inline BitMatrix inverse(const BitMatrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("inverse: not square");
    const int n = m.rows;
    std::vector<BitVec> a = m.row;
    BitMatrix inv(n, n);
    for (int i = 0; i < n; ++i) inv.set(i, i, true);
    for (int c = 0; c < n; ++c) {
        int sel = -1;
        for (int r = c; r < n; ++r)
            if (a[r].get(c)) {
                sel = r;
                break;
            }
        if (sel < 0) throw std::invalid_argument("inverse: singular matrix");
        std::swap(a[c], a[sel]);
        std::swap(inv.row[c], inv.row[sel]);
        for (int r = 0; r < n; ++r) {
            if (r != c && a[r].get(c)) {
                a[r] ^= a[c];
                inv.row[r] ^= inv.row[c];
            }
        }
    }
    return inv;
}

}  // namespace synqec::gf2
