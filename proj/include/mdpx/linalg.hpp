#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdpx/rational.hpp"

namespace mdpx {

/// Exact Gaussian elimination with partial (first-nonzero) pivoting.
/// Throws std::runtime_error when the matrix is singular.
std::vector<Rat> solveDenseRat(std::vector<std::vector<Rat>> a, std::vector<Rat> b);

namespace detail {
inline bool pivotUsable(const Rat& v) { return !v.isZero(); }
inline bool pivotUsable(double v) { return std::abs(v) > 1e-300; }
inline bool pivotBetter(const Rat&, const Rat&) { return false; }  // first nonzero wins
inline bool pivotBetter(double cand, double best) { return std::abs(cand) > std::abs(best); }
}  // namespace detail

/// Banded LU with partial pivoting (LAPACK gbtrf-style storage). Row i holds
/// columns [i-bl, i+bu]; pivoting may fill up to bu+bl above the diagonal.
template <class T>
class BandedLU {
  public:
    BandedLU(int n, int bl, int bu)
        : n_(n), bl_(bl), bu_(bu), width_(bl + bu + bl + 1), a_(static_cast<size_t>(n) * width_), perm_(n) {}

    /// Row i stores columns [i-bl, i+bu+bl]; the extra bl above the diagonal
    /// is headroom for pivot fill.
    T& at(int i, int j) {
        int off = j - i + bl_;
        if (off < 0 || off >= width_) throw std::logic_error("banded entry outside band");
        return a_[static_cast<size_t>(i) * width_ + off];
    }

    void factor() {
        for (int i = 0; i < n_; ++i) perm_[i] = i;
        for (int k = 0; k < n_; ++k) {
            int last = std::min(n_ - 1, k + bl_);
            int piv = -1;
            for (int r = k; r <= last; ++r) {
                T v = get(r, k);
                if (!detail::pivotUsable(v)) continue;
                if (piv < 0 || detail::pivotBetter(v, get(piv, k))) piv = r;
            }
            if (piv < 0) throw std::runtime_error("banded system singular");
            if (piv != k) swapRows(k, piv);
            T pivval = get(k, k);
            int cmax = std::min(n_ - 1, k + bu_ + bl_);
            for (int r = k + 1; r <= last; ++r) {
                T f = get(r, k) / pivval;
                set(r, k, f);  // store multiplier in place
                if (detail::pivotUsable(f))
                    for (int c = k + 1; c <= cmax; ++c) set(r, c, get(r, c) - f * get(k, c));
            }
        }
        factored_ = true;
    }

    /// Solves in place using the stored factorization.
    void solve(std::vector<T>& x) const {
        if (!factored_) throw std::logic_error("solve before factor");
        for (int k = 0; k < n_; ++k) {
            if (perm_[k] != k) std::swap(x[k], x[perm_[k]]);
            int last = std::min(n_ - 1, k + bl_);
            for (int r = k + 1; r <= last; ++r) {
                T f = get(r, k);
                if (detail::pivotUsable(f)) x[r] = x[r] - f * x[k];
            }
        }
        for (int k = n_ - 1; k >= 0; --k) {
            int cmax = std::min(n_ - 1, k + bu_ + bl_);
            T acc = x[k];
            for (int c = k + 1; c <= cmax; ++c) acc = acc - get(k, c) * x[c];
            x[k] = acc / get(k, k);
        }
    }

  private:
    T get(int i, int j) const {
        int off = j - i + bl_;
        if (off < 0 || off >= width_) return T(0);
        return a_[static_cast<size_t>(i) * width_ + off];
    }
    void set(int i, int j, const T& v) { at(i, j) = v; }

    // Band rows are stored diagonally aligned, so a row swap shifts offsets.
    void swapRows(int k, int piv) {
        perm_[k] = piv;
        int cmax = std::min(n_ - 1, k + bu_ + bl_);
        for (int c = k; c <= cmax; ++c) {
            T tmp = get(k, c);
            set(k, c, get(piv, c));
            set(piv, c, tmp);
        }
    }

    int n_, bl_, bu_, width_;
    std::vector<T> a_;
    std::vector<int> perm_;
    bool factored_ = false;
};

}  // namespace mdpx
