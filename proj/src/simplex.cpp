#include "mdpx/simplex.hpp"

#include <stdexcept>

namespace mdpx {

namespace {

/// Full-tableau primal simplex over rationals, Bland's rule.
/// Standard form: min c.y  s.t.  M y = b, y >= 0, b >= 0.
class Tableau {
  public:
    Tableau(int m, int n) : m_(m), n_(n), rows_(m, std::vector<Rat>(n)), rhs_(m), basis_(m, -1) {}

    std::vector<Rat>& row(int i) { return rows_[i]; }
    Rat& rhs(int i) { return rhs_[i]; }
    int basis(int i) const { return basis_[i]; }
    void setBasis(int i, int j) { basis_[i] = j; }

    void pivot(int r, int col) {
        Rat inv = rows_[r][col].inv();
        for (int j = 0; j < n_; ++j) rows_[r][j] *= inv;
        rhs_[r] *= inv;
        for (int i = 0; i < m_; ++i) {
            if (i == r || rows_[i][col].isZero()) continue;
            Rat f = rows_[i][col];
            for (int j = 0; j < n_; ++j)
                if (!rows_[r][j].isZero()) rows_[i][j] -= f * rows_[r][j];
            rows_[i][col] = Rat(0);
            rhs_[i] -= f * rhs_[r];
        }
        basis_[r] = col;
    }

    /// Runs simplex for costs `c` (size n). Returns false when unbounded.
    bool minimize(const std::vector<Rat>& c, const std::vector<bool>& allowed) {
        while (true) {
            // reduced costs from scratch: small programs, clarity over speed
            int enter = -1;
            for (int j = 0; j < n_; ++j) {
                if (!allowed[j]) continue;
                Rat red = c[j];
                for (int i = 0; i < m_; ++i)
                    if (!rows_[i][j].isZero() && basis_[i] >= 0) red -= c[basis_[i]] * rows_[i][j];
                if (red.sign() < 0) {
                    enter = j;  // Bland: first improving index
                    break;
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            Rat best;
            for (int i = 0; i < m_; ++i) {
                if (rows_[i][enter].sign() <= 0) continue;
                Rat ratio = rhs_[i] / rows_[i][enter];
                if (leave < 0 || ratio < best || (ratio == best && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
    }

    int m_, n_;
    std::vector<std::vector<Rat>> rows_;
    std::vector<Rat> rhs_;
    std::vector<int> basis_;
};

}  // namespace

LpResult solveLpMinFree(const std::vector<Rat>& c, const std::vector<std::vector<Rat>>& a,
                        const std::vector<Rat>& rhs) {
    int nf = static_cast<int>(c.size());
    int m = static_cast<int>(a.size());
    // y = [u(nf) ; v(nf) ; slack(m) ; artificial(m)], x = u - v,
    // A x - s = b  with s, u, v >= 0.
    int n = 2 * nf + 2 * m;
    Tableau t(m, n);
    std::vector<Rat> costs(n), phase1(n);
    for (int i = 0; i < m; ++i) {
        bool flip = rhs[i].sign() < 0;
        Rat sgn = flip ? Rat(-1) : Rat(1);
        for (int j = 0; j < nf; ++j) {
            t.row(i)[j] = sgn * a[i][j];
            t.row(i)[nf + j] = -sgn * a[i][j];
        }
        t.row(i)[2 * nf + i] = -sgn;         // slack of the >= row
        t.row(i)[2 * nf + m + i] = Rat(1);   // artificial
        t.rhs(i) = sgn * rhs[i];
        t.setBasis(i, 2 * nf + m + i);
        phase1[2 * nf + m + i] = Rat(1);
    }
    for (int j = 0; j < nf; ++j) {
        costs[j] = c[j];
        costs[nf + j] = -c[j];
    }

    LpResult res;
    std::vector<bool> allowAll(n, true);
    if (!t.minimize(phase1, allowAll)) throw std::logic_error("phase-1 unbounded");
    Rat p1;
    for (int i = 0; i < m; ++i)
        if (t.basis(i) >= 2 * nf + m) p1 += t.rhs(i);
    if (!p1.isZero()) {
        res.status = LpStatus::Infeasible;
        return res;
    }
    // drive leftover artificials out of the basis where possible
    std::vector<bool> allowReal(n, true);
    for (int j = 2 * nf + m; j < n; ++j) allowReal[j] = false;
    for (int i = 0; i < m; ++i) {
        if (t.basis(i) < 2 * nf + m) continue;
        int col = -1;
        for (int j = 0; j < 2 * nf + m; ++j)
            if (!t.row(i)[j].isZero()) {
                col = j;
                break;
            }
        if (col >= 0) t.pivot(i, col);
        // otherwise the row is 0 = 0 and harmless
    }

    if (!t.minimize(costs, allowReal)) {
        res.status = LpStatus::Unbounded;
        return res;
    }

    res.status = LpStatus::Optimal;
    res.x.assign(nf, Rat(0));
    std::vector<Rat> y(n);
    for (int i = 0; i < m; ++i)
        if (t.basis(i) >= 0) y[t.basis(i)] = t.rhs(i);
    for (int j = 0; j < nf; ++j) {
        res.x[j] = y[j] - y[nf + j];
        res.objective += c[j] * res.x[j];
    }
    return res;
}

}  // namespace mdpx
