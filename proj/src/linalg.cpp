#include "mdpx/linalg.hpp"

namespace mdpx {

std::vector<Rat> solveDenseRat(std::vector<std::vector<Rat>> a, std::vector<Rat> b) {
    int n = static_cast<int>(b.size());
    for (int k = 0; k < n; ++k) {
        int piv = -1;
        for (int r = k; r < n; ++r)
            if (!a[r][k].isZero()) {
                piv = r;
                break;
            }
        if (piv < 0) throw std::runtime_error("singular linear system");
        if (piv != k) {
            std::swap(a[piv], a[k]);
            std::swap(b[piv], b[k]);
        }
        Rat inv = a[k][k].inv();
        for (int r = k + 1; r < n; ++r) {
            if (a[r][k].isZero()) continue;
            Rat f = a[r][k] * inv;
            a[r][k] = Rat(0);
            for (int c = k + 1; c < n; ++c)
                if (!a[k][c].isZero()) a[r][c] -= f * a[k][c];
            b[r] -= f * b[k];
        }
    }
    std::vector<Rat> x(n);
    for (int k = n - 1; k >= 0; --k) {
        Rat acc = b[k];
        for (int c = k + 1; c < n; ++c)
            if (!a[k][c].isZero()) acc -= a[k][c] * x[c];
        x[k] = acc / a[k][k];
    }
    return x;
}

}  // namespace mdpx
