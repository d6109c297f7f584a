#pragma once

#include <string>

#include "mdpx/format.hpp"
#include "mdpx/model.hpp"

namespace mdpx::test {

inline std::string fixturePath(const std::string& name) {
    return std::string(MDPX_FIXTURES_DIR) + "/" + name;
}

inline Mdp loadFixture(const std::string& name) { return parseMdpFile(fixturePath(name)); }

// Exact comparisons against sqrt(5) via squaring.
inline bool leSqrt5(const Rat& a) {
    if (a.sign() < 0) return true;
    return a * a <= Rat(5);
}
inline bool geSqrt5(const Rat& a) {
    if (a.sign() < 0) return false;
    return a * a >= Rat(5);
}

// lo <= 3 - sqrt(5) <= hi, exactly.
inline bool bracketsGoldenPe(const Rat& lo, const Rat& hi) {
    return leSqrt5(Rat(3) - hi) && geSqrt5(Rat(3) - lo);
}

// |v - 3/(3+sqrt(5))| <= tol, exactly. 3/(3+sqrt5) = (9-3sqrt5)/4.
inline bool nearGoldenCe(const Rat& v, const Rat& tol) {
    // |v - (9-3sqrt5)/4| <= tol  <=>  |(9-4v) - 3sqrt5| <= 4tol
    Rat u = Rat(9) - Rat(4) * v;
    Rat lo = (u - Rat(4) * tol) / Rat(3);
    Rat hi = (u + Rat(4) * tol) / Rat(3);
    return leSqrt5(lo) && geSqrt5(hi);
}

}  // namespace mdpx::test
