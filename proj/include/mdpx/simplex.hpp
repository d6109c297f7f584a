#pragma once

#include <vector>

#include "mdpx/rational.hpp"

namespace mdpx {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    std::vector<Rat> x;  // values of the free variables
    Rat objective;
};

/// Minimizes c.x subject to A x >= rhs with all variables free, using exact
/// two-phase primal simplex with Bland's rule (no cycling). Intended for
/// small dense programs; everything is rational, nothing is rounded.
LpResult solveLpMinFree(const std::vector<Rat>& c, const std::vector<std::vector<Rat>>& a,
                        const std::vector<Rat>& rhs);

}  // namespace mdpx
