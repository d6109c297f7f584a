#pragma once

#include <stdexcept>
#include <string>

namespace mdpx {

enum class SolverErrorCode {
    WeightDivergent,    // positively weight-divergent end component
    CriticalScheduler,  // positive cycle reachable with goal-probability zero
    GoalUnreachable,
    NegativeWeights,  // exact nonnegative-weight solver fed negative weights
    Unsupported,
    ResourceLimit,
};

class SolverError : public std::runtime_error {
  public:
    SolverError(SolverErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    SolverErrorCode code() const { return code_; }

  private:
    SolverErrorCode code_;
};

}  // namespace mdpx
