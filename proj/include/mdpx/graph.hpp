#pragma once

#include <utility>
#include <vector>

#include "mdpx/model.hpp"

namespace mdpx {

/// Strongly connected sub-MDP: a set of states E and, per state, a non-empty
/// subset of enabled actions all of whose successors stay inside E.
struct EndComponent {
    std::vector<int> states;                  // ascending
    std::vector<std::vector<int>> actionIdx;  // aligned with `states`
    int indexOf(int state) const;             // -1 when absent
};

struct MecDecomposition {
    std::vector<EndComponent> mecs;   // ordered by lowest member state
    std::vector<int> membership;      // state -> mec index, -1 when in none
};

MecDecomposition mecDecompose(const Mdp& model);

struct QuotientResult {
    Mdp quotient;
    std::vector<int> stateMap;  // original state -> quotient state
    std::vector<int> classOf;   // quotient state -> mec index, -1 for singletons
    std::vector<bool> dead;     // quotient state kept only a placeholder self-loop
    /// (original state, action index) behind each quotient action.
    std::vector<std::vector<std::pair<int, int>>> actionOrigin;
};

/// Collapses every MEC to a single state keeping only leaving actions.
/// States that end up with no action receive a weight-0 self-loop and are
/// flagged in `dead`.
QuotientResult mecQuotient(const Mdp& model, const MecDecomposition& dec);

struct ReachabilityProfile {
    std::vector<Rat> pMax, pMin;
    std::vector<std::vector<Rat>> pMaxByAction, pMinByAction;
    std::vector<std::vector<bool>> actMax, actMin;

    bool allActionsMin(int s) const;
};

/// Exact extremal goal-reachability probabilities plus the locally consistent
/// action sets. Qualitative graph analysis first, then exact policy iteration
/// with rational linear solves on the reduced systems.
ReachabilityProfile reachProbabilities(const Mdp& model);

struct MeanPayoffResult {
    Rat gain;
    std::vector<int> policy;     // per EC-local state index, chosen action (model index)
    std::vector<Rat> potential;  // feasible super-harmonic potential from the gain program
};

/// Maximal expected mean payoff of an end component (constant across it) with
/// a memoryless deterministic witness policy. Exact; gain and potential come
/// from the 2|E|-variable linear program, the policy from its dual support.
MeanPayoffResult maxMeanPayoff(const Mdp& model, const EndComponent& ec);

// Shared graph utilities.
std::vector<bool> statesReachingGoal(const Mdp& model);
std::vector<int> sccDecompose(int n, const std::vector<std::vector<int>>& adj,
                              int& sccCount);  // returns component id per node

}  // namespace mdpx
