#pragma once

#include <optional>
#include <vector>

#include "mdpx/graph.hpp"
#include "mdpx/model.hpp"

namespace mdpx {

struct PolicyEvaluation {
    std::vector<Rat> reach;  // goal probability per state
    std::vector<Rat> pe;     // partial expectation (bias 0) per state
};

/// Exact evaluation of a memoryless deterministic scheduler: goal
/// probabilities and partial expectations of the induced chain. States whose
/// induced behaviour never leaves a goal-free recurrent class evaluate to 0.
PolicyEvaluation evalMemoryless(const Mdp& model, const std::vector<int>& choice);

struct ChainSolution {
    Rat pe;    // partial expectation with the requested bias
    Rat reach;
    std::optional<Rat> ce;  // absent when the goal is unreachable
};

/// The one-scheduler case: exact PE/CE of a Markov chain.
/// PE with bias folds in as PE[b] = PE[0] + b * reach.
ChainSolution solveMarkovChain(const Mdp& chain, const Rat& bias);

struct MemorylessScheduler {
    std::vector<int> choice;
    std::vector<Rat> peVector;
    std::vector<Rat> reachVector;
};

struct ExtremeSchedulers {
    MemorylessScheduler max;  // maximizes PE among schedulers attaining p^max everywhere
    MemorylessScheduler min;  // maximizes PE among schedulers attaining p^min everywhere
    std::vector<std::vector<Rat>> peMaxByAction;  // value of playing (s,a) once, then max
};

/// Both extremal-probability optimal schedulers, solved exactly as the least
/// super-solutions of their Bellman systems (small linear programs), with
/// witness policies extracted from tight rows and verified by evaluation.
/// Requires a collapsed model whose end components all have negative gain.
ExtremeSchedulers extremeSchedulers(const Mdp& model, const ReachabilityProfile& prof);

/// Upper saturation point for the given bias in a nonnegative-weight model:
/// above it the max-probability scheduler is optimal. 0 when every action is
/// already max-consistent.
Rat nonnegSaturationPoint(const Mdp& model, const ReachabilityProfile& prof,
                          const ExtremeSchedulers& ext, const Rat& bias);

struct ExactPeTable {
    Rat bias;        // R
    Rat saturation;  // upper saturation point for R
    long windowTop;  // least integer >= saturation + max weight, clamped at 0
    /// values[s][r] = optimal partial expectation from s with accumulated
    /// weight r+R, for 0 <= r <= windowTop; goal/fail rows are implicit.
    std::vector<std::vector<Rat>> values;
    std::vector<std::vector<int>> scheduler;  // argmax actions, -1 on absorbing rows

    const Rat& answer(int initial) const { return values[initial][0]; }
};

/// Exact optimal partial expectations for nonnegative weights via saturated
/// backward induction over accumulated weight. Requires finite optimum and a
/// model with all end components of negative gain.
ExactPeTable nonnegSolveExact(const Mdp& model, const ReachabilityProfile& prof,
                              const ExtremeSchedulers& ext, const Rat& bias);

}  // namespace mdpx
