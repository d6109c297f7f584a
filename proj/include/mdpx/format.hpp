#pragma once

#include <stdexcept>
#include <string>

#include "mdpx/model.hpp"

namespace mdpx {

struct SourceSpan {
    int line = 0;    // 1-based
    int column = 0;  // 1-based
};

class ParseError : public std::runtime_error {
  public:
    ParseError(SourceSpan where, const std::string& what)
        : std::runtime_error("line " + std::to_string(where.line) + ", col " +
                             std::to_string(where.column) + ": " + what),
          span(where) {}
    SourceSpan span;
};

struct ParseOptions {
    /// Permits the reserved `__fail` identifier; used when re-reading
    /// transformed models.
    bool internal = false;
};

/// Parses the line-oriented weighted-MDP format:
///
///   # comment
///   @initial ID
///   @goal ID
///   action STATE LABEL INT      header; weight is a signed integer
///   -> TARGET RAT               branch; RAT is INT or INT/INT
///
/// States are declared implicitly in order of first mention. A goal state
/// without declared actions receives the absorbing self-loop (label `loop`).
/// The result always satisfies `validate`; otherwise a ParseError is thrown.
Mdp parseMdp(const std::string& text, const ParseOptions& opts = {});

Mdp parseMdpFile(const std::string& path, const ParseOptions& opts = {});

/// Inverse of parseMdp up to structural identity: states, labels, weights
/// and probabilities (in lowest terms) survive a round trip.
std::string serializeMdp(const Mdp& model);

}  // namespace mdpx
