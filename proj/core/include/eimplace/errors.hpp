#pragma once

#include <stdexcept>
#include <string>

namespace eim {

// Base for every domain error raised by the library. The CLI maps these to
// exit code 2; anything escaping that is not an Error is a bug.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text (bad JSON, missing keys). Carries a line number when
// the underlying parser reports a byte offset.
struct ParseError : Error {
  using Error::Error;
};

// Structurally invalid data: dangling net references, macros exceeding the
// grid, layouts out of canonical order, illegal intermediate states.
struct ValidationError : Error {
  using Error::Error;
};

// Invalid or infeasible configuration (bad ranges, unknown config keys,
// area budget that cannot be met).
struct ConfigError : Error {
  using Error::Error;
};

// File-system failures.
struct IoError : Error {
  using Error::Error;
};

// Placement chosen for a cell whose footprint leaves the canvas or overlaps
// occupied cells. Message names the cell and the violated constraint.
struct IllegalActionError : Error {
  using Error::Error;
};

// Operation requiring a current macro invoked after the last macro was placed.
struct EpisodeFinishedError : Error {
  using Error::Error;
};

// Non-terminal state with an empty position mask.
struct NoLegalActionError : Error {
  using Error::Error;
};

// (s, a, s') handed to reward extraction where s' != step(s, a).
struct TransitionMismatchError : Error {
  using Error::Error;
};

// No legal cell exists for some macro during expert layout construction.
struct InfeasibleError : Error {
  using Error::Error;
};

}  // namespace eim
