#pragma once

#include <stdexcept>
#include <string>

namespace pic {

// Caller broke an operation's preconditions (shape or length mismatch).
struct ContractError : std::logic_error
{
  using std::logic_error::logic_error;
};

// A user-supplied parameter is out of its legal range.
struct ParameterError : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

// Non-finite objective, divergence or a failed gradient check.
struct NumericalError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// CLI exit codes
enum ExitCode : int
{
  ExitOk = 0,
  ExitParameter = 2,
  ExitNumerical = 3,
  ExitIo = 4,
};

} // namespace pic
