#pragma once

#include <stdexcept>
#include <string>

namespace tracefluct {

// Bad arguments: arity mismatches, out-of-range parameters, malformed input.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An exact enumeration would exceed its configured size limit.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    success = 0,
    violation = 1,
    configuration = 2,
    budget = 3,
};

}  // namespace tracefluct
