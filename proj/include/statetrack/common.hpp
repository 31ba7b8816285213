#pragma once

#include <stdexcept>
#include <string>

namespace statetrack {

// Thrown when an operation receives input that violates its documented contract
// (bad dimensions, out-of-range parameters, malformed files, NaN where finite
// values are required).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a decoder cannot map a state back to a label, i.e. the state has
// drifted off the codebook the decoder was built for.
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a model construction would need a transition eigenvalue outside
// the configured eigenvalue range.
struct EigenRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// Literal-message overload: avoids materializing a std::string on every call
// in hot loops; the string is only built when the check actually fails.
inline void require(bool cond, const char* msg) {
    if (!cond) throw ContractError(msg);
}

// Worker-thread cap shared by all batch utilities. Reads STATETRACK_THREADS
// once; values < 1 or unparsable fall back to the hardware count.
int max_threads();

}  // namespace statetrack
