#pragma once

#include <string>
#include <vector>

#include "statetrack/fsa.hpp"

namespace statetrack {

// One row of the `verify` table: a named property suite that either held on
// every sampled instance or did not. `detail` summarizes what was exercised
// (instance counts, tolerances, observed extremes) so failures are actionable.
struct CheckResult {
    std::string key;    // table row key, e.g. "P1.2"
    std::string title;  // property under test, stated in one line
    std::string detail; // what was checked and what was observed
    bool pass = false;
};

// Runs one verification suite (or all of them) and returns the table rows.
// Suite names, case-insensitive:
//   t1     - constant-input orbits of nonnegative-eigenvalue layers settle to
//            period 1 under finite precision
//   t2     - negative-real layers settle to period <= 2; plane rotations by
//            2*pi/m realize period m
//   prop1  - contraction, factorization, and eigenvalue-location properties
//            of generalized-Householder products (rows P1.1, P1.2, P1.3)
//   t3     - compiled parity / cyclic / permutation-group models match the
//            word-problem oracles exactly
//   t4     - hand-built permutation-reset cascades and their compiled LRNN
//            executors produce identical output codes
//   appe   - the two-layer reflection adder matches the mod-m oracle and its
//            second-layer transitions are involutions
//   all    - every suite above, in table order
// Unknown names throw ContractError. Results are deterministic.
std::vector<CheckResult> run_verification(const std::string& suite);

// Renders results as an aligned text table with a trailing summary line.
std::string format_verification_table(const std::vector<CheckResult>& results);

// Hand-built permutation-reset cascade fixtures shared by the verification
// suite, the acceptance harness, and CLI demos.
//
// Single layer tracking the running parity of the bits seen so far.
Cascade parity_cascade();
// Two layers recognizing "no two consecutive zeros": layer 1 tracks the
// parity of the current zero run, layer 2 latches into a dead state when a
// second consecutive zero is observed.
Cascade no_consecutive_zeros_cascade();

}  // namespace statetrack
