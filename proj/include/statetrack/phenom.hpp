#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statetrack/lrnn.hpp"
#include "statetrack/precision.hpp"
#include "statetrack/rng.hpp"

namespace statetrack {

struct PeriodFinding {
    long long tail_start = 0;
    long long period = 0;
};

// Smallest period p <= max_period, with the earliest tail start t0, such that
// states[t] equals states[t+p] exactly for every t >= t0 through the end of
// the sequence, and the tail covers at least three full periods
// (states.size() - t0 >= 3p). States must be exactly comparable, i.e. already
// cast to a grid. Returns nothing if no such p exists.
std::optional<PeriodFinding> eventual_period(const std::vector<DenseMatrix>& states,
                                             long long max_period);

// The impossibility demonstrations: run a constant input through one layer
// under finite precision and observe the eventual period of the state orbit.
//  - PositiveEigs: transitions with eigenvalues in [0, 1] (scalar, diagonal,
//    or GH). Parity needs an eventual period of 2; these layers settle into
//    period 1, so they cannot represent it.
//  - NegativeReal: scalar/diagonal transitions with any real eigenvalues.
//    Counting mod m > 2 needs period m; real eigenvalues cap the period at 2.
//  - Rotation: 2-D rotation by 2*pi/m. The orbit realizes period m, which is
//    what the non-real eigenvalue buys.
enum class DemoKind { PositiveEigs, NegativeReal, Rotation };

struct DemoReport {
    DemoKind kind = DemoKind::PositiveEigs;
    int rotation_m = 0;  // Rotation only
    bool found = false;
    long long tail_start = 0;
    long long period = 0;
    bool verdict = false;  // the kind's expected period condition held

    // Power-form evaluation (scalar/diagonal transitions only): state at step
    // k recomputed as cast(sum_i cast(a^i b) + cast(a^k h0)) instead of the
    // per-step recurrence; the detected periods should agree.
    bool power_mode_ran = false;
    bool power_found = false;
    long long power_tail_start = 0;
    long long power_period = 0;
    bool modes_agree = false;

    std::string to_json_text() const;
};

// Feeds token 1 to the layer k_max times, casting the state to the grid after
// every step, and reports the detected eventual period plus the verdict for
// the requested kind. rotation_m is required (>= 2) for DemoKind::Rotation and
// ignored otherwise. A missing period is reported, not thrown.
DemoReport demo_theorem(DemoKind kind, const LrnnLayer& layer, const CastGrid& grid,
                        long long k_max, int rotation_m = 0, long long max_period = 256);

// Random single layers for the demo families. Entries are bounded away from
// +/-1 (magnitude <= 0.999) so orbits settle well within k_max = 1e5 steps on
// the default grid. Token 0 is an identity placeholder; token 1 carries the
// sampled transition.
LrnnLayer sample_positive_layer(Rng& rng);  // diagonal or GH, eigenvalues in [0, 1]
LrnnLayer sample_negative_layer(Rng& rng);  // diagonal with >= 1 negative eigenvalue
// The token-1 transition rotates by 2*pi/m on the unit circle, h0 = (1, 0).
LrnnLayer rotation_demo_layer(int m);

}  // namespace statetrack
