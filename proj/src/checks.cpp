#include "statetrack/checks.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "statetrack/common.hpp"
#include "statetrack/compile.hpp"
#include "statetrack/linalg.hpp"
#include "statetrack/lrnn.hpp"
#include "statetrack/phenom.hpp"
#include "statetrack/precision.hpp"
#include "statetrack/rng.hpp"
#include "statetrack/tasks.hpp"

namespace statetrack {
namespace {

std::vector<int> random_word(Rng& rng, int alphabet, int len) {
    std::vector<int> w(static_cast<size_t>(len));
    for (int& x : w) x = static_cast<int>(rng.below(static_cast<uint64_t>(alphabet)));
    return w;
}

std::vector<double> random_unit_vector(Rng& rng, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm2 += x * x;
        }
    } while (norm2 < 1e-12);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

GhProduct random_gh_product(Rng& rng, int n, int k, double beta_min, double beta_max) {
    GhProduct p(n);
    for (int i = 0; i < k; ++i) {
        p.factors.emplace_back(random_unit_vector(rng, n), rng.uniform(beta_min, beta_max));
    }
    return p;
}

DenseMatrix random_contraction(Rng& rng, int n, double target_norm) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    const double top = spectral_norm(m);
    if (top > 0) m = (target_norm / top) * m;
    return m;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

// --- suite bodies ------------------------------------------------------

CheckResult check_period_one_settling() {
    CheckResult r{"T1", "nonnegative-eigenvalue layers settle to period 1 under finite precision",
                  "", false};
    const CastGrid grid = CastGrid::default_demo();
    Rng rng(4101);
    const int layers = 50;
    int ok = 0;
    long long worst_period = 0;
    for (int i = 0; i < layers; ++i) {
        LrnnLayer layer = sample_positive_layer(rng);
        const DemoReport rep = demo_theorem(DemoKind::PositiveEigs, layer, grid, 100000);
        if (rep.verdict) ++ok;
        worst_period = std::max(worst_period, rep.found ? rep.period : -1);
    }
    r.pass = ok == layers;
    r.detail = std::to_string(ok) + "/" + std::to_string(layers) +
               " sampled layers reached period 1 within k_max=100000 (max observed period " +
               std::to_string(worst_period) + ")";
    return r;
}

CheckResult check_negative_and_rotation_periods() {
    CheckResult r{"T2",
                  "negative-real layers settle to period <= 2; 2*pi/m rotations realize period m",
                  "", false};
    const CastGrid grid = CastGrid::default_demo();
    Rng rng(4201);
    const int layers = 50;
    int ok = 0;
    for (int i = 0; i < layers; ++i) {
        LrnnLayer layer = sample_negative_layer(rng);
        const DemoReport rep = demo_theorem(DemoKind::NegativeReal, layer, grid, 100000);
        if (rep.verdict) ++ok;
    }
    std::string rot;
    bool rot_ok = true;
    for (int m : {3, 4, 5}) {
        const DemoReport rep =
            demo_theorem(DemoKind::Rotation, rotation_demo_layer(m), grid, 100000, m);
        rot_ok = rot_ok && rep.verdict;
        if (!rot.empty()) rot += ",";
        rot += std::to_string(rep.found ? rep.period : -1);
    }
    r.pass = ok == layers && rot_ok;
    r.detail = std::to_string(ok) + "/" + std::to_string(layers) +
               " negative-real layers at period <= 2; rotation periods for m=3,4,5: " + rot;
    return r;
}

CheckResult check_gh_contraction() {
    CheckResult r{"P1.1", "products of GH factors with eigenvalues in [-1,1] are contractions", "",
                  false};
    Rng rng(4301);
    const int trials = 100;
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        const int n = rng.range_int(1, 8);
        const int k = rng.range_int(1, 3 * n);
        const GhProduct p = random_gh_product(rng, n, k, 0.0, 2.0);
        worst = std::max(worst, spectral_norm(gh_product_matrix(p)));
    }
    r.pass = worst <= 1.0 + 1e-10;
    r.detail = std::to_string(trials) + " random products (n <= 8): max spectral norm " +
               fmt(worst) + " (bound 1+1e-10)";
    return r;
}

CheckResult check_gh_factorization() {
    CheckResult r{"P1.2", "norm <= 1 matrices factor into at most 3n GH factors", "", false};
    Rng rng(4401);
    const int trials = 50;
    double worst_err = 0.0;
    size_t over_budget = 0;
    for (int i = 0; i < trials; ++i) {
        const int n = rng.range_int(1, 8);
        const double target = (i % 4 == 0) ? 1.0 : rng.uniform(0.05, 0.999);
        const DenseMatrix m = random_contraction(rng, n, target);
        const GhProduct p = gh_factorize(m);
        if (p.size() > static_cast<size_t>(3 * n)) ++over_budget;
        worst_err = std::max(worst_err, gh_product_matrix(p).max_abs_diff(m));
    }
    r.pass = worst_err <= 1e-6 && over_budget == 0;
    r.detail = std::to_string(trials) + " random contractions (n <= 8): max reconstruction error " +
               fmt(worst_err) + " (tol 1e-6), " + std::to_string(over_budget) +
               " factorizations over the 3n budget";
    return r;
}

CheckResult check_gh_eigenvalue_locations() {
    CheckResult r{"P1.3", "eigenvalues of GH products stay in the closed unit disk; short "
                          "nonnegative products stay real in [0,1]",
                  "", false};
    Rng rng(4501);
    int bad_disk = 0;
    for (int i = 0; i < 120; ++i) {
        const int n = rng.range_int(2, 4);
        const int k = rng.range_int(1, 6);
        // beta in [0, 2) puts every per-factor eigenvalue in (-1, 1].
        const GhProduct p = random_gh_product(rng, n, k, 0.0, 2.0);
        for (const std::complex<double>& lam : eigenvalues_small(gh_product_matrix(p))) {
            if (!(std::abs(lam) < 1.0 + 1e-8 || std::abs(lam - 1.0) <= 1e-8)) ++bad_disk;
        }
    }
    int bad_real = 0;
    for (int i = 0; i < 80; ++i) {
        const int n = rng.range_int(2, 4);
        const int k = rng.range_int(1, 2);
        // beta in [0, 1] puts every per-factor eigenvalue in [0, 1].
        const GhProduct p = random_gh_product(rng, n, k, 0.0, 1.0);
        for (const std::complex<double>& lam : eigenvalues_small(gh_product_matrix(p))) {
            if (std::abs(lam.imag()) > 1e-8 || lam.real() < -1e-8 || lam.real() > 1.0 + 1e-8)
                ++bad_real;
        }
    }
    r.pass = bad_disk == 0 && bad_real == 0;
    r.detail = "120 products (k <= 6): " + std::to_string(bad_disk) +
               " eigenvalues outside the unit disk; 80 products (k <= 2, eigenvalues in [0,1]): " +
               std::to_string(bad_real) + " off the real [0,1] segment";
    return r;
}

CheckResult check_compiled_word_problems() {
    CheckResult r{"T3", "compiled parity / cyclic / permutation-group models match the oracles", "",
                  false};
    Rng rng(4601);
    int bad = 0;
    long long positions = 0;

    const LrnnModel parity = compile_parity();
    for (int w = 0; w < 50; ++w) {
        const std::vector<int> word = random_word(rng, 2, 200);
        const std::vector<int> got = model_run(parity, word);
        const std::vector<int> want = word_problem_oracle_cyclic(2, word);
        for (size_t t = 0; t < word.size(); ++t, ++positions) bad += got[t] != want[t];
    }
    for (int m : {5, 12}) {
        const LrnnModel counter = compile_cyclic(m);
        for (int w = 0; w < 30; ++w) {
            const std::vector<int> word = random_word(rng, m, 300);
            const std::vector<int> got = model_run(counter, word);
            const std::vector<int> want = word_problem_oracle_cyclic(m, word);
            for (size_t t = 0; t < word.size(); ++t, ++positions) bad += got[t] != want[t];
        }
    }
    const std::vector<Permutation> gens =
        group_generator_set(GroupSpec::symmetric(5), VariantSpec::swaps_only());
    const LrnnModel s5 = compile_permutation_group(5, gens);
    for (int w = 0; w < 20; ++w) {
        const std::vector<int> word = random_word(rng, static_cast<int>(gens.size()), 200);
        std::vector<uint64_t> ranks(word.size());
        for (size_t t = 0; t < word.size(); ++t)
            ranks[t] = perm_rank(gens[static_cast<size_t>(word[t])]);
        const std::vector<int> got = model_run(s5, word);
        const std::vector<uint64_t> want = word_problem_oracle_symmetric(5, ranks);
        for (size_t t = 0; t < word.size(); ++t, ++positions)
            bad += static_cast<uint64_t>(got[t]) != want[t];
    }
    r.pass = bad == 0;
    r.detail = std::to_string(bad) + "/" + std::to_string(positions) +
               " mismatched positions across parity, cyclic m=5,12, and swap-generated S5 models";
    return r;
}

CheckResult check_cascade_executors() {
    CheckResult r{"T4", "compiled cascade executors reproduce direct cascade simulation", "",
                  false};
    Rng rng(4701);
    int bad = 0;
    long long words = 0;
    for (const Cascade& c : {parity_cascade(), no_consecutive_zeros_cascade()}) {
        const LrnnModel model = cascade_to_lrnn(c);
        // Exhaustive short words.
        for (int len = 1; len <= 8; ++len) {
            for (int code = 0; code < (1 << len); ++code) {
                std::vector<int> word(static_cast<size_t>(len));
                for (int t = 0; t < len; ++t) word[static_cast<size_t>(t)] = (code >> t) & 1;
                ++words;
                if (model_run(model, word) != cascade_run(c, word).codes) ++bad;
            }
        }
        // Longer random words.
        for (int w = 0; w < 100; ++w) {
            const std::vector<int> word = random_word(rng, 2, 50);
            ++words;
            if (model_run(model, word) != cascade_run(c, word).codes) ++bad;
        }
    }
    r.pass = bad == 0;
    r.detail = std::to_string(bad) + "/" + std::to_string(words) +
               " words with mismatched output codes over the parity and no-00 cascades";
    return r;
}

CheckResult check_reflection_adder() {
    CheckResult r{"AppE",
                  "two-layer reflection adder matches the mod-m oracle with involutive "
                  "second-layer transitions",
                  "", false};
    Rng rng(4801);
    int bad = 0;
    long long positions = 0;
    double worst_inv = 0.0;
    for (int m : {3, 5}) {
        const LrnnModel adder = compile_mod_reflections(m);
        for (const Transition& a : adder.layers.at(1).a_map) {
            const DenseMatrix mat = a.realize();
            worst_inv = std::max(worst_inv,
                                 (mat * mat).max_abs_diff(DenseMatrix::identity(mat.rows())));
        }
        for (int w = 0; w < 100; ++w) {
            const std::vector<int> word = random_word(rng, m, 200);
            const std::vector<int> got = model_run(adder, word);
            const std::vector<int> want = word_problem_oracle_cyclic(m, word);
            for (size_t t = 0; t < word.size(); ++t, ++positions) bad += got[t] != want[t];
        }
    }
    r.pass = bad == 0 && worst_inv <= 1e-12;
    r.detail = std::to_string(bad) + "/" + std::to_string(positions) +
               " mismatched positions for m=3,5; max |A^2 - I| over second-layer transitions " +
               fmt(worst_inv) + " (tol 1e-12)";
    return r;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

Cascade parity_cascade() {
    Cascade c;
    Fsa flip;
    flip.alphabet_size = 2;
    flip.num_states = 2;
    flip.start = 0;
    flip.delta = {{0, 1}, {1, 0}};  // state tracks the running parity
    c.layers.push_back(flip);
    c.validate();
    return c;
}

Cascade no_consecutive_zeros_cascade() {
    Cascade c;
    Fsa zero_run;
    zero_run.alphabet_size = 2;
    zero_run.num_states = 2;
    zero_run.start = 0;
    // Letter 0 flips the zero-run parity, letter 1 resets it.
    zero_run.delta = {{1, 0}, {0, 0}};
    Fsa latch;
    // Codes pair the letter with layer 1's post state: code 0 means a 0 was
    // read and the run parity returned to even, i.e. a second consecutive
    // zero. That code sends the latch to the dead state; everything else
    // leaves it alone.
    latch.alphabet_size = 4;
    latch.num_states = 2;
    latch.start = 0;
    latch.delta = {{1, 0, 0, 0}, {1, 1, 1, 1}};
    c.layers = {zero_run, latch};
    c.validate();
    return c;
}

std::vector<CheckResult> run_verification(const std::string& suite) {
    const std::string s = lower(suite);
    std::vector<CheckResult> out;
    const bool all = s.empty() || s == "all";
    bool known = all;
    if (all || s == "t1") {
        out.push_back(check_period_one_settling());
        known = true;
    }
    if (all || s == "t2") {
        out.push_back(check_negative_and_rotation_periods());
        known = true;
    }
    if (all || s == "prop1") {
        out.push_back(check_gh_contraction());
        out.push_back(check_gh_factorization());
        out.push_back(check_gh_eigenvalue_locations());
        known = true;
    }
    if (all || s == "t3") {
        out.push_back(check_compiled_word_problems());
        known = true;
    }
    if (all || s == "t4") {
        out.push_back(check_cascade_executors());
        known = true;
    }
    if (all || s == "appe") {
        out.push_back(check_reflection_adder());
        known = true;
    }
    require(known, "run_verification: unknown suite '" + suite +
                       "' (expected all, t1, t2, prop1, t3, t4, or appe)");
    return out;
}

std::string format_verification_table(const std::vector<CheckResult>& results) {
    std::ostringstream os;
    size_t passed = 0;
    for (const CheckResult& r : results) {
        os << (r.pass ? "PASS" : "FAIL") << "  " << r.key;
        for (size_t i = r.key.size(); i < 6; ++i) os << ' ';
        os << r.title << "\n            " << r.detail << "\n";
        passed += r.pass ? 1 : 0;
    }
    os << (passed == results.size() ? "OK" : "FAILED") << ": " << passed << "/" << results.size()
       << " verification suites passed\n";
    return os.str();
}

}  // namespace statetrack
