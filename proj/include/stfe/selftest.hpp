#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace stfe {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct SelftestOptions {
    std::vector<int> only;          // empty runs all ten
    std::uint64_t seed = 20240611;
    std::uint64_t n_paths = 512;    // ensemble and mean-field checks
    std::uint64_t refine_paths = 8;
    std::size_t workers = 4;        // second run of the determinism check
    std::ostream* log = nullptr;    // progress lines
};

/// The invariant suite at the reference desk scale: L = 2 pi, M = 256,
/// T = 0.1, N = 32, lambda (0.5, 2, 8), u0 = 1 + 0.5 sin x.
std::vector<CriterionResult> run_selftest(const SelftestOptions& opts);

/// "PASS  3  entropy ... (detail)"
std::string format_result(const CriterionResult& r);

}  // namespace stfe
