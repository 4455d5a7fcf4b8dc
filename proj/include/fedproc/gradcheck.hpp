#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedproc {

// Central finite-difference verification of the reverse-mode gradients. The
// numeric side only ever calls the forward pass on perturbed parameters, so the
// two routes stay independent.
struct GradCheckCase {
    std::string name;
    std::size_t points = 0;
    double max_rel_err = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    bool all_passed = false;
    double seconds = 0.0;
};

// Checks both encoder kinds against the cross-entropy loss, the prototypical
// contrastive loss, and the blend at alpha in {0, 0.5, 1}: `points` random
// parameter coordinates per case, step h = 1e-5, relative error bound 1e-4.
GradCheckReport run_gradient_checks(std::uint64_t seed, std::size_t points_per_case = 10);

} // namespace fedproc
