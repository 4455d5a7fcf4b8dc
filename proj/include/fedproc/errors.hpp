#pragma once

#include <stdexcept>
#include <string>

namespace fedproc {

// Invalid static configuration (bad spec fields, bad hyperparameters, missing files).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse detected at call time (out-of-range label, non-scalar loss root, ...).
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent federation state (mismatched shapes across clients, class with no
// prototype contributor, ...).
struct protocol_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerically degenerate input, e.g. a zero-norm vector fed to cosine similarity.
// Raised instead of epsilon-fudging so upstream bugs stay visible.
struct degenerate_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed external data file (IDX images, checkpoints).
struct ingestion_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fedproc
