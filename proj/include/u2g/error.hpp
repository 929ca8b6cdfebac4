#pragma once

#include <stdexcept>
#include <string>

namespace u2g {

// File/format problems in input data (CSV, vocab, graph files).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A label value with no mapping, or a label out of range.
struct LabelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (bad fractions, impossible vocab size, ...).
struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension mismatch.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent artifacts (vocab vs. graph vs. checkpoint).
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace u2g
