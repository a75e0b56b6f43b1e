#pragma once

#include <stdexcept>
#include <string>

namespace serveadv {

/// Input file or schema problem: missing columns, unreadable file,
/// excessive unparseable rows. Mapped to process exit code 2.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No usable observations remain after filtering. Exit code 3.
struct EmptyAfterFiltersError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sampler could not produce a finite starting point. Exit code 4.
struct SamplerInitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fit reports being compared were produced from different datasets. Exit code 5.
struct CompareMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A command needs posterior draws that have not been produced yet. Exit code 6.
struct MissingDrawsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace serveadv
