#pragma once

#include <stdexcept>
#include <string>

namespace ibnc {

/** Base class for everything this library throws on purpose. */
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * Bad input: malformed files, invalid parameters, contract violations.
 * The CLI maps this family to exit code 2.
 */
struct validation_error : error {
    using error::error;
};

/** Malformed file container (magic, header, shape). */
struct format_error : validation_error {
    using validation_error::validation_error;
};

/** Filesystem failure (open/read/write). */
struct io_error : validation_error {
    using validation_error::validation_error;
};

/** Infeasible compression target (rank/fraction that cannot be met). */
struct target_error : validation_error {
    using validation_error::validation_error;
};

/**
 * Numerical failure: conditioning or convergence.
 * The CLI maps this family to exit code 3.
 */
struct numeric_error : error {
    using error::error;
};

/** Iterative solver did not reach its tolerance within the iteration cap. */
struct convergence_error : numeric_error {
    using numeric_error::numeric_error;
};

}  // namespace ibnc
