#pragma once

#include <stdexcept>
#include <string>

namespace xfrl {

// All rejection paths throw one of these; the CLI maps them to exit codes.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed shapes, incompatible dimensions, infeasible stacks.
struct shape_error : error {
    using error::error;
};

// Domain violations on otherwise well-shaped values (bad weights, bad ranges).
struct value_error : error {
    using error::error;
};

// Filesystem, serialization and corruption problems.
struct io_error : error {
    using error::error;
};

// Config file problems; messages carry line numbers.
struct config_error : error {
    using error::error;
};

}  // namespace xfrl
