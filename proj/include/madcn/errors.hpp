#pragma once

#include <stdexcept>
#include <string>

namespace madcn {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes.
struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct schema_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct encoding_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct argument_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct evaluation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct singularity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_target_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace madcn
