#pragma once

#include <stdexcept>
#include <string>

namespace edpred {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-range index (slice z, row/column access).
struct IndexError : Error {
    using Error::Error;
};

// Mask label outside {0,1,2} or a label argument outside {1,2}.
struct InvalidLabelError : Error {
    using Error::Error;
};

// An operation needed a non-empty structure (prostate voxels, true pixels).
struct EmptyStructureError : Error {
    using Error::Error;
};

// Declared dims do not match payload length.
struct SizeMismatchError : Error {
    using Error::Error;
};

// Malformed or unsupported file content (headers, magic bytes, datatypes).
struct FormatError : Error {
    using Error::Error;
};

// CSV header/value violates the fixed schema.
struct SchemaError : Error {
    using Error::Error;
};

// A column cannot be imputed (entirely missing).
struct ImputeError : Error {
    using Error::Error;
};

// Degenerate numeric input: zero variance, single-class labels.
struct DegenerateInputError : Error {
    using Error::Error;
};

// Ray/centroid geometry violated a precondition.
struct GeometryError : Error {
    using Error::Error;
};

// Inconsistent model/pipeline configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace edpred
