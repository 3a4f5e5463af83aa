#ifndef INKSTRIP_ERRORS_HPP
#define INKSTRIP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace inkstrip {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration (bad flags, malformed config file, bad mix). CLI exit 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem-level failure (cannot open/create/write). CLI exit 3.
struct IoError : Error {
    using Error::Error;
};

/// Bad input data (dimension mismatch, malformed raster, broken manifest). CLI exit 4.
struct DataError : Error {
    using Error::Error;
};

/// Raster dimensions do not satisfy an operation's contract.
struct DimensionError : DataError {
    using DataError::DataError;
};

/// PGM parse failure. Each malformation is a distinct kind.
struct PgmError : DataError {
    enum class Kind { BadMagic, BadHeader, BadMaxval, Truncated };
    Kind kind;
    PgmError(Kind k, const std::string& msg) : DataError(msg), kind(k) {}
};

/// Checkpoint file failure. CLI exit 5.
struct CheckpointError : Error {
    enum class Kind { BadMagic, BadPlan, Truncated, BadFormat };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace inkstrip

#endif
