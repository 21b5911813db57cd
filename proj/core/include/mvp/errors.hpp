#pragma once

#include <stdexcept>
#include <string>

namespace mvp {

// Everything thrown by the library derives from Error so the CLI boundary
// can catch a single type and map it to an exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };     // dimension mismatch
struct NumericError : Error { using Error::Error; };   // NaN/Inf detected
struct ConfigError : Error { using Error::Error; };    // bad configuration
struct IoError : Error { using Error::Error; };        // file format / IO
struct GeometryError : Error { using Error::Error; };  // degenerate geometry, behind camera
struct UsageError : Error { using Error::Error; };     // API misuse
struct GenerationError : Error { using Error::Error; };// scene sampling budget exhausted

}  // namespace mvp
