#ifndef KCL_ERRORS_HPP
#define KCL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kcl {

/// Dimension or length disagreement between operands.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A caller broke a documented precondition (bad range, empty input, ...).
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A file or byte stream is not structurally valid (bad magic, truncation, checksum).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A file is structurally valid but written by an incompatible format version.
struct VersionError : FormatError {
    explicit VersionError(const std::string& msg) : FormatError(msg) {}
};

}  // namespace kcl

#endif  // KCL_ERRORS_HPP
