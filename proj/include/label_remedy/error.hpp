#ifndef LABEL_REMEDY_ERROR_HPP
#define LABEL_REMEDY_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace label_remedy {

enum class ErrorCode {
    DimensionMismatch,
    NonFiniteData,
    EmptyClass,
    InvalidArgument,
    ZeroNormSample,
    NoPairs,
    EmptyTrainingSet,
    DegenerateTrainingSet,
    EigSolverFailure,
    SingularSystem,
    ParseError,
    ChecksumMismatch,
    ShapeMismatch,
    LengthMismatch,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroNormSample: return "ZeroNormSample";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::DegenerateTrainingSet: return "DegenerateTrainingSet";
    case ErrorCode::EigSolverFailure: return "EigSolverFailure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace label_remedy

#endif
