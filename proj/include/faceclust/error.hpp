#pragma once

#include <stdexcept>
#include <string>

namespace faceclust {

// Coarse error categories. The C API maps these one-to-one onto fc_status.
enum class ErrorCode {
    Argument = 1,
    Io,
    Decode,
    Format,
    InsufficientData,
    Degenerate,
    BoostingStalled,
    TrainingFailure,
    Split,
    Validation,
    NoFace,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::Argument, what);
}

}  // namespace faceclust
