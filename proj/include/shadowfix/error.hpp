#pragma once

#include <stdexcept>
#include <string>

namespace shadowfix {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exception carrying a module-specific error code.
template <typename Code>
class CodedError : public Error {
public:
    CodedError(Code code, const std::string& what) : Error(what), code_(code) {}

    [[nodiscard]] Code code() const noexcept { return code_; }

private:
    Code code_;
};

}  // namespace shadowfix
