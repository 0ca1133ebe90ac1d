#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rhv {

enum class ErrorKind {
    CycleDetected,
    DimensionMismatch,
    DanglingReference,
    InvalidLayer,
    InvalidWindow,
    SyntaxError,
    SchemaError,
    UnboundedInputBox,
    NonlinearTerm,
    MixedVariableAtom,
    InfeasibleBounds,
    UnboundedVariable,
    ValueOutOfBounds,
    InvalidModel,
    Io,
};

const char *to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &message,
          std::optional<std::size_t> byte_offset = std::nullopt);

    ErrorKind kind() const noexcept { return kind_; }
    std::optional<std::size_t> byte_offset() const noexcept { return offset_; }
    // The message without the kind prefix that what() carries.
    const std::string &message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
    std::optional<std::size_t> offset_;
};

} // namespace rhv
