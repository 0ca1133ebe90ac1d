#include "rhv/error.hpp"

namespace rhv {

const char *to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::InvalidLayer: return "InvalidLayer";
    case ErrorKind::InvalidWindow: return "InvalidWindow";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::UnboundedInputBox: return "UnboundedInputBox";
    case ErrorKind::NonlinearTerm: return "NonlinearTerm";
    case ErrorKind::MixedVariableAtom: return "MixedVariableAtom";
    case ErrorKind::InfeasibleBounds: return "InfeasibleBounds";
    case ErrorKind::UnboundedVariable: return "UnboundedVariable";
    case ErrorKind::ValueOutOfBounds: return "ValueOutOfBounds";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string &message, std::optional<std::size_t> byte_offset)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message)
    , kind_(kind)
    , message_(message)
    , offset_(byte_offset)
{
}

} // namespace rhv
