#pragma once

#include <stdexcept>
#include <string>

namespace decaug {

/// Base of every error the engine throws. `kind()` is a stable machine-readable tag
/// used by the CLI's one-line diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define DECAUG_DEFINE_ERROR(Name)                                                   \
    class Name : public Error {                                                     \
    public:                                                                         \
        explicit Name(const std::string& what) : Error(#Name, what) {}              \
    };

DECAUG_DEFINE_ERROR(ParseError)
DECAUG_DEFINE_ERROR(SchemaError)
DECAUG_DEFINE_ERROR(DanglingReference)
DECAUG_DEFINE_ERROR(GeometryError)
DECAUG_DEFINE_ERROR(DecodeError)
DECAUG_DEFINE_ERROR(IoError)
DECAUG_DEFINE_ERROR(EmptyMask)
DECAUG_DEFINE_ERROR(HoleCoversImage)
DECAUG_DEFINE_ERROR(OutOfBounds)
DECAUG_DEFINE_ERROR(MissingPrior)
DECAUG_DEFINE_ERROR(NoSamples)
DECAUG_DEFINE_ERROR(Unnormalizable)

#undef DECAUG_DEFINE_ERROR

}  // namespace decaug
