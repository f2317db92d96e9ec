#pragma once

#include <stdexcept>
#include <string>

namespace dmmv {

/// Base class for every error raised by the library. `kind()` is a stable
/// identifier that tools and tests can match on.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what);
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define DMMV_DECLARE_ERROR(Name)                                               \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

DMMV_DECLARE_ERROR(NoDominantPeriod);
DMMV_DECLARE_ERROR(PeriodTooLarge);
DMMV_DECLARE_ERROR(GeometryMismatch);
DMMV_DECLARE_ERROR(ShapeMismatch);
DMMV_DECLARE_ERROR(NotScalarLoss);
DMMV_DECLARE_ERROR(AllMasked);
DMMV_DECLARE_ERROR(ParseError);
DMMV_DECLARE_ERROR(NonNumericCell);
DMMV_DECLARE_ERROR(EmptySplit);
DMMV_DECLARE_ERROR(DivergedLoss);
DMMV_DECLARE_ERROR(ConfigError);
DMMV_DECLARE_ERROR(ConfigMismatch);
DMMV_DECLARE_ERROR(IoError);
DMMV_DECLARE_ERROR(NonFiniteInput);

#undef DMMV_DECLARE_ERROR

} // namespace dmmv
