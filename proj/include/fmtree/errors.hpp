#pragma once

#include <stdexcept>
#include <string>

namespace fmtree {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FMTREE_DECLARE_ERROR(Name)              \
    class Name : public Error {                 \
    public:                                     \
        using Error::Error;                     \
    }

// flash device
FMTREE_DECLARE_ERROR(InvalidGeometry);
FMTREE_DECLARE_ERROR(OutOfRange);
FMTREE_DECLARE_ERROR(MonotonicityViolation);

// digit words and slot states
FMTREE_DECLARE_ERROR(Overflow);
FMTREE_DECLARE_ERROR(InvalidDigit);
FMTREE_DECLARE_ERROR(WidthMismatch);
FMTREE_DECLARE_ERROR(IllegalTransition);

// trees
FMTREE_DECLARE_ERROR(InvalidConfig);
FMTREE_DECLARE_ERROR(ConfigTooLarge);
FMTREE_DECLARE_ERROR(KeyOverflow);
FMTREE_DECLARE_ERROR(DeviceFull);
FMTREE_DECLARE_ERROR(AlreadyBarren);

// benchmark harness
FMTREE_DECLARE_ERROR(TrialFailure);
FMTREE_DECLARE_ERROR(IoFailure);

#undef FMTREE_DECLARE_ERROR

}  // namespace fmtree
