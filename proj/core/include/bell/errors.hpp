#pragma once

#include <stdexcept>
#include <string>

namespace bell {

// Every failure raised by the toolchain derives from Error and carries a
// stable kind string that the CLI prints and tests match on.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define BELL_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

// front-end
BELL_DEFINE_ERROR(SchemaError);
BELL_DEFINE_ERROR(ValidationError);
// middle-end
BELL_DEFINE_ERROR(UnreachableBlockError);
BELL_DEFINE_ERROR(UseBeforeDefError);
BELL_DEFINE_ERROR(CriticalEdgeError);
BELL_DEFINE_ERROR(FrameOverflowError);
BELL_DEFINE_ERROR(AllocationError);
// back-end
BELL_DEFINE_ERROR(UnsupportedNodeError);
BELL_DEFINE_ERROR(OffsetOverflowError);
BELL_DEFINE_ERROR(ImmediateOverflowError);
BELL_DEFINE_ERROR(DecodeError);
BELL_DEFINE_ERROR(DurationMismatchError);
BELL_DEFINE_ERROR(ScanTargetError);
// simulator
BELL_DEFINE_ERROR(DeadlockError);
BELL_DEFINE_ERROR(StepIndexError);
BELL_DEFINE_ERROR(MaxTicksExceeded);
BELL_DEFINE_ERROR(DetectionScriptExhausted);
BELL_DEFINE_ERROR(NoFeedbackCycleError);
BELL_DEFINE_ERROR(MemoryFaultError);
// reports
BELL_DEFINE_ERROR(BandViolation);

#undef BELL_DEFINE_ERROR

}  // namespace bell
