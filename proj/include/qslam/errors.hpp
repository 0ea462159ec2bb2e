#pragma once

#include <stdexcept>
#include <string>

namespace qslam {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyScan : Error { EmptyScan() : Error("empty scan") {} };
struct EmptyPatch : Error { EmptyPatch() : Error("empty patch") {} };
struct InsufficientPoints : Error {
    explicit InsufficientPoints(const std::string& what) : Error(what) {}
};
struct SingularMoments : Error { SingularMoments() : Error("singular moment matrix") {} };
struct DegenerateGradient : Error { DegenerateGradient() : Error("gradient below floor") {} };
struct NoTargets : Error { NoTargets() : Error("no target patches") {} };
struct Underconstrained : Error { Underconstrained() : Error("fewer than 6 residual rows") {} };
struct Diverged : Error { Diverged() : Error("optimizer diverged") {} };
struct OutOfRange : Error { OutOfRange() : Error("coordinate outside index range") {} };
struct CorruptMap : Error {
    explicit CorruptMap(const std::string& what) : Error("corrupt map: " + what) {}
};
struct MalformedFile : Error {
    explicit MalformedFile(const std::string& what) : Error("malformed file: " + what) {}
};
struct LocalizationFailed : Error {
    explicit LocalizationFailed(const std::string& what) : Error("localization failed: " + what) {}
};
struct MisalignedTrajectories : Error {
    explicit MisalignedTrajectories(const std::string& what) : Error(what) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io: " + what) {}
};

}  // namespace qslam
