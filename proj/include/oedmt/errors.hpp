#pragma once

#include <stdexcept>
#include <string>

namespace oedmt {

// Error categories map onto CLI exit codes: Config -> 2, Numerical -> 3, Io -> 4.
enum class ErrorKind { Config, Numerical, Io };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct NonSPDPrior : Error {
  explicit NonSPDPrior(const std::string& msg) : Error(ErrorKind::Numerical, msg) {}
};

struct NumericalBreakdown : Error {
  explicit NumericalBreakdown(const std::string& msg) : Error(ErrorKind::Numerical, msg) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct ManifestParseError : Error {
  explicit ManifestParseError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct NonFiniteSample : Error {
  explicit NonFiniteSample(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct DegenerateGeometry : Error {
  explicit DegenerateGeometry(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct KTooLarge : Error {
  explicit KTooLarge(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct EmptyCandidates : Error {
  explicit EmptyCandidates(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct ScenarioForwardMissing : Error {
  explicit ScenarioForwardMissing(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct CombinatorialBlowup : Error {
  explicit CombinatorialBlowup(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct InvalidExtent : Error {
  explicit InvalidExtent(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct InconsistentInputs : Error {
  explicit InconsistentInputs(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

}  // namespace oedmt
