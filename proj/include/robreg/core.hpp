#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace robreg {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Base of all numerical/usage errors thrown by the library. what() starts
/// with a stable error name, e.g. "DegenerateColumn: ...".
struct Error : std::runtime_error {
  explicit Error(const std::string& name, const std::string& detail)
      : std::runtime_error(name + ": " + detail), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

#define ROBREG_DEFINE_ERROR(NAME)                       \
  struct NAME : Error {                                 \
    explicit NAME(const std::string& detail)            \
        : Error(#NAME, detail) {}                       \
  }

ROBREG_DEFINE_ERROR(DimensionMismatch);
ROBREG_DEFINE_ERROR(DegenerateColumn);
ROBREG_DEFINE_ERROR(InvalidArgument);
ROBREG_DEFINE_ERROR(AlphaZero);
ROBREG_DEFINE_ERROR(NonpositiveArgument);
ROBREG_DEFINE_ERROR(IndefiniteSurrogate);
ROBREG_DEFINE_ERROR(SingularDesign);
ROBREG_DEFINE_ERROR(BracketFailure);
ROBREG_DEFINE_ERROR(SingularS);
ROBREG_DEFINE_ERROR(SingularGram);
ROBREG_DEFINE_ERROR(SingularPsi);
ROBREG_DEFINE_ERROR(AllResponsesZero);
ROBREG_DEFINE_ERROR(ParseError);

#undef ROBREG_DEFINE_ERROR

/// Log levels selected via the ROBREG_LOG environment variable
/// (error < info < debug; default error).
enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ROBREG_LOG");
    if (env == nullptr) return LogLevel::kError;
    const std::string value(env);
    if (value == "debug") return LogLevel::kDebug;
    if (value == "info") return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

}  // namespace robreg
