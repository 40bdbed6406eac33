#pragma once

#include <stdexcept>
#include <string>

namespace ifqa {

/// Failure categories. The CLI maps the first group to exit status 1
/// (bad input) and the rest to exit status 2 (runtime failure).
enum class ErrorKind {
  Config,
  Parameter,
  Domain,
  Shape,
  Validation,
  Conflict,
  NotFound,
  UnsupportedHead,
  EmptyScope,
  UndefinedCorrelation,
  Io,
  Load,
  NonFinite,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by the caller's input rather than the environment.
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

#define IFQA_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

IFQA_DEFINE_ERROR(ConfigError, Config)
IFQA_DEFINE_ERROR(ParameterError, Parameter)
IFQA_DEFINE_ERROR(DomainError, Domain)
IFQA_DEFINE_ERROR(ShapeError, Shape)
IFQA_DEFINE_ERROR(ValidationError, Validation)
IFQA_DEFINE_ERROR(ConflictError, Conflict)
IFQA_DEFINE_ERROR(NotFoundError, NotFound)
IFQA_DEFINE_ERROR(UnsupportedHeadError, UnsupportedHead)
IFQA_DEFINE_ERROR(EmptyScopeError, EmptyScope)
IFQA_DEFINE_ERROR(UndefinedCorrelationError, UndefinedCorrelation)
IFQA_DEFINE_ERROR(IoError, Io)
IFQA_DEFINE_ERROR(LoadError, Load)
IFQA_DEFINE_ERROR(NonFiniteLossError, NonFinite)

#undef IFQA_DEFINE_ERROR

}  // namespace ifqa
