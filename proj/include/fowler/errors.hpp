#pragma once

#include <stdexcept>
#include <string>

namespace fowler {

// Every failure the library reports derives from Error so the CLI can map
// the family onto its exit-code contract in one place.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define FOWLER_DEFINE_ERROR(Name, Base)                              \
  class Name : public Base {                                         \
   public:                                                           \
    explicit Name(const std::string& what) : Base(what) {}           \
    const char* kind() const noexcept override { return #Name; }     \
  };

FOWLER_DEFINE_ERROR(DomainError, Error)
FOWLER_DEFINE_ERROR(NoPositiveSolution, DomainError)
FOWLER_DEFINE_ERROR(ConvergenceFailure, Error)
FOWLER_DEFINE_ERROR(InsufficientWindow, DomainError)
FOWLER_DEFINE_ERROR(WrongVerdict, DomainError)
FOWLER_DEFINE_ERROR(BracketFailure, DomainError)
FOWLER_DEFINE_ERROR(SamplerDegenerate, DomainError)
FOWLER_DEFINE_ERROR(SchemaMismatch, Error)
FOWLER_DEFINE_ERROR(IoError, Error)

#undef FOWLER_DEFINE_ERROR

}  // namespace fowler
