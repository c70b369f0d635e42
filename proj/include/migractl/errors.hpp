#pragma once

#include <stdexcept>
#include <string>

namespace migractl {

/// Base of every domain error raised by the library. `name()` is the stable
/// identifier printed by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(const char* name, const std::string& what) : std::runtime_error(what), name_(name) {}
  const char* name() const noexcept { return name_; }

 private:
  const char* name_;
};

#define MIGRACTL_DEFINE_ERROR(Type)                                         \
  class Type : public Error {                                               \
   public:                                                                  \
    explicit Type(const std::string& what) : Error(#Type, what) {}          \
  };

// mean velocity coincides with the target, nothing to steer
MIGRACTL_DEFINE_ERROR(DegenerateMean)
MIGRACTL_DEFINE_ERROR(NonPositiveMean)
MIGRACTL_DEFINE_ERROR(InadmissibleControl)
MIGRACTL_DEFINE_ERROR(NonFiniteState)
MIGRACTL_DEFINE_ERROR(UnsupportedSchedule)
MIGRACTL_DEFINE_ERROR(BudgetOutOfRange)
MIGRACTL_DEFINE_ERROR(FormatError)

#undef MIGRACTL_DEFINE_ERROR

}  // namespace migractl
