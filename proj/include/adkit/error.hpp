#pragma once

#include <stdexcept>
#include <string>

namespace adkit {

// Exit-code families used by the CLI. Library code throws; tools map.
enum class ErrorKind
{
  input = 2,     // unreadable or malformed input
  shape = 3,     // dimension or configuration mismatch
  numerical = 4  // solver or degenerate-data failure
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

#define ADKIT_DEFINE_ERROR(Name, Kind)                                         \
  class Name : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    explicit Name(const std::string& what)                                     \
      : Error(ErrorKind::Kind, what)                                           \
    {}                                                                         \
  }

ADKIT_DEFINE_ERROR(FormatError, input);
ADKIT_DEFINE_ERROR(DataError, input);
ADKIT_DEFINE_ERROR(ManifestError, input);
ADKIT_DEFINE_ERROR(SpecError, input);
ADKIT_DEFINE_ERROR(DimensionError, shape);
ADKIT_DEFINE_ERROR(EmptyStoreError, shape);
ADKIT_DEFINE_ERROR(ArgumentError, shape);
ADKIT_DEFINE_ERROR(ConfigError, shape);
ADKIT_DEFINE_ERROR(DegenerateDataError, numerical);
ADKIT_DEFINE_ERROR(DegenerateError, numerical);
ADKIT_DEFINE_ERROR(ConvergenceError, numerical);

#undef ADKIT_DEFINE_ERROR

} // namespace adkit
