#pragma once

#include <stdexcept>
#include <string>

namespace hydrad {

/// Base for every error the daemon raises on purpose.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's mathematical or physical domain.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// The device rejected the request (bad channel, unsupported mode, no backend).
class DeviceError : public Error
{
public:
  using Error::Error;
  virtual bool retryable() const noexcept { return false; }
};

/// The bus backend is temporarily unreachable. Callers may retry.
class BusError : public DeviceError
{
public:
  using DeviceError::DeviceError;
  bool retryable() const noexcept override { return true; }
};

/// Another watering or measuring activity already owns the controller.
class ConflictError : public Error
{
public:
  using Error::Error;
};

class NotCalibratedError : public Error
{
public:
  NotCalibratedError()
    : Error("no calibration profile loaded")
  {
  }
};

/// A calibration profile whose dry code does not exceed its wet code.
class InvalidProfileError : public Error
{
public:
  using Error::Error;
};

/// Malformed persisted document. `field()` names the offending key.
class ParseError : public Error
{
public:
  ParseError(std::string field, const std::string& what)
    : Error(field + ": " + what)
    , field_(std::move(field))
  {
  }

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Configuration value that violates an invariant. `field()` is dotted.
class ConfigError : public Error
{
public:
  ConfigError(std::string field, const std::string& what)
    : Error(field + ": " + what)
    , field_(std::move(field))
    , message_(what)
  {
  }

  const std::string& field() const noexcept { return field_; }
  /// The complaint without the field prefix.
  const std::string& message() const noexcept { return message_; }

private:
  std::string field_;
  std::string message_;
};

/// History append that would break timestamp order.
class OrderingError : public Error
{
public:
  using Error::Error;
};

class StorageError : public Error
{
public:
  using Error::Error;
};

}  // namespace hydrad
