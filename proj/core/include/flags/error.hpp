#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace flags {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations on operation arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, activation or parameter encountered during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch, malformed };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Configuration problems carry the dotted key path that caused them.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace flags
