#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace afw {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A linear operator mapped two independent random starts to zero.
class ZeroOperator : public Error {
 public:
  ZeroOperator() : Error("operator is zero on two independent starts") {}
};

/// An LMO was asked to minimize a zero linear function.
class ZeroDirection : public Error {
 public:
  ZeroDirection() : Error("linear minimization oracle called with a zero direction") {}
};

class InfeasibleStart : public Error {
 public:
  using Error::Error;
};

class MissingProjection : public Error {
 public:
  using Error::Error;
};

class MissingStrongConvexity : public Error {
 public:
  MissingStrongConvexity() : Error("objective has no strong convexity constant") {}
};

class IncompleteTrace : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class NegativeGap : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class NonBinaryLabels : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, std::string text, const std::string& reason)
      : Error("line " + std::to_string(line_no) + ": " + reason + ": '" + text + "'"),
        line_no_(line_no),
        text_(std::move(text)) {}

  std::size_t line_number() const { return line_no_; }
  const std::string& text() const { return text_; }

 private:
  std::size_t line_no_;
  std::string text_;
};

/// Invalid experiment configuration; `field()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& reason)
      : Error("config error at '" + field + "': " + reason), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class MetadataMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace afw
