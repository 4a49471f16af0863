#pragma once

#include <stdexcept>
#include <string>

namespace clustcube {

/// Base class for every failure the engine reports. Callers that need to map
/// failures onto exit codes or HTTP statuses switch on kind().
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kSyntax,      // malformed manifest, CSV, CODQ text
    kReference,   // unknown table, column, cuboid, dimension
    kData,        // coercion failures, duplicate keys, nulls in keys
    kDomain,      // precondition of an analytic operation violated
    kConflict,    // a build for the same cuboid is already running
    kIo,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(Kind::kSyntax, what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ReferenceError : public Error {
 public:
  explicit ReferenceError(const std::string& what) : Error(Kind::kReference, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::kData, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Kind::kDomain, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Kind::kIo, what) {}
};

}  // namespace clustcube
